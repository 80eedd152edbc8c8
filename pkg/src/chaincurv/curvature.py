"""Coarse Ricci curvature and its immediate consequences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import FiniteChain, apply_P
from .report import InequalityReport, Status
from .transport import lipschitz_norm, w1

__all__ = [
    "CurvatureResult",
    "coarse_ricci",
    "lipschitz_norm",
    "lipschitz_contraction_check",
    "diameter_bound_check",
]


@dataclass(frozen=True, eq=False)
class CurvatureResult:
    kappa: float
    witness_pair: tuple[int, int]
    ratios: np.ndarray
    mode: str

    @property
    def alpha(self) -> float | None:
        return 1.0 / self.kappa if self.kappa > 0 else None

    def to_record(self, chain: FiniteChain | None = None) -> dict:
        x, y = self.witness_pair
        if chain is not None:
            x, y = chain.states[x], chain.states[y]
        return {
            "kappa": self.kappa,
            "alpha": self.alpha,
            "witness_pair": [x, y],
            "mode": self.mode,
        }


def coarse_ricci(chain: FiniteChain, mode: str = "all_pairs") -> CurvatureResult:
    """Largest kappa with ``W1(p(x,.), p(y,.)) <= (1 - kappa) d(x, y)`` on the evaluated pairs.

    ``mode="all_pairs"`` evaluates every x != y; ``"neighbors_only"`` only
    edges of the support graph and requires the graph-distance metric.
    """
    if mode not in ("all_pairs", "neighbors_only"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "neighbors_only" and not chain.graph_metric:
        raise ValueError("neighbors_only mode needs the graph-distance metric")
    n = chain.n
    p, d = chain.kernel, chain.metric
    ratios = np.full((n, n), np.nan)
    if n == 1:
        return CurvatureResult(1.0, (0, 0), ratios, mode)
    adj = (p > 0) | (p.T > 0)
    for x in range(n):
        for y in range(x + 1, n):
            if mode == "neighbors_only" and not adj[x, y]:
                continue
            r = w1(p[x], p[y], d).value / d[x, y]
            ratios[x, y] = ratios[y, x] = r
    x, y = np.unravel_index(np.nanargmax(ratios), ratios.shape)
    kappa = 1.0 - float(ratios[x, y])
    return CurvatureResult(kappa, (int(min(x, y)), int(max(x, y))), ratios, mode)


def lipschitz_contraction_check(
    chain: FiniteChain,
    kappa: float,
    trials: int = 200,
    seed=0,
    steps=(1, 2, 3),
    tol: float = 1e-9,
) -> InequalityReport:
    """Check ``||P_n g||_Lip <= (1 - kappa)^n ||g||_Lip`` on random and distance functions.

    Also checks that the dual potential of the extremal pair attains
    ``||P_1 g||_Lip / ||g||_Lip = 1 - kappa``.
    """
    rng = np.random.default_rng(seed)
    d = chain.metric
    contraction = 1.0 - kappa
    funcs = [rng.uniform(-1.0, 1.0, chain.n) for _ in range(trials)]
    funcs += [d[x0].copy() for x0 in range(chain.n)]

    worst, witness, ok = -np.inf, {}, True
    for g in funcs:
        norm = lipschitz_norm(g, d)
        if norm == 0:
            continue
        for n_steps in steps:
            moved = lipschitz_norm(apply_P(chain, g, n_steps), d)
            if moved > contraction**n_steps * norm + tol:
                ok = False
            r = (moved / norm) ** (1.0 / n_steps)
            if r > worst:
                worst = r
                witness = {"g": g.tolist(), "n": n_steps}

    # sup over g is attained by the dual potential of the extremal pair
    res = coarse_ricci(chain)
    x, y = res.witness_pair
    notes = ""
    if abs(res.kappa - kappa) > tol:
        notes = f"supplied kappa {float(kappa):.12g} differs from computed {res.kappa:.12g}; "
    plan = w1(chain.kernel[x], chain.kernel[y], d)
    g_star = plan.dual_potential
    norm = lipschitz_norm(g_star, d)
    if norm > 0:
        attained = lipschitz_norm(apply_P(chain, g_star, 1), d) / norm
        if abs(attained - (1.0 - res.kappa)) > tol:
            ok = False
        notes += f"dual potential of pair {chain.states[x]!r},{chain.states[y]!r} attains {attained:.12g}"
    else:
        notes += "all kernel rows coincide; extremal potential is constant"
    return InequalityReport.asserted(
        "lipschitz_contraction",
        contraction,
        float(worst) if np.isfinite(worst) else 0.0,
        ok,
        witness=witness,
        trials=len(funcs) * len(steps),
        notes=notes,
    )


def diameter_bound_check(chain: FiniteChain, kappa: float) -> InequalityReport:
    """``diam(Omega, d) <= 2 / kappa`` for graph walks with positive curvature."""
    diam = chain.diameter
    if kappa <= 0:
        return InequalityReport(
            "diameter_bound", float("nan"), diam, {"diameter": diam, "kappa": kappa},
            trials=0, status=Status.NOT_APPLICABLE, notes="kappa <= 0",
        )
    if not chain.graph_metric:
        return InequalityReport(
            "diameter_bound", 2.0 / kappa, diam, {"diameter": diam, "kappa": kappa},
            trials=0, status=Status.NOT_APPLICABLE, notes="metric is not the graph distance",
        )
    bound = 2.0 / kappa
    return InequalityReport.asserted(
        "diameter_bound", bound, diam / bound, diam <= bound * (1 + 1e-12),
        witness={"diameter": diam, "kappa": kappa}, trials=1,
        notes=f"diameter {diam:g} vs 2/kappa = {bound:.12g}",
    )
