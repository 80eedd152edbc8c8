"""Entropy, Dirichlet form, heat semigroup and (modified) log-Sobolev constants.

The Dirichlet form is the nonnegative sum
``E(f, g) = 1/2 sum_{x,y} pi(x) p(x,y) (f(x)-f(y)) (g(x)-g(y))``, which equals
``<f, (I - p) g>_pi`` for reversible chains.  The heat semigroup is
``H_t = exp(-t (I - P))``, evaluated by uniformization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .chain import Distribution, FiniteChain, as_weights, is_reversible
from .errors import NotReversibleError
from .report import InequalityReport, Status

POISSON_TAIL = 1e-12
_SERIES_CUTOFF = 1e-3


# --- entropy -----------------------------------------------------------------

def _phi(r: np.ndarray) -> np.ndarray:
    """``r log r - r + 1`` (>= 0), accurate near r = 1; phi(0) = 1."""
    r = np.asarray(r, dtype=float)
    u = r - 1.0
    out = np.empty_like(r)
    near = np.abs(u) < _SERIES_CUTOFF
    un = u[near]
    # sum_{k>=2} (-1)^k u^k / (k (k-1))
    out[near] = un * un * (0.5 - un / 6.0 + un * un / 12.0 - un**3 / 20.0 + un**4 / 30.0)
    far = ~near
    rf = r[far]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[far] = np.where(rf > 0, rf * np.log(np.where(rf > 0, rf, 1.0)), 0.0) - rf + 1.0
    return out


def entropy_functional(f, pi) -> float:
    """``Ent_pi(f) = E_pi[f log(f / E_pi f)]`` with ``0 log 0 = 0``."""
    f = np.asarray(f, dtype=float)
    w = as_weights(pi)
    if np.any(f < 0):
        raise ValueError("entropy is defined for nonnegative f")
    m = float(w @ f)
    if m <= 0:
        raise ValueError("entropy needs E_pi f > 0")
    if np.ptp(f[w > 0]) == 0:
        return 0.0
    return max(m * float(w @ _phi(f / m)), 0.0)


# --- Dirichlet form ------------------------------------------------------------

def _require_reversible(chain: FiniteChain, pi) -> np.ndarray:
    w = as_weights(chain.stationary if pi is None else pi)
    if not is_reversible(chain, w):
        raise NotReversibleError("the Dirichlet form is defined for reversible chains only")
    return w


def _edge_weights(chain: FiniteChain, pi) -> np.ndarray:
    w = _require_reversible(chain, pi)
    flux = w[:, None] * chain.kernel
    return 0.5 * (flux + flux.T)


def dirichlet_form(f, g, chain: FiniteChain, pi=None) -> float:
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    w = _edge_weights(chain, pi)
    df = f[:, None] - f[None, :]
    dg = g[:, None] - g[None, :]
    return 0.5 * float(np.sum(w * df * dg))


def generator_form(f, g, chain: FiniteChain, pi=None) -> float:
    """``<f, (I - p) g>_pi``; equal to :func:`dirichlet_form` for reversible chains."""
    w = as_weights(chain.stationary if pi is None else pi)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    return float(np.sum(w * f * (g - chain.kernel @ g)))


def spectral_gap(chain: FiniteChain) -> float:
    """Smallest nonzero eigenvalue of ``I - p`` on ``L^2(pi)`` (reversible chains)."""
    w = _require_reversible(chain, None)
    s = np.sqrt(w)
    sym = s[:, None] * chain.kernel / s[None, :]
    sym = 0.5 * (sym + sym.T)
    ev = np.sort(np.linalg.eigvalsh(np.eye(chain.n) - sym))
    return float(ev[1]) if chain.n > 1 else math.inf


def relaxation_time(chain: FiniteChain) -> float:
    return 1.0 / spectral_gap(chain)


# --- heat semigroup -------------------------------------------------------------

def poisson_weights(t: float, tail: float = POISSON_TAIL) -> np.ndarray:
    """Poisson(t) probabilities 0..K with the mass beyond K below ``tail``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return np.ones(1)
    k_max = int(stats.poisson.isf(tail, t)) + 1
    return stats.poisson.pmf(np.arange(k_max + 1), t)


class HeatOperator:
    """Continuous-time heat flow ``H_t = exp(-t (I - P))`` of a chain."""

    def __init__(self, chain: FiniteChain):
        self.chain = chain

    def apply(self, f, t: float) -> np.ndarray:
        """``H_t f``; accepts a vector or a matrix of column functions."""
        f = np.asarray(f, dtype=float)
        weights = poisson_weights(t)
        # H_t fixes constants exactly: flow only the deviation from f[0]
        base = f[0] if f.ndim == 1 else f[0][None, :]
        g = f - base
        out = weights[0] * g
        for wk in weights[1:]:
            g = self.chain.kernel @ g
            out = out + wk * g
        return base + out

    def apply_measure(self, mu, t: float) -> Distribution:
        """The law ``mu H_t`` of the continuous-time walk started from ``mu``."""
        v = as_weights(mu)
        weights = poisson_weights(t)
        out = weights[0] * v
        for wk in weights[1:]:
            v = v @ self.chain.kernel
            out = out + wk * v
        return Distribution.normalized(out)

    __call__ = apply


def heat_apply(chain: FiniteChain, f, t: float) -> np.ndarray:
    return HeatOperator(chain).apply(f, t)


def heat_measure(chain: FiniteChain, mu, t: float) -> Distribution:
    return HeatOperator(chain).apply_measure(mu, t)


# --- log-Sobolev constants --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SobolevEstimate:
    """Upper bound on rho or rho_0, attained by the feasible ``minimizer``."""

    value: float
    minimizer: np.ndarray
    restarts: int
    status: str  # "converged" | "iteration_cap"
    kind: str = ""

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "upper_bound": True,
            "minimizer": self.minimizer.tolist(),
            "restarts": self.restarts,
            "status": self.status,
        }


def _log_ratio_parts(kind: str, g: np.ndarray, w: np.ndarray, pi: np.ndarray):
    """Numerator, entropy and their gradients in ``g`` for ``f = exp(g)``."""
    g = g - g.max()
    f = np.exp(g)
    m = float(pi @ f)
    ent = m * float(pi @ _phi(f / m))
    d_ent = pi * f * (g - math.log(m))
    dg = g[:, None] - g[None, :]
    if kind == "mlsi":
        df = f[:, None] - f[None, :]
        num = 0.5 * float(np.sum(w * df * dg))
        d_num = np.sum(w * (f[:, None] * dg + df), axis=1)
    else:
        h = np.exp(0.5 * g)
        dh = h[:, None] - h[None, :]
        num = 0.5 * float(np.sum(w * dh * dh))
        d_num = h * np.sum(w * dh, axis=1)
    return num, ent, d_num, d_ent


def sobolev_ratio(kind: str, f, chain: FiniteChain, pi=None) -> float:
    """``E(sqrt f, sqrt f)/Ent(f)`` (kind="lsi") or ``E(f, log f)/Ent(f)`` (kind="mlsi").

    The mlsi ratio is infinite for f with zeros next to positive values.
    """
    f = np.asarray(f, dtype=float)
    w = _edge_weights(chain, pi)
    pi_w = as_weights(chain.stationary if pi is None else pi)
    ent = entropy_functional(f, pi_w)
    if ent <= 0:
        return math.inf
    if kind == "lsi":
        s = np.sqrt(f)
        ds = s[:, None] - s[None, :]
        return 0.5 * float(np.sum(w * ds * ds)) / ent
    if kind != "mlsi":
        raise ValueError(f"unknown kind {kind!r}")
    if np.all(f > 0):
        g = np.log(f)
        df = f[:, None] - f[None, :]
        return 0.5 * float(np.sum(w * df * (g[:, None] - g[None, :]))) / ent
    pos = f > 0
    if np.any(w[np.ix_(pos, ~pos)] > 0):
        return math.inf
    return 0.0 if ent > 0 else math.inf


def _seeds(chain: FiniteChain, pi: np.ndarray, restarts: int, rng: np.random.Generator):
    n = chain.n
    seeds = []
    # near-constant directions along the slowest mode: the infimum may be this limit
    s = np.sqrt(pi)
    sym = s[:, None] * chain.kernel / s[None, :]
    sym = 0.5 * (sym + sym.T)
    _, vecs = np.linalg.eigh(np.eye(n) - sym)
    slow = vecs[:, 1] / s if n > 1 else np.zeros(n)
    slow /= max(np.max(np.abs(slow)), 1e-300)
    for eps in (1e-2, 1e-4):
        seeds += [eps * slow, -eps * slow]
    for x in range(n):
        delta = np.full(n, 1e-3)
        delta[x] = 1.0
        seeds.append(np.log(delta))
    while len(seeds) < restarts + 4 + n:
        scale = math.exp(rng.uniform(math.log(0.05), math.log(5.0)))
        seeds.append(rng.normal(0.0, scale, n))
    return seeds


def _estimate(kind: str, chain: FiniteChain, pi, restarts: int, iteration_cap: int, seed) -> SobolevEstimate:
    pi_w = as_weights(chain.stationary if pi is None else pi)
    w = _edge_weights(chain, pi_w)
    if chain.n < 2:
        raise ValueError("log-Sobolev constants need at least two states")
    rng = np.random.default_rng(seed)

    def objective(g):
        num, ent, d_num, d_ent = _log_ratio_parts(kind, g, w, pi_w)
        if not ent > 0:
            return math.inf, np.zeros_like(g)
        r = num / ent
        return r, (d_num - r * d_ent) / ent

    best_val, best_g, converged = math.inf, None, False
    for g0 in _seeds(chain, pi_w, restarts, rng):
        val0, _ = objective(g0)
        if not math.isfinite(val0):
            continue
        res = optimize.minimize(
            objective, g0, jac=True, method="L-BFGS-B",
            options={"maxiter": iteration_cap, "ftol": 1e-15, "gtol": 1e-12},
        )
        cand = [(val0, g0)]
        if math.isfinite(res.fun):
            cand.append((float(res.fun), res.x))
        for val, g in cand:
            if val < best_val:
                best_val, best_g = val, g
                converged = bool(res.success) or res.nit < iteration_cap

    f = np.exp(best_g - best_g.max())
    f /= pi_w @ f
    value = sobolev_ratio(kind, f, chain, pi_w)
    return SobolevEstimate(value, f, restarts, "converged" if converged else "iteration_cap", kind)


def lsi_constant(chain: FiniteChain, pi=None, restarts: int = 32, iteration_cap: int = 10_000,
                 seed=0) -> SobolevEstimate:
    """Upper-bound estimate of ``rho = inf E(sqrt f, sqrt f) / Ent_pi(f)``."""
    return _estimate("lsi", chain, pi, restarts, iteration_cap, seed)


def mlsi_constant(chain: FiniteChain, pi=None, restarts: int = 32, iteration_cap: int = 10_000,
                  seed=0) -> SobolevEstimate:
    """Upper-bound estimate of ``rho_0 = inf E(f, log f) / Ent_pi(f)`` over f > 0."""
    return _estimate("mlsi", chain, pi, restarts, iteration_cap, seed)


def entropy_decay_check(chain: FiniteChain, f, rho0: float, t_grid) -> InequalityReport:
    """Compare ``Ent(H_t f)`` with ``exp(-rho0 t) Ent(f)`` on a time grid.

    ``rho0`` is normally an optimizer estimate (an upper bound), so a
    violation says the estimate is too large; it is reported, not asserted.
    """
    f = np.asarray(f, dtype=float)
    pi = chain.stationary.weights
    ent0 = entropy_functional(f, pi)
    heat = HeatOperator(chain)
    worst, witness, rows = 0.0, {"t": 0.0}, []
    for t in t_grid:
        lhs = entropy_functional(heat.apply(f, t), pi)
        rhs = math.exp(-rho0 * t) * ent0
        r = 0.0 if lhs == 0 and rhs == 0 else (lhs / rhs if rhs > 0 else math.inf)
        rows.append({"t": float(t), "entropy": lhs, "bound": rhs, "ratio": r})
        if r > worst:
            worst, witness = r, {"t": float(t), "f": f.tolist()}
    holds = worst <= 1.0 + 1e-9
    return InequalityReport(
        "entropy_decay", rho0, worst, witness, trials=len(rows), status=Status.REPORT_ONLY,
        notes="holds on grid" if holds else "violated: rho0 estimate exceeds the true constant",
        table=rows,
    )




def entropy_monotonicity_check(chain: FiniteChain, f, t_grid, tol: float = 1e-12) -> InequalityReport:
    """``t -> Ent_pi(H_t f)`` is nonincreasing on the (sorted) grid."""
    f = np.asarray(f, dtype=float)
    pi = chain.stationary.weights
    heat = HeatOperator(chain)
    rows, prev, rise = [], math.inf, 0.0
    for t in sorted(float(s) for s in t_grid):
        ent = entropy_functional(heat.apply(f, t), pi)
        rise = max(rise, ent - prev)
        prev = ent
        rows.append({"t": t, "entropy": ent})
    return InequalityReport.asserted(
        "entropy_monotone", tol, rise, rise <= tol, witness={"f": f.tolist()},
        trials=len(rows), table=rows, notes="worst_ratio is the largest increase between grid points",
    )


def heat_identity_check(chain: FiniteChain, trials: int = 50, seed=0, tol: float = 1e-9) -> InequalityReport:
    """Semigroup law ``H_{s+t} = H_s H_t``, ``H_0 = I``, constants fixed and mass conserved."""
    rng = np.random.default_rng(seed)
    heat = HeatOperator(chain)
    n = chain.n
    worst, witness = 0.0, {}
    ones = np.ones(n)
    for _ in range(trials):
        f = rng.normal(size=n)
        s, t = rng.uniform(0.0, 5.0, size=2)
        mu = rng.dirichlet(np.ones(n))
        errs = {
            "semigroup": np.max(np.abs(heat.apply(f, s + t) - heat.apply(heat.apply(f, t), s))),
            "identity": np.max(np.abs(heat.apply(f, 0.0) - f)),
            "constant": np.max(np.abs(heat.apply(ones, t) - 1.0)),
            "mass": abs(float(mu @ heat.apply(np.eye(n), t).sum(axis=1)) - 1.0),
        }
        for k, e in errs.items():
            if e > worst:
                worst, witness = float(e), {"identity": k, "s": float(s), "t": float(t), "f": f.tolist()}
    return InequalityReport.asserted(
        "heat_identities", tol, worst, worst <= tol, witness=witness, trials=trials,
        notes="worst_ratio is the largest absolute error",
    )
