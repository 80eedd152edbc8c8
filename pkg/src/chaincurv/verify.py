"""Inequality harness: T1 scans, concentration, the drift coupling, conjecture probes."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.special import logsumexp

from .chain import FiniteChain, as_weights, is_lazy, is_reversible
from .curvature import coarse_ricci
from .drift import build_discrete_drift, information_rate
from .functional import (
    HeatOperator,
    dirichlet_form,
    entropy_functional,
    mlsi_constant,
    relaxation_time,
)
from .report import InequalityReport, Status
from .transport import (
    diameter_t1_constant,
    lipschitz_norm,
    relative_entropy,
    w1,
    w1_value,
)

log = logging.getLogger(__name__)

BOUND_SLACK = 1e-9
MIXTURE_GRID = (0.25, 0.5, 0.75)
TILT_GRID = (-1.0, -0.1, -0.01, 0.01, 0.1, 1.0)
INTERESTING_RATIO = 0.01


def t1_bound(alpha: float, C: float = 2.0) -> float:
    """``C alpha / (2 - 1/alpha)``: the T1 constant under curvature 1/alpha."""
    return C * alpha / (2.0 - 1.0 / alpha)


def _scan_measures(pi: np.ndarray, d: np.ndarray, samples: int, rng: np.random.Generator):
    n = pi.size
    for x in range(n):
        mu = np.zeros(n)
        mu[x] = 1.0
        yield "point_mass", mu
    for x in range(n):
        for y in range(x + 1, n):
            for lam in MIXTURE_GRID:
                mu = np.zeros(n)
                mu[x], mu[y] = lam, 1.0 - lam
                yield "two_point", mu
    # exponential tilts of pi along distance functions; near-extremal as the tilt vanishes
    for x in range(n):
        for lam in TILT_GRID:
            mu = pi * np.exp(-lam * (d[x] - d[x].min()))
            yield "tilt", mu / mu.sum()
    for _ in range(samples):
        conc = 10.0 ** rng.uniform(-2.0, 2.0)
        yield "dirichlet", rng.dirichlet(np.full(n, conc))


def t1_ratio(mu, pi, d) -> float:
    """``W1(mu, pi)^2 / D(mu || pi)``, with 0/0 read as 0."""
    div = relative_entropy(mu, pi)
    if div == 0.0:
        return 0.0
    return w1_value(mu, pi, d) ** 2 / div


def t1_scan(chain: FiniteChain, samples: int = 1000, seed=0, C: float | None = None) -> InequalityReport:
    """Worst ``W1(mu, pi)^2 / D(mu || pi)`` over structured and random mu.

    Asserts the curvature bound ``2 alpha / (2 - 1/alpha)``.  A user constant
    ``C`` for the one-step transitions adds the sharper bound ``C alpha / (2 - 1/alpha)``,
    asserted when ``C`` is at least the certified one-step constant.
    """
    kappa = coarse_ricci(chain).kappa
    if kappa <= 0:
        return InequalityReport(
            "t1_scan", math.nan, math.nan, {"kappa": kappa}, status=Status.NOT_APPLICABLE,
            notes="kappa <= 0",
        )
    alpha = 1.0 / kappa
    base_C = 2.0 if chain.graph_metric else onestep_t1_constant(chain)
    bound = t1_bound(alpha, base_C)
    pi = chain.stationary.weights
    d = chain.metric
    rng = np.random.default_rng(seed)

    worst, witness, trials = 0.0, {}, 0
    for family, mu in _scan_measures(pi, d, samples, rng):
        r = t1_ratio(mu, pi, d)
        trials += 1
        if r > worst:
            worst, witness = r, {"family": family, "mu": mu.tolist()}
    ok = worst <= bound * (1 + BOUND_SLACK)
    notes = f"kappa={kappa:.12g} alpha={alpha:.12g} C={base_C:g}"
    if C is not None:
        sharp = t1_bound(alpha, C)
        certified = onestep_t1_constant(chain)
        holds = worst <= sharp * (1 + BOUND_SLACK)
        notes += f"; user C={C:g} gives {sharp:.12g} ({'holds' if holds else 'violated'})"
        if C >= certified:
            ok = ok and holds
        else:
            notes += f", not asserted: below certified one-step constant {certified:.12g}"
    witness["kappa"] = kappa
    return InequalityReport.asserted("t1_scan", bound, worst, ok, witness=witness, trials=trials, notes=notes)


def t1_sharpness_fit(chains, samples: int = 200, seed=0, lo: float = 0.8, hi: float = 1.2) -> InequalityReport:
    """Fit ``worst T1 ratio ~ alpha^e`` across chains and assert ``lo <= e <= hi``.

    Chains with kappa <= 0 have no alpha; they are tabulated and excluded
    from the fit.  Fewer than two usable chains means no fit and a failure.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rows = []
    for chain, child in zip(chains, ss.spawn(len(chains))):
        kappa = coarse_ricci(chain).kappa
        pi, d = chain.stationary.weights, chain.metric
        rng = np.random.default_rng(child)
        worst = max(t1_ratio(mu, pi, d) for _, mu in _scan_measures(pi, d, samples, rng))
        rows.append({
            "states": chain.n, "kappa": kappa,
            "alpha": 1.0 / kappa if kappa > 0 else None, "worst_ratio": worst,
        })
    usable = [r for r in rows if r["alpha"] is not None and r["worst_ratio"] > 0]
    dropped = len(rows) - len(usable)
    alphas = {round(r["alpha"], 9) for r in usable}
    if len(alphas) < 2:
        return InequalityReport.asserted(
            "t1_sharpness", math.nan, math.nan, False, trials=len(rows), table=rows,
            notes=f"exponent undefined: {len(usable)} chain(s) with kappa > 0, {dropped} with kappa <= 0",
        )
    x = np.log([r["alpha"] for r in usable])
    y = np.log([r["worst_ratio"] for r in usable])
    slope = float(np.polyfit(x, y, 1)[0])
    return InequalityReport.asserted(
        "t1_sharpness", hi, slope, lo <= slope <= hi, trials=len(rows), table=rows,
        witness={"exponent": slope, "range": [lo, hi]},
        notes=f"log-log slope over {len(usable)} chains; {dropped} excluded with kappa <= 0",
    )


def onestep_t1_constant(chain: FiniteChain, spot_checks: int = 0, seed=0) -> float:
    """``max_x Delta(supp p(x, .))^2 / 2``, a T1 constant valid for every kernel row.

    With ``spot_checks > 0`` each row is tested against that many random
    absolutely continuous nu; a violation raises RuntimeError.
    """
    p, d = chain.kernel, chain.metric
    C = max(diameter_t1_constant(p[x], d) for x in range(chain.n))
    if spot_checks:
        rng = np.random.default_rng(seed)
        for x in range(chain.n):
            s = np.flatnonzero(p[x] > 0)
            for _ in range(spot_checks):
                nu = np.zeros(chain.n)
                nu[s] = rng.dirichlet(np.ones(s.size))
                lhs = w1_value(nu, p[x], d) ** 2
                rhs = C * relative_entropy(nu, p[x])
                if lhs > rhs * (1 + BOUND_SLACK) + 1e-15:
                    raise RuntimeError(f"one-step T1 fails at row {chain.states[x]!r}: {lhs:.12g} > {rhs:.12g}")
    return C


def _lipschitz_envelope(values: np.ndarray, d: np.ndarray) -> np.ndarray:
    return np.min(values[None, :] + d, axis=1)


def gaussian_concentration_check(chain: FiniteChain, pi=None, C: float | None = None,
                                 trials: int = 200, seed=0) -> InequalityReport:
    """``log E_pi e^f <= E_pi f + (C/4) ||f||_Lip^2`` for Lipschitz test functions.

    ``C`` is a T1 constant for pi; by default the curvature bound from :func:`t1_bound`.
    """
    pi = chain.stationary.weights if pi is None else as_weights(pi)
    d = chain.metric
    if C is None:
        kappa = coarse_ricci(chain).kappa
        if kappa <= 0:
            return InequalityReport(
                "gaussian_concentration", math.nan, math.nan, status=Status.NOT_APPLICABLE,
                notes="no T1 constant supplied and kappa <= 0",
            )
        C = t1_bound(1.0 / kappa, 2.0 if chain.graph_metric else onestep_t1_constant(chain))
    rng = np.random.default_rng(seed)
    funcs = [d[x0] * s for x0 in range(chain.n) for s in (0.5, 1.0, 2.0)]
    for _ in range(trials):
        raw = rng.uniform(-1.0, 1.0, chain.n) * chain.diameter
        funcs.append(_lipschitz_envelope(raw, d) * 10.0 ** rng.uniform(-1.0, 1.0))

    logpi = np.log(np.where(pi > 0, pi, 1.0))
    live = pi > 0
    worst, witness, ok = 0.0, {}, True
    for f in funcs:
        L = lipschitz_norm(f, d)
        lhs = float(logsumexp(f[live] + logpi[live])) - float(pi @ f)
        rhs = 0.25 * C * L * L
        if lhs > rhs * (1 + BOUND_SLACK) + 1e-15:
            ok = False
        r = lhs / rhs if rhs > 0 else 0.0
        if r > worst:
            worst, witness = r, {"f": f.tolist()}
    return InequalityReport.asserted(
        "gaussian_concentration", C, worst, ok, witness=witness, trials=len(funcs),
        notes="worst_ratio = (log E e^f - E f) / (C/4 ||f||_Lip^2)",
    )


def coupling_simulation(chain: FiniteChain, nu, x0, T: int, n_samples: int = 100_000,
                        seed=0) -> InequalityReport:
    """Simulate the drift and the base walk under stepwise W1-optimal couplings.

    Asserts ``mean d(X_T, B_T) - 3 SE <= sqrt(C alpha / (2 - 1/alpha) D(nu || mu_T))``
    and, on every coupled step met, the one-step lemma
    ``W1(q_t(x, .), p(b, .)) <= sqrt(C D(q_t(x, .) || p(x, .))) + (1 - kappa) d(x, b)``.
    """
    kappa = coarse_ricci(chain).kappa
    if kappa <= 0:
        return InequalityReport("coupling", math.nan, math.nan, status=Status.NOT_APPLICABLE,
                                notes="kappa <= 0")
    sched = build_discrete_drift(chain, nu, x0, T)
    alpha = 1.0 / kappa
    C = onestep_t1_constant(chain)
    div = relative_entropy(sched.target.weights, sched.mu_T.weights)
    bound = math.sqrt(t1_bound(alpha, C) * div)
    p, d, n = chain.kernel, chain.metric, chain.n

    memo: dict[tuple[int, int, int], np.ndarray] = {}
    step_gap = -math.inf

    def coupling(t, x, b):
        nonlocal step_gap
        key = (t, x, b)
        if key not in memo:
            q = sched.kernels[t - 1][x]
            plan = w1(q, p[b], d)
            lemma = math.sqrt(C * relative_entropy(q, p[x])) + (1 - kappa) * d[x, b]
            step_gap = max(step_gap, plan.value - lemma)
            memo[key] = plan.coupling
        return memo[key]

    rng = np.random.default_rng(seed)
    X = np.full(n_samples, sched.x0)
    B = np.full(n_samples, sched.x0)
    # exact joint law of (X_t, B_t) under the same coupling, for cross-checking
    joint = np.zeros((n, n))
    joint[sched.x0, sched.x0] = 1.0
    for t in range(1, T + 1):
        new_joint = np.zeros((n, n))
        for x, b in zip(*np.nonzero(joint)):
            new_joint += joint[x, b] * coupling(t, int(x), int(b))
        joint = new_joint
        pair = X * n + B
        u = rng.random(n_samples)
        for key in np.unique(pair):
            sel = pair == key
            cdf = np.cumsum(coupling(t, int(key // n), int(key % n)).ravel())
            cdf /= cdf[-1]
            idx = np.minimum(np.searchsorted(cdf, u[sel], side="right"), n * n - 1)
            X[sel], B[sel] = idx // n, idx % n

    dist = d[X, B]
    mean = float(dist.mean())
    se = float(dist.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else math.inf
    exact = float(np.sum(joint * d))
    lemma_ok = step_gap <= 1e-9
    ok = mean - 3 * se <= bound and lemma_ok

    empirical = np.bincount(X, minlength=n) / n_samples
    target = sched.target.weights
    s = target > 0
    chi2 = float(n_samples * np.sum((empirical[s] - target[s]) ** 2 / target[s]))
    witness = {
        "mean_distance": mean, "standard_error": se, "exact_mean_distance": exact,
        "bound": bound, "divergence": div, "C": C, "kappa": kappa,
        "w1_endpoint": w1_value(target, sched.mu_T.weights, d),
        "endpoint_chi2": chi2, "endpoint_cells": int(s.sum()),
        "max_step_lemma_gap": step_gap, "coupled_steps": len(memo),
    }
    return InequalityReport.asserted(
        "coupling", bound, mean, ok, witness=witness, trials=n_samples,
        notes="worst_ratio is the Monte Carlo mean of d(X_T, B_T); constant is the entropy bound",
    )


def peres_tetali_report(chain: FiniteChain, restarts: int = 32, seed=0) -> InequalityReport:
    """Report ``rho0 / kappa``; never asserted."""
    notes = []
    if not is_lazy(chain):
        notes.append("precondition: chain is not lazy")
    if not is_reversible(chain):
        notes.append("precondition: chain is not reversible")
        return InequalityReport("peres_tetali", math.nan, math.nan, status=Status.REPORT_ONLY,
                                notes="; ".join(notes))
    kappa = coarse_ricci(chain).kappa
    est = mlsi_constant(chain, restarts=restarts, seed=seed)
    ratio = est.value / kappa if kappa > 0 else math.inf
    if ratio < INTERESTING_RATIO:
        notes.append("interesting: ratio below 0.01")
    return InequalityReport(
        "peres_tetali", kappa, ratio,
        witness={"kappa": kappa, "rho0": est.value, "converged": est.status == "converged",
                 "minimizer": est.minimizer.tolist()},
        trials=est.restarts, status=Status.REPORT_ONLY, notes="; ".join(notes),
        table=[{"states": chain.n, "kappa": kappa, "rho0": est.value, "ratio": ratio}],
    )


def default_T_grid(chain: FiniteChain) -> list[float]:
    t_rel = relaxation_time(chain)
    return [m * t_rel for m in (2, 5, 10, 20)]


def conjecture2_report(chain: FiniteChain, f, x0, T_grid=None) -> InequalityReport:
    """Tabulate ``D(nu || mu_T)``, ``alpha I_T`` and their ratio over ``T_grid``; never asserted."""
    f = np.asarray(f, dtype=float)
    x0 = chain.index(x0)
    T_grid = default_T_grid(chain) if T_grid is None else list(T_grid)
    kappa = coarse_ricci(chain).kappa
    alpha = 1.0 / kappa if kappa > 0 else None
    pi = chain.stationary.weights
    heat = HeatOperator(chain)
    start = np.zeros(chain.n)
    start[x0] = 1.0

    rows, worst = [], 0.0
    for T in T_grid:
        mu_T = heat.apply_measure(start, T).weights
        z = heat.apply(f, T)[x0]
        # d nu / d mu_T = f / z, used directly so that f == 1 gives exactly 0
        nu = f * mu_T / z
        live = nu > 0
        div = max(float(np.sum(nu[live] * np.log(f[live] / z))), 0.0)
        rate = information_rate(chain, f, x0, T)
        scaled = alpha * rate if alpha is not None else None
        if scaled is None:
            ratio = None
        elif div == 0.0 and scaled == 0.0:
            ratio = 0.0
        else:
            ratio = div / scaled if scaled > 0 else math.inf
        if ratio is not None:
            worst = max(worst, ratio)
        rows.append({"T": T, "divergence": div, "alpha_rate": scaled, "ratio": ratio})
    ent = entropy_functional(f, pi)
    energy = dirichlet_form(f, np.log(f), chain) if np.all(f > 0) else math.inf
    limit = None
    if alpha is not None:
        limit = 0.0 if ent == 0.0 and energy == 0.0 else ent / (alpha * energy)
    return InequalityReport(
        "conjecture2", math.nan, worst,
        witness={"f": f.tolist(), "x0": chain.states[x0], "entropy": ent,
                 "energy": energy, "limit_ratio": limit},
        trials=len(T_grid), status=Status.REPORT_ONLY, table=rows,
        notes="" if alpha is not None else "kappa <= 0: alpha undefined",
    )


def tilted_density(chain: FiniteChain, x0=0, strength: float = 1.0) -> np.ndarray:
    """Positive ``f`` proportional to ``exp(-strength d(x0, .) / diam)`` with ``E_pi f = 1``."""
    x0 = chain.index(x0)
    diam = chain.diameter or 1.0
    f = np.exp(-strength * chain.metric[x0] / diam)
    return f / float(chain.stationary.weights @ f)


def conjecture_tables(chains, restarts: int = 32, seed=0, T_multiples=(2, 5, 10, 20)):
    """Report-only tables over labelled chains: ``rho0 / kappa`` and ``D / (alpha I_T)``.

    ``chains`` is a sequence of ``(label, chain)``.  The second table has an
    ``f = 1`` row block for every chain, where both sides vanish.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(len(chains))
    pt_rows, c2_rows = [], []
    for (label, chain), child in zip(chains, children):
        pt = peres_tetali_report(chain, restarts=restarts, seed=child)
        pt_rows.append({"chain": label, "states": chain.n,
                        "kappa": pt.witness.get("kappa"), "rho0": pt.witness.get("rho0"),
                        "ratio": pt.worst_ratio, "notes": pt.notes})
        kappa = coarse_ricci(chain).kappa
        if kappa <= 0 or not is_reversible(chain):
            continue
        t_rel = relaxation_time(chain)
        grid = [m * t_rel for m in T_multiples]
        for kind, f in (("one", np.ones(chain.n)), ("tilt", tilted_density(chain))):
            rep = conjecture2_report(chain, f, 0, grid)
            for row in rep.table:
                c2_rows.append({"chain": label, "f": kind, **row})
    pt = InequalityReport("peres_tetali_table", math.nan,
                          min((r["ratio"] for r in pt_rows), default=math.nan),
                          trials=len(pt_rows), status=Status.REPORT_ONLY, table=pt_rows,
                          notes="worst_ratio is the smallest rho0 / kappa")
    finite = [r["ratio"] for r in c2_rows if r["ratio"] is not None]
    c2 = InequalityReport("conjecture2_table", math.nan, max(finite, default=math.nan),
                          trials=len(c2_rows), status=Status.REPORT_ONLY, table=c2_rows,
                          notes="worst_ratio is the largest D(nu || mu_T) / (alpha I_T)")
    return pt, c2
