"""Entropy-optimal drift processes steering a walk to a target endpoint law.

Discrete time: given a start ``x0``, horizon ``T`` and target ``nu``, the
drift is the time-inhomogeneous chain with kernels

    q_t(x, y) = p(x, y) P_{T-t} f(y) / P_{T-t+1} f(x),    f = d nu / d mu_T,

where ``mu_T`` is the law of the base walk after T steps.  Its path law has
density ``f(x_T)`` against the base walk, so its path relative entropy is
exactly ``D(nu || mu_T)``.

Continuous time: for ``f > 0`` with ``E_pi f = 1`` the drift jumps at rate
``p(x, y) H_{T-t} f(y) / H_{T-t} f(x)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .chain import Distribution, FiniteChain, as_weights, reachable
from .errors import AbsoluteContinuityError, InstanceTooLargeError
from .functional import HeatOperator, _require_reversible
from .report import InequalityReport
from .transport import relative_entropy

log = logging.getLogger(__name__)

MAX_PATHS = 10**6
PATH_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DriftSchedule:
    chain: FiniteChain
    x0: int
    T: int
    f: np.ndarray
    kernels: np.ndarray  # shape (T, n, n); kernels[t - 1] is q_t
    target: Distribution
    mu_T: Distribution

    def to_record(self, verbose: bool = False) -> dict:
        rec = {
            "x0": self.chain.states[self.x0],
            "T": self.T,
            "target": self.target.weights.tolist(),
            "mu_T": self.mu_T.weights.tolist(),
            "density": self.f.tolist(),
        }
        if verbose:
            rec["kernels"] = self.kernels.tolist()
        return rec


def _hits(adj: np.ndarray, target: np.ndarray, steps: int) -> np.ndarray:
    """States from which ``target`` is reachable in exactly ``steps`` steps."""
    mask = target.copy()
    for _ in range(steps):
        mask = (adj & mask[None, :]).any(axis=1)
    return mask


def build_discrete_drift(chain: FiniteChain, nu, x0, T: int) -> DriftSchedule:
    """Discrete-time Föllmer drift for target ``nu`` from ``x0`` over ``T`` steps.

    Raises AbsoluteContinuityError if ``nu`` charges a state the walk cannot
    occupy at time T.
    """
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    x0 = chain.index(x0)
    nu_w = as_weights(nu)
    target = Distribution(nu_w)
    p = chain.kernel
    n = chain.n

    ok = reachable(chain, x0, T)
    bad = np.flatnonzero((nu_w > 0) & ~ok)
    if bad.size:
        s = chain.states[bad[0]]
        raise AbsoluteContinuityError(
            f"target charges state {s!r}, unreachable from {chain.states[x0]!r} in {T} steps",
            state=s,
        )
    mu = np.zeros(n)
    mu[x0] = 1.0
    for _ in range(T):
        mu = mu @ p
    if np.any(mu[ok] <= 0):
        raise AbsoluteContinuityError("reachable state has underflowing probability")
    f = np.zeros(n)
    f[ok] = nu_w[ok] / mu[ok]

    # Pf[s] = P_s f
    Pf = [f]
    for _ in range(T):
        Pf.append(p @ Pf[-1])

    adj = p > 0
    supp = nu_w > 0
    kernels = np.empty((T, n, n))
    for t in range(1, T + 1):
        live = _hits(adj, supp, T - t + 1)
        den = Pf[T - t + 1]
        q = p.copy()
        rows = np.flatnonzero(live)
        if np.any(den[rows] <= 0):
            raise AbsoluteContinuityError("drift denominator underflowed on a live state")
        q[rows] = p[rows] * Pf[T - t][None, :] / den[rows, None]
        q[rows] /= q[rows].sum(axis=1, keepdims=True)
        kernels[t - 1] = q
    return DriftSchedule(chain, x0, T, f, kernels, target, Distribution.normalized(mu))


def endpoint_law(schedule: DriftSchedule) -> Distribution:
    v = np.zeros(schedule.chain.n)
    v[schedule.x0] = 1.0
    for q in schedule.kernels:
        v = v @ q
    return Distribution(v / v.sum()) if abs(v.sum() - 1) > 0 else Distribution(v)


def forward_marginals(kernels: np.ndarray, x0: int) -> np.ndarray:
    """Laws of X_0..X_T, shape (T + 1, n)."""
    n = kernels.shape[1]
    out = np.zeros((kernels.shape[0] + 1, n))
    out[0, x0] = 1.0
    for t, q in enumerate(kernels, start=1):
        out[t] = out[t - 1] @ q
    return out


@dataclass(frozen=True, eq=False)
class PathLaw:
    """Exact law of (X_1, ..., X_T) as an array of shape ``(n,) * T``."""

    probs: np.ndarray
    x0: int

    @property
    def T(self) -> int:
        return self.probs.ndim

    def endpoint(self) -> np.ndarray:
        axes = tuple(range(self.T - 1))
        return self.probs.sum(axis=axes) if axes else self.probs.copy()


def path_law(kernels: np.ndarray, x0: int) -> PathLaw:
    T, n, _ = kernels.shape
    if n**T > MAX_PATHS:
        raise InstanceTooLargeError(
            f"{n}^{T} paths exceed the enumeration limit {MAX_PATHS}; use sampled spot checks"
        )
    probs = kernels[0][x0].copy()
    for q in kernels[1:]:
        probs = probs[..., None] * q  # broadcasts q over the last visited state
    return PathLaw(probs, x0)


def base_path_law(schedule: DriftSchedule) -> PathLaw:
    ks = np.broadcast_to(schedule.chain.kernel, schedule.kernels.shape)
    return path_law(np.ascontiguousarray(ks), schedule.x0)


def path_divergence(a: PathLaw, b: PathLaw) -> float:
    """``D(a || b)`` between two path laws on the same trajectories."""
    pa, pb = a.probs.ravel(), b.probs.ravel()
    s = pa > 0
    if np.any(pb[s] <= 0):
        return math.inf
    return max(float(np.sum(pa[s] * np.log(pa[s] / pb[s]))), 0.0)


def path_density_check(schedule: DriftSchedule, tol: float = PATH_TOL) -> InequalityReport:
    """Every trajectory: P_X(path) == P_B(path) f(x_T)."""
    px = path_law(schedule.kernels, schedule.x0).probs
    pb = base_path_law(schedule).probs
    expected = pb * schedule.f  # f broadcasts over the last axis, x_T
    err = np.abs(px - expected)
    k = np.unravel_index(int(np.argmax(err)), err.shape)
    worst = float(err[k])
    return InequalityReport.asserted(
        "path_density", tol, worst, worst <= tol,
        witness={"path": [schedule.chain.states[i] for i in k]},
        trials=int(px.size),
        notes="max |P_X(path) - P_B(path) f(x_T)| over all trajectories",
    )


def chain_rule_decomposition(schedule: DriftSchedule) -> list[float]:
    """Per-step ``E[D(q_t(X_{t-1}, .) || p(X_{t-1}, .))]``, t = 1..T."""
    p = schedule.chain.kernel
    marg = forward_marginals(schedule.kernels, schedule.x0)
    out = []
    for t, q in enumerate(schedule.kernels, start=1):
        total = 0.0
        for x in np.flatnonzero(marg[t - 1] > 0):
            total += marg[t - 1, x] * relative_entropy(q[x], p[x])
        out.append(total)
    return out


def path_relative_entropy(schedule: DriftSchedule, method: str = "chain_rule") -> float:
    """Path-space ``D(X || B)`` by the chain rule or from the enumerated path tables."""
    if method == "chain_rule":
        return float(sum(chain_rule_decomposition(schedule)))
    if method == "table":
        return path_divergence(path_law(schedule.kernels, schedule.x0), base_path_law(schedule))
    raise ValueError(f"unknown method {method!r}")


def _reweight(z: PathLaw, nu: np.ndarray) -> PathLaw | None:
    """Condition a path law on its endpoint and re-mix endpoints with law ``nu``."""
    end = z.endpoint()
    if np.any((nu > 0) & (end <= 0)):
        return None
    w = np.where(end > 0, nu / np.where(end > 0, end, 1.0), 0.0)
    return PathLaw(z.probs * w, z.x0)


def entropy_optimality_check(
    schedule: DriftSchedule, rival_count: int = 50, seed=0, scale: float = 1.0,
    tol: float = 1e-9,
) -> InequalityReport:
    """Every process with the same start and endpoint law spends at least D(nu || mu_T).

    Rivals: the drift itself, the base walk reweighted path by path, and
    ``rival_count`` random perturbations (of the drift kernels or of p),
    each reweighted on its endpoint to hit ``nu`` exactly.
    """
    rng = np.random.default_rng(seed)
    nu = schedule.target.weights
    base = base_path_law(schedule)
    floor = relative_entropy(nu, schedule.mu_T.weights)
    drift_law = path_law(schedule.kernels, schedule.x0)

    rivals: list[tuple[str, PathLaw | None]] = [("drift", drift_law), ("reweighted_base", _reweight(base, nu))]
    p = schedule.chain.kernel
    for k in range(rival_count):
        src = schedule.kernels if k % 2 == 0 else np.broadcast_to(p, schedule.kernels.shape)
        noise = np.exp(scale * rng.normal(size=src.shape))
        ks = src * noise
        ks /= ks.sum(axis=2, keepdims=True)
        rivals.append((f"perturbed_{'drift' if k % 2 == 0 else 'base'}_{k}", _reweight(path_law(ks, schedule.x0), nu)))

    worst, witness, ok, tested, tight = -math.inf, {}, True, 0, []
    for name, law in rivals:
        if law is None:
            log.info("rival %s misses the target support; skipped", name)
            continue
        tested += 1
        div = path_divergence(law, base)
        if div < floor - tol:
            ok = False
        gap = floor - div
        if gap > worst:
            worst, witness = gap, {"rival": name, "divergence": div, "floor": floor}
        if abs(div - floor) <= tol:
            same = np.max(np.abs(law.probs - drift_law.probs)) <= 1e-9
            tight.append(name)
            if not same:
                ok = False
    return InequalityReport.asserted(
        "entropy_optimality", floor, worst, ok, witness=witness, trials=tested,
        notes=f"worst_ratio is max(floor - divergence); tight rivals: {', '.join(tight)}",
    )


# --- continuous time -------------------------------------------------------------

def _check_density(chain: FiniteChain, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.n,):
        raise ValueError("f must be a function on the states")
    if np.any(f <= 0):
        raise ValueError("continuous-time drift needs f > 0 everywhere")
    m = float(chain.stationary.weights @ f)
    if abs(m - 1.0) > 1e-9:
        raise ValueError(f"f must satisfy E_pi f = 1, got {m!r}")
    return f


def continuous_drift_rates(chain: FiniteChain, f, x0, T: float, t: float) -> np.ndarray:
    """Generator of the continuous drift at time t: off-diagonal rates and zero row sums."""
    if not 0 <= t < T:
        raise ValueError("need 0 <= t < T")
    f = _check_density(chain, f)
    chain.index(x0)
    h = HeatOperator(chain).apply(f, T - t)
    q = chain.kernel * h[None, :] / h[:, None]
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def cumulative_path_entropy(chain: FiniteChain, f, x0, T: float, t: float) -> float:
    """``D(X_[0,t] || B_[0,t])`` for the continuous drift with data (f, x0, T)."""
    if not 0 <= t <= T:
        raise ValueError("need 0 <= t <= T")
    f = _check_density(chain, f)
    x0 = chain.index(x0)
    heat = HeatOperator(chain)
    z = heat.apply(f, T)[x0]
    g = heat.apply(f, T - t)
    val = heat.apply(g * np.log(g), t)[x0] / z - math.log(z)
    return max(float(val), 0.0)


def _bregman_flux(chain: FiniteChain, g: np.ndarray) -> np.ndarray:
    """``sum_y p(x,y) [g(y) log(g(y)/g(x)) - g(y) + g(x)]`` at every x.

    Equals ``(Delta g)(log g + 1) - Delta(g log g)`` with ``Delta = I - p``; each
    term is a Bregman divergence, so the result is >= 0 and vanishes for constant g.
    """
    lg = np.log(g)
    terms = g[None, :] * (lg[None, :] - lg[:, None]) - g[None, :] + g[:, None]
    return np.sum(chain.kernel * terms, axis=1)


def information_rate_at(chain: FiniteChain, f, x0, T: float, t: float) -> float:
    """``I_t = d/dt D(X_[0,t] || B_[0,t])`` in closed form."""
    if not 0 <= t <= T:
        raise ValueError("need 0 <= t <= T")
    f = _check_density(chain, f)
    x0 = chain.index(x0)
    heat = HeatOperator(chain)
    z = heat.apply(f, T)[x0]
    g = heat.apply(f, T - t)
    return max(float(heat.apply(_bregman_flux(chain, g), t)[x0] / z), 0.0)


def information_rate(chain: FiniteChain, f, x0, T: float) -> float:
    """Rate of information spent at the horizon, ``I_T``.  Tends to E(f, log f) as T grows."""
    _require_reversible(chain, None)
    return information_rate_at(chain, f, x0, T, T)


def information_rate_fd(chain: FiniteChain, f, x0, T: float, t: float | None = None,
                        h: float = 1e-4) -> float:
    """Finite-difference derivative of :func:`cumulative_path_entropy` at ``t`` (default T).

    Centered where ``[t - h, t + h]`` fits in ``[0, T]``; at the ends the
    second-order one-sided stencil is used.
    """
    t = T if t is None else t

    def D(s):
        return cumulative_path_entropy(chain, f, x0, T, s)

    if t - h >= 0 and t + h <= T:
        return (D(t + h) - D(t - h)) / (2 * h)
    if t + h > T:
        return (3 * D(t) - 4 * D(t - h) + D(t - 2 * h)) / (2 * h)
    return (-3 * D(t) + 4 * D(t + h) - D(t + 2 * h)) / (2 * h)


def interpolation_scan(chain: FiniteChain, f, x0, T: float, points: int = 11,
                       tol: float = 1e-9) -> InequalityReport:
    """Tabulate ``D(X_[0,t] || B_[0,t])`` and ``I_t`` on an even grid of ``[0, T]``.

    Asserts the divergence is nondecreasing in t and ends at ``D(nu || mu_T)``
    with ``d nu = f / H_T f(x0) d mu_T``.
    """
    f = _check_density(chain, f)
    x0 = chain.index(x0)
    heat = HeatOperator(chain)
    start = np.zeros(chain.n)
    start[x0] = 1.0
    mu_T = heat.apply_measure(start, T).weights
    z = heat.apply(f, T)[x0]
    nu = f * mu_T / z
    endpoint = max(float(np.sum(nu * np.log(f / z))), 0.0)

    rows, prev, ok, drop = [], -math.inf, True, 0.0
    for t in np.linspace(0.0, T, points):
        div = cumulative_path_entropy(chain, f, x0, T, float(t))
        if div < prev - tol:
            ok = False
            drop = max(drop, prev - div)
        prev = div
        rows.append({"t": float(t), "divergence": div,
                     "rate": information_rate_at(chain, f, x0, T, float(t))})
    gap = abs(rows[-1]["divergence"] - endpoint)
    ok = ok and gap <= tol
    return InequalityReport.asserted(
        "interpolation", endpoint, rows[-1]["divergence"], ok,
        witness={"endpoint_gap": gap, "largest_drop": drop}, trials=points, table=rows,
        notes="divergence along the path vs D(nu || mu_T) at t = T",
    )
