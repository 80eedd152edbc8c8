"""Distances between distributions on a finite metric space.

:func:`w1` solves the Kantorovich problem exactly with a successive
shortest-path min-cost flow on the bipartite supply/demand graph and returns a
self-checked dual certificate: a 1-Lipschitz potential ``g`` with
``sum g dmu - sum g dnu`` equal to the transport cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .chain import as_weights
from .errors import TransportError

MARGINAL_TOL = 1e-9
FLOW_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Optimal coupling of (mu, nu) for the cost ``d``.

    ``dual_potential`` is a 1-Lipschitz function with
    ``dual_potential @ (mu - nu) == value``.
    """

    value: float
    coupling: np.ndarray
    dual_potential: np.ndarray

    def dual_value(self, mu, nu) -> float:
        return float(self.dual_potential @ (as_weights(mu) - as_weights(nu)))


def total_variation(mu, nu) -> float:
    a, b = as_weights(mu), as_weights(nu)
    if a.shape != b.shape:
        raise TransportError("distributions live on different state spaces")
    return 0.5 * float(np.abs(a - b).sum())


def relative_entropy(nu, mu) -> float:
    """``D(nu || mu) = sum nu log(nu / mu)``; ``math.inf`` unless nu << mu."""
    a, b = as_weights(nu), as_weights(mu)
    if a.shape != b.shape:
        raise TransportError("distributions live on different state spaces")
    s = a > 0
    if np.any(b[s] <= 0):
        return math.inf
    return max(float(np.sum(a[s] * np.log(a[s] / b[s]))), 0.0)


@numba.njit(cache=True)
def _ssp(supply, demand, cost, eps):
    """Successive shortest paths for an uncapacitated transportation problem.

    Dense Dijkstra on reduced costs.  Every source with remaining supply is an
    origin at distance 0; their potentials are never raised, so this equals
    Dijkstra from a super-source.  Returns (flow, phi_src, phi_dst) with
    ``cost + phi_src[:, None] - phi_dst[None, :] >= 0`` and ``== 0`` on the
    support of ``flow``.
    """
    ns, nt = supply.shape[0], demand.shape[0]
    flow = np.zeros((ns, nt))
    phi_s = np.zeros(ns)
    phi_t = np.zeros(nt)
    sup = supply.copy()
    dem = demand.copy()
    inf = np.inf
    dist_s = np.empty(ns)
    dist_t = np.empty(nt)
    seen_s = np.empty(ns, dtype=np.bool_)
    seen_t = np.empty(nt, dtype=np.bool_)
    pred_t = np.empty(nt, dtype=np.int64)
    pred_s = np.empty(ns, dtype=np.int64)
    for _ in range(4 * (ns + nt) * (ns + nt) + 10):
        remaining = 0.0
        for i in range(ns):
            if sup[i] > eps:
                remaining += sup[i]
        if remaining <= eps:
            break
        for i in range(ns):
            dist_s[i] = 0.0 if sup[i] > eps else inf
            seen_s[i] = False
            pred_s[i] = -1
        for j in range(nt):
            dist_t[j] = inf
            seen_t[j] = False
            pred_t[j] = -1
        target = -1
        while True:
            best = inf
            side = -1
            k = -1
            for i in range(ns):
                if not seen_s[i] and dist_s[i] < best:
                    best, side, k = dist_s[i], 0, i
            for j in range(nt):
                if not seen_t[j] and dist_t[j] < best:
                    best, side, k = dist_t[j], 1, j
            if side < 0:
                break
            if side == 0:
                seen_s[k] = True
                for j in range(nt):
                    if not seen_t[j]:
                        nd = best + cost[k, j] + phi_s[k] - phi_t[j]
                        if nd < dist_t[j]:
                            dist_t[j] = nd
                            pred_t[j] = k
            else:
                seen_t[k] = True
                if dem[k] > eps:
                    target = k
                    break
                for i in range(ns):
                    if not seen_s[i] and flow[i, k] > eps:
                        nd = best - cost[i, k] + phi_t[k] - phi_s[i]
                        if nd < dist_s[i]:
                            dist_s[i] = nd
                            pred_s[i] = k
        if target < 0:
            break
        reach = dist_t[target]
        for i in range(ns):
            phi_s[i] += min(dist_s[i], reach)
        for j in range(nt):
            phi_t[j] += min(dist_t[j], reach)
        # bottleneck along the path, then augment
        delta = dem[target]
        j = target
        while True:
            i = pred_t[j]
            back = pred_s[i]
            if back < 0:
                delta = min(delta, sup[i])
                break
            delta = min(delta, flow[i, back])
            j = back
        j = target
        while True:
            i = pred_t[j]
            flow[i, j] += delta
            back = pred_s[i]
            if back < 0:
                sup[i] -= delta
                break
            flow[i, back] -= delta
            j = back
        dem[target] -= delta
    return flow, phi_s, phi_t


def _check_inputs(mu, nu, d):
    a, b = as_weights(mu), as_weights(nu)
    d = np.asarray(d, dtype=float)
    n = a.size
    if b.shape != a.shape or d.shape != (n, n):
        raise TransportError("mu, nu and d must share one state space")
    if np.any(a < 0) or np.any(b < 0):
        raise TransportError("distributions must be nonnegative")
    if abs(a.sum() - b.sum()) > MARGINAL_TOL:
        raise TransportError(f"total masses differ: {float(a.sum()):.12g} vs {float(b.sum()):.12g}")
    return a, b, d


def w1(mu, nu, d) -> TransportPlan:
    """Exact Wasserstein-1 distance for the cost matrix ``d`` (a metric).

    Common mass ``min(mu, nu)`` stays in place (optimal for metric costs);
    the excess of ``mu`` is routed to the deficit by min-cost flow.
    """
    a, b, d = _check_inputs(mu, nu, d)
    n = a.size
    common = np.minimum(a, b)
    excess = a - common
    deficit = b - common
    src = np.flatnonzero(excess > FLOW_EPS)
    dst = np.flatnonzero(deficit > FLOW_EPS)
    coupling = np.diag(common)
    if src.size == 0 or dst.size == 0:
        coupling += np.diag(excess)
        return TransportPlan(0.0, coupling, np.zeros(n))

    supply = excess[src]
    demand = deficit[dst]
    # rescale the rounding mismatch away so both sides carry the same mass
    demand = demand * (supply.sum() / demand.sum())
    sub = np.ascontiguousarray(d[np.ix_(src, dst)])
    flow, phi_s, phi_t = _ssp(supply, demand, sub, FLOW_EPS * 1e-3)
    flow = np.clip(flow, 0.0, None)
    coupling[np.ix_(src, dst)] += flow
    # leftovers below FLOW_EPS stay on the diagonal
    leftover = excess.copy()
    leftover[src] = np.clip(excess[src] - flow.sum(axis=1), 0.0, None)
    coupling[np.diag_indices(n)] += leftover
    value = float(np.sum(flow * sub))

    # dual: u_i = -phi_s, v_j = phi_t; g is the c-transform of v, 1-Lipschitz
    v = phi_t
    g = np.min(d[:, dst] - v[None, :], axis=1)
    g -= g.min()
    return TransportPlan(value, coupling, g)


def w1_value(mu, nu, d) -> float:
    return w1(mu, nu, d).value


def lipschitz_norm(f, d) -> float:
    """``max_{x != y} |f(x) - f(y)| / d(x, y)``."""
    f = np.asarray(f, dtype=float)
    d = np.asarray(d, dtype=float)
    if f.size < 2:
        return 0.0
    off = ~np.eye(f.size, dtype=bool)
    return float(np.max(np.abs(f[:, None] - f[None, :])[off] / d[off]))


def verify_plan(plan: TransportPlan, mu, nu, d, tol: float = MARGINAL_TOL) -> None:
    """Raise AssertionError if the plan's marginals, cost or certificate are off."""
    a, b, d = _check_inputs(mu, nu, d)
    g = plan.coupling
    assert np.all(g >= -tol), "negative coupling entry"
    assert np.allclose(g.sum(axis=1), a, atol=tol, rtol=0), "row marginal mismatch"
    assert np.allclose(g.sum(axis=0), b, atol=tol, rtol=0), "column marginal mismatch"
    assert abs(float(np.sum(g * d)) - plan.value) <= tol, "cost mismatch"
    assert lipschitz_norm(plan.dual_potential, d) <= 1.0 + tol, "dual potential not 1-Lipschitz"
    assert abs(plan.dual_value(a, b) - plan.value) <= tol, "duality gap"


class PinskerCheck(NamedTuple):
    holds: bool
    tv: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.tv


def pinsker_check(mu, nu) -> PinskerCheck:
    """``TV(mu, nu) <= sqrt(D(mu || nu) / 2)``; trivially true when D is infinite."""
    tv = total_variation(mu, nu)
    div = relative_entropy(mu, nu)
    bound = math.inf if math.isinf(div) else math.sqrt(0.5 * div)
    return PinskerCheck(tv <= bound + 1e-15, tv, bound)


def support_diameter(mu, d) -> float:
    s = np.flatnonzero(as_weights(mu) > 0)
    if s.size == 0:
        return 0.0
    return float(np.max(np.asarray(d)[np.ix_(s, s)]))


def diameter_t1_constant(mu, d) -> float:
    """``Delta^2 / 2`` with ``Delta`` the diameter of ``supp(mu)``: a T1 constant for mu."""
    delta = support_diameter(mu, d)
    return 0.5 * delta * delta
