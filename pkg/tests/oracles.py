"""Independent brute-force oracles used by the test-suite.

None of these import the solvers they check.  They are slow on purpose.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def w1_vertex_enumeration(mu, nu, d):
    """W1 by enumerating every basic feasible solution of the transport LP.

    Only sensible for n <= 4 (C(16, 7) = 11440 candidate bases).
    """
    mu = np.asarray(mu, float)
    nu = np.asarray(nu, float)
    d = np.asarray(d, float)
    n = mu.size
    rows = []
    for i in range(n):
        r = np.zeros((n, n))
        r[i, :] = 1.0
        rows.append(r.ravel())
    for j in range(n):
        r = np.zeros((n, n))
        r[:, j] = 1.0
        rows.append(r.ravel())
    a = np.array(rows)[:-1]  # one marginal constraint is redundant
    b = np.concatenate([mu, nu])[:-1]
    m = a.shape[0]
    best = np.inf
    for basis in itertools.combinations(range(n * n), m):
        sub = a[:, basis]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, b)
        if np.any(x < -1e-12):
            continue
        best = min(best, float(d.ravel()[list(basis)] @ x))
    return best


def w1_linprog(mu, nu, d):
    """W1 from the dense transport LP solved by HiGHS."""
    mu = np.asarray(mu, float)
    nu = np.asarray(nu, float)
    d = np.asarray(d, float)
    n = mu.size
    a = np.zeros((2 * n, n * n))
    for i in range(n):
        a[i, i * n:(i + 1) * n] = 1.0
        a[n + i, i::n] = 1.0
    res = linprog(d.ravel(), A_eq=a, b_eq=np.concatenate([mu, nu]), bounds=(0, None),
                  method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def coarse_ricci_linprog(p, d):
    """kappa = 1 - max_{x != y} W1(p(x,.), p(y,.)) / d(x, y), all pairs, HiGHS LPs."""
    n = p.shape[0]
    worst = -np.inf
    for x in range(n):
        for y in range(x + 1, n):
            worst = max(worst, w1_linprog(p[x], p[y], d) / d[x, y])
    return 1.0 - worst


def grid_entropy(F, pi):
    """Ent_pi(f) for each row of F, written as sum pi m phi(f/m), phi(r) = r log r - r + 1."""
    m = F @ pi
    r = F / m[:, None]
    phi = np.where(r > 0, r * np.log1p(r - 1.0) - (r - 1.0), 1.0)
    return m * (phi @ pi)


def grid_mlsi_ratio(p, pi):
    w = pi[:, None] * p

    def ratio(F):
        dF = F[:, :, None] - F[:, None, :]
        dL = np.log(F)[:, :, None] - np.log(F)[:, None, :]
        num = 0.5 * np.einsum("xy,kxy->k", w, dF * dL)
        return num / grid_entropy(F, pi)

    return ratio


def grid_lsi_ratio(p, pi):
    w = pi[:, None] * p

    def ratio(F):
        s = np.sqrt(F)
        dS = s[:, :, None] - s[:, None, :]
        num = 0.5 * np.einsum("xy,kxy->k", w, dS * dS)
        return num / grid_entropy(F, pi)

    return ratio


def simplex_grid_min(ratio, pi, levels=6, points=None, interior=1e-12):
    """Minimize a vectorized ``ratio(F)`` over densities f = w / pi, w in the open simplex.

    Dense grid, then repeated zooming (by 10x) around the best grid point.
    For two states the grid is one-dimensional.
    """
    pi = np.asarray(pi, float)
    n = pi.size
    if points is None:
        points = {2: 4001, 3: 401, 4: 81}[n]
    center = np.full(n - 1, 0.5)
    half = 0.5
    best_val, best_w = np.inf, None
    for _ in range(levels):
        axes = [np.linspace(c - half, c + half, points) for c in center]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n - 1)
        w = np.hstack([mesh, 1.0 - mesh.sum(axis=1, keepdims=True)])
        w = w[np.all(w > interior, axis=1)]
        F = w / pi
        F = F[np.ptp(F, axis=1) > 1e-9 * F.max(axis=1)]
        vals = ratio(F)
        k = int(np.nanargmin(vals))
        if vals[k] < best_val:
            best_val, best_w = float(vals[k]), F[k] * pi
        center = best_w[:-1]
        half /= 10.0
    return best_val, best_w


def spectral_gap_dense(p, pi):
    s = np.sqrt(pi)
    sym = (s[:, None] * p) / s[None, :]
    sym = 0.5 * (sym + sym.T)
    ev = np.sort(np.linalg.eigvalsh(np.eye(p.shape[0]) - sym))
    return ev[1]
