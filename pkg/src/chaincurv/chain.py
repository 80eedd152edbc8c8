"""Finite Markov chains: construction, stationary measures, graph metrics.

A chain is a row-stochastic kernel over an ordered tuple of states, together
with a metric on the states.  Unless a metric is supplied, the metric is the
graph distance of the support graph (edges ``{x, y}`` with ``x != y`` and
``p(x, y) > 0`` or ``p(y, x) > 0``).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import ChainError, ErgodicityError

STOCHASTIC_TOL = 1e-12
DERIVED_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over the states of a chain."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("distribution weights must be a nonempty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("distribution weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValueError(f"distribution weights sum to {float(w.sum()):.12g}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, weights) -> "Distribution":
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return cls(w / w.sum())

    @classmethod
    def point_mass(cls, n: int, x: int) -> "Distribution":
        w = np.zeros(n)
        w[x] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.full(n, 1.0 / n))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.weights
        return self.weights.astype(dtype)

    def __len__(self):
        return self.weights.size

    def __getitem__(self, i):
        return self.weights[i]

    def __repr__(self):
        return f"Distribution({np.array2string(self.weights, precision=6)})"


def as_weights(mu) -> np.ndarray:
    """Return ``mu`` (array-like or Distribution) as a float vector."""
    return np.asarray(mu, dtype=float)


def _support_adjacency(kernel: np.ndarray) -> np.ndarray:
    adj = (kernel > 0) | (kernel.T > 0)
    np.fill_diagonal(adj, False)
    return adj


def _graph_distance(kernel: np.ndarray) -> np.ndarray:
    adj = _support_adjacency(kernel).astype(float)
    return shortest_path(adj, method="D", directed=False, unweighted=True)


def validate_metric(d: np.ndarray, tol: float = DERIVED_TOL) -> None:
    """Raise ChainError unless ``d`` is a metric on its index set."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ChainError("metric must be a square matrix")
    if not np.all(np.isfinite(d)):
        raise ChainError("metric has non-finite entries")
    if np.any(np.diag(d) != 0):
        raise ChainError("metric must vanish on the diagonal")
    if np.any(d < 0):
        raise ChainError("metric has negative entries")
    if not np.allclose(d, d.T, rtol=0, atol=tol):
        raise ChainError("metric is not symmetric")
    off = ~np.eye(d.shape[0], dtype=bool)
    if np.any(d[off] <= 0):
        raise ChainError("metric must separate distinct states")
    # d[i, j] <= d[i, k] + d[k, j] for all triples
    via = d[:, :, None] + d[None, :, :]
    if np.any(d[:, None, :] > via + tol):
        i, k, j = np.argwhere(d[:, None, :] > via + tol)[0]
        raise ChainError(f"triangle inequality fails for states ({i}, {k}, {j})")


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """Immutable finite Markov chain with a metric on its states.

    Use :func:`build_chain` or :func:`chain_zoo` rather than the constructor;
    ``__post_init__`` only validates.
    """

    kernel: np.ndarray
    states: tuple
    metric: np.ndarray
    conductances: np.ndarray | None = None
    laziness: float = 0.0
    graph_metric: bool = field(default=True)

    def __post_init__(self):
        p = np.array(self.kernel, dtype=float)
        n = p.shape[0]
        if p.ndim != 2 or p.shape != (n, n) or n == 0:
            raise ChainError("kernel must be a nonempty square matrix")
        if not np.all(np.isfinite(p)):
            raise ChainError("kernel has non-finite entries")
        if np.any(p < 0) or np.any(p > 1):
            raise ChainError("kernel entries must lie in [0, 1]")
        rows = p.sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > STOCHASTIC_TOL)
        if bad.size:
            raise ChainError(f"kernel row {bad[0]} sums to {float(rows[bad[0]]):.12g}, not 1")
        if len(self.states) != n:
            raise ChainError("number of states does not match kernel size")
        if len(set(self.states)) != n:
            raise ChainError("state identifiers must be distinct")
        if n > 1:
            ncomp, _ = connected_components(_support_adjacency(p), directed=False)
            if ncomp != 1:
                raise ChainError("support graph is disconnected")
        d = np.array(self.metric, dtype=float)
        validate_metric(d)
        if d.shape != (n, n):
            raise ChainError("metric size does not match kernel size")
        for arr in (p, d):
            arr.setflags(write=False)
        object.__setattr__(self, "kernel", p)
        object.__setattr__(self, "metric", d)
        object.__setattr__(self, "states", tuple(self.states))
        if self.conductances is not None:
            c = np.array(self.conductances, dtype=float)
            c.setflags(write=False)
            object.__setattr__(self, "conductances", c)

    @property
    def n(self) -> int:
        return self.kernel.shape[0]

    def index(self, state) -> int:
        """Position of ``state``; integers are accepted as positions when not state names."""
        try:
            return self.states.index(state)
        except ValueError:
            pass
        if isinstance(state, (int, np.integer)) and 0 <= state < self.n:
            return int(state)
        raise KeyError(f"unknown state {state!r}")

    @cached_property
    def stationary(self) -> Distribution:
        return stationary_measure(self)

    @property
    def diameter(self) -> float:
        return float(self.metric.max())

    def point_mass(self, state) -> Distribution:
        return Distribution.point_mass(self.n, self.index(state))


def _conductance_matrix(conductances, n: int) -> np.ndarray:
    c = np.array(conductances, dtype=float)
    if c.shape != (n, n):
        raise ChainError("conductance table must be an n x n matrix")
    if not np.all(np.isfinite(c)):
        raise ChainError("conductance table has non-finite entries")
    if np.any(c < 0):
        i, j = np.argwhere(c < 0)[0]
        raise ChainError(f"negative conductance {float(c[i, j]):g} on edge ({i}, {j})")
    if not np.array_equal(c, c.T):
        raise ChainError("conductance table must be symmetric")
    if np.any(c.sum(axis=1) <= 0):
        raise ChainError("every state needs positive total conductance")
    return c


def build_chain(
    kernel=None,
    *,
    conductances=None,
    states: Sequence | None = None,
    metric=None,
    laziness: float = 0.0,
) -> FiniteChain:
    """Build a validated chain from a kernel or from symmetric edge conductances.

    Exactly one of ``kernel`` and ``conductances`` must be given.  With
    conductances the kernel is ``c(x, y) / sum_z c(x, z)``.  ``laziness`` r
    replaces the kernel by ``r I + (1 - r) p`` (for conductance chains the
    table is updated consistently so the chain stays reversible).
    """
    if (kernel is None) == (conductances is None):
        raise ChainError("give exactly one of kernel or conductances")
    if not 0.0 <= laziness < 1.0:
        raise ChainError("laziness must lie in [0, 1)")

    c = None
    if conductances is not None:
        c = np.array(conductances, dtype=float)
        n = c.shape[0] if c.ndim == 2 else 0
        c = _conductance_matrix(c, n)
        total = c.sum(axis=1)
        if laziness:
            c = (1.0 - laziness) * c + laziness * np.diag(total)
        p = c / total[:, None]
    else:
        p = np.array(kernel, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ChainError("kernel must be a square matrix")
        if np.any(p < 0):
            raise ChainError("kernel has negative entries")
        if laziness:
            p = laziness * np.eye(p.shape[0]) + (1.0 - laziness) * p
    n = p.shape[0]
    if n == 0:
        raise ChainError("state space must be nonempty")
    if states is None:
        states = tuple(range(n))
    if len(states) != n:
        raise ChainError(f"{len(states)} states given for a {n} x {n} kernel")

    rows = p.sum(axis=1)
    bad = np.flatnonzero(np.abs(rows - 1.0) > STOCHASTIC_TOL)
    if bad.size:
        raise ChainError(f"kernel row {bad[0]} sums to {float(rows[bad[0]]):.12g}, not 1")
    if n > 1:
        ncomp, _ = connected_components(_support_adjacency(p), directed=False)
        if ncomp != 1:
            raise ChainError("support graph is disconnected")

    gd = _graph_distance(p)
    if metric is None:
        d, is_graph = gd, True
    else:
        d = np.array(metric, dtype=float)
        if d.shape != (n, n):
            raise ChainError("metric must be an n x n matrix")
        validate_metric(d)
        is_graph = bool(np.array_equal(d, gd))
        far = (_support_adjacency(p)) & (d > 1)
        if np.any(far):
            x, y = np.argwhere(far)[0]
            warnings.warn(
                f"kernel moves between states {states[x]!r} and {states[y]!r} "
                f"at metric distance {d[x, y]:g} > 1",
                stacklevel=2,
            )
    return FiniteChain(
        kernel=p,
        states=tuple(states),
        metric=d,
        conductances=c,
        laziness=float(laziness),
        graph_metric=is_graph,
    )


def graph_distance(chain: FiniteChain) -> np.ndarray:
    """All-pairs shortest-path distances of the unweighted support graph."""
    return _graph_distance(chain.kernel)


def stationary_measure(chain: FiniteChain) -> Distribution:
    """Unique stationary law, by a normalized linear solve checked by power iteration.

    Raises ErgodicityError when the stationary measure is not unique.
    """
    p = np.asarray(chain.kernel)
    n = p.shape[0]
    if n == 1:
        return Distribution(np.ones(1))
    a = np.vstack([p.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    sol, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < n:
        raise ErgodicityError("stationary measure is not unique (several closed classes)")
    pi = np.clip(sol, 0.0, None)
    pi /= pi.sum()

    # power iteration on the lazy kernel (same fixed points, never periodic),
    # accelerated by repeated squaring
    m = 0.5 * (np.eye(n) + p)
    for _ in range(64):
        m = m @ m
        m /= m.sum(axis=1, keepdims=True)
        if np.max(np.ptp(m, axis=0)) < 1e-13:
            break
    v = m.mean(axis=0)
    if np.max(np.abs(v - pi)) > 1e-8:
        raise ErgodicityError("power iteration disagrees with the linear solve")

    if np.max(np.abs(pi @ p - pi)) > DERIVED_TOL:
        raise ErgodicityError("linear solve did not produce a fixed point")
    return Distribution(pi)


def is_lazy(chain: FiniteChain) -> bool:
    return bool(np.all(np.diag(chain.kernel) >= 0.5))


def is_reversible(chain: FiniteChain, pi=None, tol: float = DERIVED_TOL) -> bool:
    """Detailed balance ``pi(x) p(x, y) == pi(y) p(y, x)`` for all pairs."""
    w = as_weights(chain.stationary if pi is None else pi)
    flux = w[:, None] * chain.kernel
    return bool(np.max(np.abs(flux - flux.T)) <= tol)


def kernel_power_apply(chain: FiniteChain, mu, t: int) -> Distribution:
    """The law ``mu p^t`` after ``t`` steps from ``mu``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    v = as_weights(mu).copy()
    for _ in range(t):
        v = v @ chain.kernel
    return Distribution.normalized(v) if t else Distribution(v)


def apply_P(chain: FiniteChain, f, t: int = 1) -> np.ndarray:
    """``P_t f(x) = E f(B_t(x))`` for the discrete-time walk."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    g = np.asarray(f, dtype=float).copy()
    for _ in range(t):
        g = chain.kernel @ g
    return g


def kernel_power(chain: FiniteChain, t: int) -> np.ndarray:
    return np.linalg.matrix_power(chain.kernel, t)


def reachable(chain: FiniteChain, x0: int, t: int) -> np.ndarray:
    """Boolean mask of states reachable from ``x0`` in exactly ``t`` steps (exact, no floats)."""
    adj = chain.kernel > 0
    mask = np.zeros(chain.n, dtype=bool)
    mask[x0] = True
    for _ in range(t):
        mask = adj[mask].any(axis=0)
    return mask


# --- zoo -------------------------------------------------------------------

ZOO_FAMILIES = ("complete", "cycle", "hypercube", "two_state", "path")


def _complete(n):
    c = np.ones((n, n))
    np.fill_diagonal(c, 0.0)
    return c, tuple(range(n))


def _cycle(n):
    if n < 3:
        raise ChainError("cycle needs n >= 3")
    c = np.zeros((n, n))
    for i in range(n):
        c[i, (i + 1) % n] = c[(i + 1) % n, i] = 1.0
    return c, tuple(range(n))


def _path(n):
    c = np.zeros((n, n))
    for i in range(n - 1):
        c[i, i + 1] = c[i + 1, i] = 1.0
    return c, tuple(range(n))


def _hypercube(m):
    if m < 1:
        raise ChainError("hypercube needs dimension m >= 1")
    size = 2**m
    c = np.zeros((size, size))
    for x in range(size):
        for k in range(m):
            c[x, x ^ (1 << k)] = 1.0
    states = tuple("".join(bits) for bits in itertools.product("01", repeat=m))
    # product() enumerates in binary order, matching the integer labels
    return c, states


def chain_zoo(name: str, n: int, laziness: float = 0.0, *, flip: float = 0.25) -> FiniteChain:
    """Standard test families.

    ``complete``, ``cycle``, ``path``: random walk on the graph with ``n``
    vertices; ``hypercube``: ``{0,1}^n`` (``n`` is the dimension, ``2**n``
    states); ``two_state``: kernel ``[[1-a, a], [a, 1-a]]`` with ``a = flip``
    (``n`` must be 2).  ``laziness`` r then gives ``r I + (1 - r) p``.
    """
    if n < 1 or (name != "hypercube" and n < 2):
        raise ChainError("zoo chains need n >= 2")
    if name == "complete":
        c, states = _complete(n)
    elif name == "cycle":
        c, states = _cycle(n)
    elif name == "path":
        c, states = _path(n)
    elif name == "hypercube":
        c, states = _hypercube(n)
    elif name == "two_state":
        if n != 2:
            raise ChainError("two_state chain has exactly 2 states")
        if not 0.0 < flip <= 1.0:
            raise ChainError("flip probability must lie in (0, 1]")
        c = np.array([[1.0 - flip, flip], [flip, 1.0 - flip]])
        states = (0, 1)
    else:
        raise ChainError(f"unknown zoo family {name!r}; choose from {', '.join(ZOO_FAMILIES)}")
    return build_chain(conductances=c, states=states, laziness=laziness)


def parse_zoo_spec(spec: str, laziness: float | None = None, flip: float = 0.25) -> FiniteChain:
    """Parse ``family:n`` as used on the command line.

    Graph families default to laziness 1/2; ``two_state`` defaults to none.
    """
    try:
        name, size = spec.split(":")
        n = int(size)
    except ValueError:
        raise ChainError(f"zoo spec must look like family:n, got {spec!r}") from None
    if laziness is None:
        laziness = 0.0 if name == "two_state" else 0.5
    return chain_zoo(name, n, laziness, flip=flip)
