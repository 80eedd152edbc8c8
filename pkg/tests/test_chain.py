import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaincurv.chain import (
    Distribution,
    apply_P,
    build_chain,
    chain_zoo,
    graph_distance,
    is_lazy,
    is_reversible,
    kernel_power,
    kernel_power_apply,
    parse_zoo_spec,
    reachable,
    stationary_measure,
)
from chaincurv.errors import ChainError
from strategies import conductance_chains, random_conductances, random_kernel

TWO = [[0.75, 0.25], [0.25, 0.75]]


def test_two_state_kernel_builds():
    c = build_chain(TWO)
    assert c.n == 2
    np.testing.assert_array_equal(c.kernel, TWO)


def test_k3_with_self_loops_normalizes_by_total_conductance():
    cond = np.ones((3, 3)) + np.eye(3)  # unit edges, self-loop conductance 2
    c = build_chain(conductances=cond)
    np.testing.assert_allclose(np.diag(c.kernel), 0.5, atol=1e-15)
    off = c.kernel[~np.eye(3, dtype=bool)]
    np.testing.assert_allclose(off, 0.25, atol=1e-15)


@pytest.mark.parametrize("bad", [
    {"conductances": [[0, -1], [-1, 0]]},
    {"kernel": [[0.5, 0.4], [0.5, 0.5]]},
    {"kernel": [[1.0, 0.0], [0.0, 1.0]]},  # disconnected
    {"kernel": [[0.5, 0.5]]},
    {"kernel": TWO, "metric": [[0, 1], [2, 0]]},
])
def test_invalid_inputs_raise(bad):
    with pytest.raises(ChainError):
        build_chain(**bad)


def test_user_metric_far_edge_warns():
    with pytest.warns(UserWarning):
        build_chain(TWO, metric=[[0, 3], [3, 0]])


def test_stationary_examples():
    np.testing.assert_allclose(stationary_measure(build_chain(TWO)).weights, [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(chain_zoo("complete", 7, 0.5).stationary.weights, np.full(7, 1 / 7), atol=1e-14)


def test_stationary_of_conductance_chain_is_total_conductance():
    rng = np.random.default_rng(3)
    c = random_conductances(rng, 9)
    chain = build_chain(conductances=c)
    np.testing.assert_allclose(chain.stationary.weights, c.sum(1) / c.sum(), atol=1e-12)


def test_stationary_of_nonreversible_chain_is_invariant():
    rng = np.random.default_rng(5)
    chain = build_chain(random_kernel(rng, 7))
    pi = chain.stationary.weights
    np.testing.assert_allclose(pi @ chain.kernel, pi, atol=1e-13)


def test_graph_distance_examples():
    assert graph_distance(chain_zoo("path", 3))[0, 2] == 2
    assert graph_distance(chain_zoo("cycle", 5))[0, 3] == 2
    d = graph_distance(chain_zoo("complete", 6))
    np.testing.assert_array_equal(d, 1 - np.eye(6))


def test_self_loops_do_not_shorten_distances():
    assert chain_zoo("path", 4, 0.5).metric[0, 3] == 3


def test_is_lazy_examples():
    assert is_lazy(build_chain(TWO))
    assert not is_lazy(build_chain([[0, 1], [1, 0]]))
    assert is_lazy(chain_zoo("complete", 5, 0.5))


def test_is_reversible_examples():
    assert is_reversible(build_chain(TWO))
    clockwise = np.roll(np.eye(3), 1, axis=1)
    assert not is_reversible(build_chain(clockwise))


def test_kernel_power_examples():
    c = build_chain(TWO)
    mu = Distribution.point_mass(2, 0)
    np.testing.assert_array_equal(kernel_power_apply(c, mu, 0).weights, [1, 0])
    np.testing.assert_allclose(kernel_power_apply(c, mu, 1).weights, TWO[0], atol=1e-15)
    np.testing.assert_allclose(kernel_power_apply(c, mu, 2).weights, [0.625, 0.375], atol=1e-15)
    f = np.array([3.0, -1.0])
    np.testing.assert_array_equal(apply_P(c, f, 0), f)


def test_zoo_examples():
    k3 = chain_zoo("complete", 3, 0.5).kernel
    np.testing.assert_allclose(np.diag(k3), 0.5, atol=1e-15)
    np.testing.assert_allclose(k3[0, 1:], 0.25, atol=1e-15)
    np.testing.assert_allclose(chain_zoo("two_state", 2).kernel, TWO, atol=1e-15)
    c4 = chain_zoo("cycle", 4, 0.5).kernel
    np.testing.assert_allclose(c4[0], [0.5, 0.25, 0, 0.25], atol=1e-15)


def test_hypercube_states_and_size():
    q = chain_zoo("hypercube", 3, 0.5)
    assert q.n == 8 and q.states[0] == "000"
    assert q.metric[0, 7] == 3


def test_parse_zoo_spec_defaults():
    assert parse_zoo_spec("cycle:6").laziness == 0.5
    assert parse_zoo_spec("two_state:2").laziness == 0.0
    with pytest.raises(ChainError):
        parse_zoo_spec("cycle")


def test_distribution_validation():
    with pytest.raises(ValueError):
        Distribution(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        Distribution(np.array([1.5, -0.5]))
    assert list(Distribution(np.array([0.0, 1.0])).support) == [1]


def test_state_lookup_by_name():
    q = chain_zoo("hypercube", 2)
    assert q.index("11") == 3
    assert q.index(2) == 2


def test_reachable_is_exact_on_bipartite_walk():
    c = chain_zoo("cycle", 4)  # non-lazy: parity constraint
    np.testing.assert_array_equal(reachable(c, 0, 2), [True, False, True, False])
    np.testing.assert_array_equal(reachable(c, 0, 3), [False, True, False, True])


@given(conductance_chains(max_n=12))
def test_conductance_chains_are_reversible(chain):
    assert is_reversible(chain)


@given(conductance_chains(), st.integers(0, 12))
def test_stationary_is_invariant_under_powers(chain, t):
    pi = chain.stationary
    np.testing.assert_allclose(kernel_power_apply(chain, pi, t).weights, pi.weights, atol=1e-12)


@given(conductance_chains(), st.integers(0, 20))
def test_powers_stay_stochastic(chain, t):
    np.testing.assert_allclose(kernel_power(chain, t).sum(axis=1), 1.0, atol=1e-10)


@pytest.mark.parametrize("zoo_args", ["complete:6", "cycle:7", "hypercube:3", "path:5", "two_state:2"])
def test_zoo_metrics_satisfy_triangle_inequality(zoo_args):
    d = parse_zoo_spec(zoo_args).metric
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-12)


def test_warning_silent_for_graph_metric():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_chain(TWO, metric=[[0, 1], [1, 0]])
