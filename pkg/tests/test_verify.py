import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaincurv.chain import build_chain, chain_zoo
from chaincurv.curvature import coarse_ricci
from chaincurv.drift import build_discrete_drift
from chaincurv.functional import dirichlet_form, entropy_functional, relaxation_time
from chaincurv.report import Status
from chaincurv.transport import relative_entropy, w1_value
from chaincurv.verify import (
    conjecture2_report,
    conjecture_tables,
    coupling_simulation,
    default_T_grid,
    gaussian_concentration_check,
    onestep_t1_constant,
    peres_tetali_report,
    t1_bound,
    t1_ratio,
    t1_scan,
    t1_sharpness_fit,
    tilted_density,
)
from oracles import grid_mlsi_ratio, simplex_grid_min, w1_linprog
from strategies import random_conductances


def test_t1_bound_formula():
    assert t1_bound(2.0) == pytest.approx(8 / 3)
    assert t1_bound(1.0) == pytest.approx(2.0)
    assert t1_bound(3.0, C=0.5) == pytest.approx(0.5 * 3 / (2 - 1 / 3))


def test_t1_ratio_two_state_point_mass():
    c = chain_zoo("two_state", 2)
    pi = c.stationary.weights
    assert t1_ratio(np.array([1.0, 0.0]), pi, c.metric) == pytest.approx(0.25 / math.log(2), abs=1e-12)
    assert t1_ratio(pi, pi, c.metric) == 0.0


def test_t1_scan_two_state():
    rep = t1_scan(chain_zoo("two_state", 2), samples=200)
    assert rep.constant == pytest.approx(8 / 3)
    assert rep.status is Status.ASSERTED_PASS
    assert rep.worst_ratio >= 0.25 / math.log(2) - 1e-12


def test_t1_scan_lazy_complete_graph():
    rep = t1_scan(chain_zoo("complete", 8, 0.5), samples=1000, seed=3)
    assert rep.status is Status.ASSERTED_PASS
    assert rep.trials >= 1008
    assert rep.worst_ratio <= rep.constant * (1 + 1e-9)


@pytest.mark.parametrize("zoo_args", [("cycle", 5, 0.5), ("hypercube", 3, 0.5), ("complete", 5, 0.5)])
def test_t1_scan_covers_point_masses(zoo_args):
    c = chain_zoo(*zoo_args)
    pi, d = c.stationary.weights, c.metric
    point = max(w1_linprog(np.eye(c.n)[x], pi, d) ** 2 / relative_entropy(np.eye(c.n)[x], pi)
                for x in range(c.n))
    rep = t1_scan(c, samples=0)
    assert rep.worst_ratio >= point - 1e-10


def test_t1_scan_not_applicable_without_positive_curvature():
    rep = t1_scan(chain_zoo("cycle", 8, 0.5), samples=10)
    assert rep.status is Status.NOT_APPLICABLE


def test_t1_scan_user_constant():
    c = chain_zoo("complete", 6, 0.5)
    certified = onestep_t1_constant(c)
    rep = t1_scan(c, samples=50, C=certified)
    assert rep.status is Status.ASSERTED_PASS and "holds" in rep.notes
    low = t1_scan(c, samples=50, C=certified / 100)
    assert "not asserted" in low.notes


@given(st.integers(0, 2**31), st.integers(2, 6))
def test_t1_scan_random_reversible_chains(seed, n):
    c = build_chain(None, conductances=random_conductances(np.random.default_rng(seed), n, lazy=True))
    rep = t1_scan(c, samples=30, seed=seed)
    assert rep.status in (Status.ASSERTED_PASS, Status.NOT_APPLICABLE)


def test_onestep_constant_examples():
    assert onestep_t1_constant(chain_zoo("two_state", 2)) == pytest.approx(0.5)
    assert onestep_t1_constant(chain_zoo("complete", 6, 0.5)) <= 2.0
    assert onestep_t1_constant(chain_zoo("hypercube", 4, 0.5)) == pytest.approx(2.0)
    clockwise = build_chain(np.roll(np.eye(3), 1, axis=1))
    assert onestep_t1_constant(clockwise) == 0.0


@given(st.integers(0, 2**31))
def test_onestep_constant_spot_checks(seed):
    rng = np.random.default_rng(seed)
    c = build_chain(None, conductances=random_conductances(rng, int(rng.integers(2, 7))))
    onestep_t1_constant(c, spot_checks=20, seed=seed)


def test_concentration_lazy_complete_graph():
    c = chain_zoo("complete", 8, 0.5)
    rep = gaussian_concentration_check(c, trials=0)
    alpha = 1 / coarse_ricci(c).kappa
    assert rep.constant == pytest.approx(t1_bound(alpha))
    assert rep.status is Status.ASSERTED_PASS


def test_concentration_hypercube_random_functions():
    rep = gaussian_concentration_check(chain_zoo("hypercube", 3, 0.5), trials=500, seed=2)
    assert rep.status is Status.ASSERTED_PASS and rep.trials == 524


def test_concentration_detects_too_small_constant():
    rep = gaussian_concentration_check(chain_zoo("hypercube", 3, 0.5), C=1e-3, trials=10)
    assert rep.status is Status.ASSERTED_FAIL


def test_concentration_not_applicable():
    rep = gaussian_concentration_check(chain_zoo("cycle", 8, 0.5), trials=5)
    assert rep.status is Status.NOT_APPLICABLE


def test_coupling_trivial_target():
    c = chain_zoo("cycle", 4, 0.5)
    T = 4
    mu = np.linalg.matrix_power(c.kernel, T)[0]
    rep = coupling_simulation(c, mu, 0, T, n_samples=2000)
    assert rep.witness["bound"] == pytest.approx(0.0, abs=1e-7)
    assert rep.worst_ratio == 0.0
    assert rep.witness["exact_mean_distance"] == pytest.approx(0.0, abs=1e-12)
    assert rep.status is Status.ASSERTED_PASS


def test_coupling_two_state_point_target():
    c = chain_zoo("two_state", 2)
    rep = coupling_simulation(c, [0.0, 1.0], 0, 6, n_samples=100_000, seed=4)
    w = rep.witness
    assert rep.status is Status.ASSERTED_PASS
    assert w["mean_distance"] - 3 * w["standard_error"] <= w["bound"]
    assert w["max_step_lemma_gap"] <= 1e-9
    # the simulation estimates the exact coupled expectation
    assert abs(w["mean_distance"] - w["exact_mean_distance"]) <= 5 * w["standard_error"]


@pytest.mark.parametrize("zoo_args", [("two_state", 2, 0.0), ("cycle", 4, 0.5), ("hypercube", 3, 0.5)])
def test_coupling_dominates_endpoint_transport(zoo_args):
    c = chain_zoo(*zoo_args)
    rng = np.random.default_rng(7)
    nu = rng.dirichlet(np.ones(c.n))
    rep = coupling_simulation(c, nu, 0, 6, n_samples=20_000, seed=1)
    w = rep.witness
    # any coupling of (nu, mu_T) costs at least W1
    assert w["exact_mean_distance"] >= w["w1_endpoint"] - 1e-12
    assert w["mean_distance"] + 3 * w["standard_error"] >= w["w1_endpoint"]
    # endpoint histogram: chi^2 with cells-1 degrees of freedom, loose 1e-6 tail
    assert w["endpoint_chi2"] <= w["endpoint_cells"] + 10 * math.sqrt(2 * w["endpoint_cells"]) + 30
    assert rep.status is Status.ASSERTED_PASS


def test_coupling_is_deterministic():
    c = chain_zoo("hypercube", 2, 0.5)
    a = coupling_simulation(c, [0.1, 0.2, 0.3, 0.4], 0, 3, n_samples=5000, seed=9)
    b = coupling_simulation(c, [0.1, 0.2, 0.3, 0.4], 0, 3, n_samples=5000, seed=9)
    assert a.to_record() == b.to_record()


def test_peres_tetali_complete_graph_sweep():
    ratios = []
    for n in (3, 4, 6, 8):
        rep = peres_tetali_report(chain_zoo("complete", n, 0.5), restarts=8)
        assert rep.status is Status.REPORT_ONLY
        assert rep.witness["converged"]
        ratios.append(rep.worst_ratio)
    assert all(r > 0 for r in ratios)


def test_peres_tetali_lazy_two_state_matches_grid_oracle():
    c = chain_zoo("two_state", 2, 0.5)
    pi = c.stationary.weights
    rho0 = simplex_grid_min(grid_mlsi_ratio(c.kernel, pi), pi)[0]
    rep = peres_tetali_report(c, restarts=8)
    assert rep.witness["rho0"] == pytest.approx(rho0, rel=1e-3)
    assert rep.worst_ratio == pytest.approx(rho0 / coarse_ricci(c).kappa, rel=1e-3)


def test_peres_tetali_flags_non_lazy_chain():
    rep = peres_tetali_report(chain_zoo("cycle", 5), restarts=4)
    assert rep.status is Status.REPORT_ONLY
    assert "not lazy" in rep.notes


def test_conjecture2_constant_density():
    c = chain_zoo("hypercube", 3, 0.5)
    rep = conjecture2_report(c, np.ones(8), 0)
    assert rep.status is Status.REPORT_ONLY
    for row in rep.table:
        assert row["divergence"] == 0.0 and row["alpha_rate"] == 0.0 and row["ratio"] == 0.0


def test_conjecture2_two_state_limit():
    c = chain_zoo("two_state", 2)
    f = np.array([1.5, 0.5])
    alpha = 1 / coarse_ricci(c).kappa
    limit = entropy_functional(f, c.stationary.weights) / (alpha * dirichlet_form(f, np.log(f), c))
    rep = conjecture2_report(c, f, 0, [20 * relaxation_time(c)])
    assert rep.witness["limit_ratio"] == pytest.approx(limit, rel=1e-14)
    assert rep.table[0]["ratio"] == pytest.approx(limit, rel=1e-6)


def test_conjecture2_hypercube_random_density():
    c = chain_zoo("hypercube", 3, 0.5)
    f = np.random.default_rng(0).exponential(size=8) + 0.1
    f /= c.stationary.weights @ f
    rep = conjecture2_report(c, f, 0)
    assert [r["T"] for r in rep.table] == pytest.approx(default_T_grid(c))
    assert all(r["divergence"] > 0 and r["ratio"] > 0 for r in rep.table)


def test_conjecture_tables_shape():
    chains = [("K4", chain_zoo("complete", 4, 0.5)), ("C8", chain_zoo("cycle", 8, 0.5))]
    pt, c2 = conjecture_tables(chains, restarts=4)
    assert [r["chain"] for r in pt.table] == ["K4", "C8"]
    # C8 has kappa = 0 and gets no conjecture-2 rows
    assert {r["chain"] for r in c2.table} == {"K4"}
    assert all(r["ratio"] == 0.0 for r in c2.table if r["f"] == "one")


def test_tilted_density_normalised():
    c = chain_zoo("path", 5, 0.5)
    f = tilted_density(c, 0, 2.0)
    assert c.stationary.weights @ f == pytest.approx(1.0)
    assert np.all(np.diff(f) < 0)


def test_hypercube_alpha_scaling_is_linear():
    rep = t1_sharpness_fit([chain_zoo("hypercube", m, 0.5) for m in range(2, 7)], samples=100)
    assert rep.status is Status.ASSERTED_PASS
    assert rep.worst_ratio == pytest.approx(1.0, abs=0.05)


def test_sharpness_fit_undefined_without_two_curved_chains():
    rep = t1_sharpness_fit([chain_zoo("cycle", n, 0.5) for n in (6, 8, 10)], samples=20)
    assert rep.status is Status.ASSERTED_FAIL
    assert "exponent undefined" in rep.notes


def test_discrete_drift_divergence_matches_coupling_witness():
    c = chain_zoo("cycle", 4, 0.5)
    nu = np.array([0.1, 0.2, 0.3, 0.4])
    s = build_discrete_drift(c, nu, 0, 6)
    rep = coupling_simulation(c, nu, 0, 6, n_samples=100)
    assert rep.witness["divergence"] == pytest.approx(relative_entropy(nu, s.mu_T.weights), abs=1e-14)
    assert rep.witness["w1_endpoint"] == pytest.approx(w1_value(nu, s.mu_T.weights, c.metric))
