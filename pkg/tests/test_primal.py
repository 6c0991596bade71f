import numpy as np
import pytest

from drawdown.errors import OutOfDomain
from drawdown.model import derived_constants
from drawdown.primal import (dual_to_primal, feedback_consumption,
                             feedback_investment, policy_to_csv, value_V)


def test_terminal_layer_power_utility(ref_params, small_policy):
    # at t = T the value is the utility of consuming the whole ratio
    p = ref_params.p
    omega = np.linspace(0.1, 0.95, 40)
    exact = omega ** (1.0 - p) / (1.0 - p)
    got = small_policy.U_at(omega, ref_params.T)
    ds = 6.0 / 200
    assert np.max(np.abs(got - exact)) <= 5.0 * ds


def test_duality_round_trip(ref_params, small_solution, small_policy):
    # u(y,t) = max_omega [U(omega,t) - omega y] at t = 0 (last layer)
    lat = small_solution.lattice
    k = lat.n_tau
    p = ref_params.p
    # picks inside the active dual domain S(tau) < s < Z(tau) at t = 0
    s_pick = np.array([-0.15, 0.0, 0.1, 0.4, 1.0])
    u_row = np.exp(-(1.0 - p) / p * lat.s_nodes) * small_solution.v[k]
    omega = small_policy.omega_grid
    U_row = small_policy.U[k]
    for s0 in s_pick:
        y = np.exp(s0)
        legendre = np.max(U_row - omega * y)
        direct = np.interp(s0, lat.s_nodes, u_row)
        assert legendre == pytest.approx(direct, abs=5e-3)


def test_U_concave_increasing(small_policy):
    assert np.all(small_policy.d2U < 0.0)
    assert np.all(np.diff(small_policy.U, axis=1) > 0.0)
    assert np.all(small_policy.dU > 0.0)


def test_U_vanishes_at_zero_ratio(small_policy):
    # layer 0 has no zero set, so the tail is only algebraically small there
    assert abs(small_policy.U[0, 0]) < 0.06
    assert np.all(np.abs(small_policy.U[1:, 0]) < 0.012)


def test_threshold_ordering(small_policy):
    assert np.all(small_policy.omega_alpha < small_policy.omega_one)
    # omega_1 comes from a central difference; near tau = 0 the two
    # thresholds coincide, so allow discretization slack there
    assert np.all(small_policy.omega_one <= small_policy.omega_star + 2e-3)
    assert np.all(small_policy.omega_one[5:] <= small_policy.omega_star[5:] + 1e-12)


def test_crosscheck_recorded(small_policy):
    gaps = small_policy.crosscheck["omega_star_gap"]
    assert np.max(gaps[2:]) <= 0.05


def test_feedback_consumption_branches(ref_params, small_policy):
    t = 0.0
    k = small_policy.tau.size - 1
    o_a = small_policy.omega_alpha[k]
    o_1 = small_policy.omega_one[k]
    o_s = small_policy.omega_star[k]
    assert feedback_consumption(0.5 * o_a, t, small_policy) == pytest.approx(
        ref_params.alpha)
    assert feedback_consumption(0.5 * (o_1 + o_s), t, small_policy) == pytest.approx(1.0)
    mid = feedback_consumption(0.5 * (o_a + o_1), t, small_policy)
    assert ref_params.alpha < mid < 1.0
    # monotone nondecreasing in omega
    omegas = np.linspace(0.2 * o_a, o_s, 60)
    c = feedback_consumption(omegas, t, small_policy)
    assert np.all(np.diff(c) >= -1e-10)


def test_feedback_out_of_domain(small_policy):
    t = 0.0
    k = small_policy.tau.size - 1
    beyond = 1.5 * small_policy.omega_star[k]
    with pytest.raises(OutOfDomain):
        feedback_consumption(beyond, t, small_policy)
    with pytest.raises(OutOfDomain):
        feedback_investment(beyond, t, small_policy)
    with pytest.raises(OutOfDomain):
        small_policy.U_at(0.5, -0.2)


def test_feedback_investment_consistency(ref_params, small_policy):
    # pi = (mu/sigma^2) y u_yy equals -(mu/sigma^2) dU/d2U via the transform
    mu_s2 = ref_params.mu / ref_params.sigma**2
    pi = small_policy.pi_tab
    alt = -mu_s2 * small_policy.dU / small_policy.d2U
    sel = slice(10, -10)
    assert np.all(pi >= 0.0)
    assert np.allclose(pi[1:, sel], alt[1:, sel], rtol=1e-6, atol=1e-9)
    k = small_policy.tau.size - 1
    val = feedback_investment(small_policy.omega_one[k], 0.0, small_policy)
    assert val > 0.0


def test_value_V_properties(ref_params, small_policy):
    p = ref_params.p
    for t in (0.0, 0.4):
        v1 = value_V(0.8, 1.0, t, small_policy)
        v2 = value_V(1.6, 2.0, t, small_policy)
        assert v2 == pytest.approx(2.0 ** (1.0 - p) * v1, rel=1e-9)
    assert value_V(0.0, 1.0, 0.3, small_policy) == 0.0
    # terminal slice collapses to the raw power utility for any z
    for x, z in ((0.5, 1.0), (2.0, 1.0), (0.7, 0.7)):
        assert value_V(x, z, ref_params.T, small_policy) == pytest.approx(
            x ** (1.0 - p) / (1.0 - p), abs=0.02)


def test_value_V_reference_jump(small_policy):
    # raising z above x/omega* only lowers the value; below it has no effect
    t = 0.0
    k = small_policy.tau.size - 1
    star = small_policy.omega_star[k]
    x = 1.0
    base = value_V(x, x / star, t, small_policy)
    assert value_V(x, 0.5 * x / star, t, small_policy) == pytest.approx(base, rel=1e-9)
    assert value_V(x, 2.0 * x / star, t, small_policy) < base


def test_policy_to_csv(tmp_path, small_policy):
    th = tmp_path / "thresholds.csv"
    tab = tmp_path / "policy.csv"
    policy_to_csv(small_policy, str(th), str(tab))
    lines = th.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "t,omega_star,omega_one,omega_alpha"
    assert len(lines) == 2 + small_policy.t.size
    t_col = np.array([float(r.split(",")[0]) for r in lines[2:]])
    assert np.all(np.diff(t_col) > 0)     # written in increasing t
    lines = tab.read_text().splitlines()
    assert lines[1] == "t,omega,U,dU,c_star,pi_star"
    assert len(lines) == 2 + small_policy.t.size * small_policy.omega_grid.size
