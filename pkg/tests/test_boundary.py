import itertools

import numpy as np
import pytest

from drawdown.boundary import (extract_S, extract_Z, invert_S_to_T,
                               reconstruct_v, solve_phi, solve_phi_no_decay,
                               solve_w_obstacle)
from drawdown.dual_solver import EQUATION, FUNCTION, GRADIENT, DualSolution
from drawdown.errors import NonMonotoneBoundary
from drawdown.model import derived_constants, obstacle_source_g
from drawdown.lattice import GridConfig, build_lattice

from test_dual_solver import toy_lattice


def _handmade_solution(params, lat, v):
    regime = np.full(v.shape, EQUATION, dtype=np.int8)
    regime[v == 0.0] = FUNCTION
    regime[:, :-1][np.diff(v, axis=1) == 0.0] = GRADIENT
    regime[:, 0] = GRADIENT
    return DualSolution(v=v, regime=regime, lattice=lat, params=params)


def test_extract_Z_exact_node(ref_params):
    lat = toy_lattice(ref_params, n_s=7, n_tau=2)
    k = 4
    v = np.zeros((3, lat.n_s))
    ramp = np.maximum(lat.s_nodes[k] - lat.s_nodes, 0.0)
    v[:] = ramp
    v[0] = 1.0
    sol = _handmade_solution(ref_params, lat, v)
    Z = extract_Z(sol)
    assert Z[1] == pytest.approx(lat.s_nodes[k], abs=1e-14)
    assert Z[2] == pytest.approx(lat.s_nodes[k], abs=1e-14)


def test_extract_Z_infinite_when_positive(ref_params, small_solution):
    Z = extract_Z(small_solution)
    assert not np.isfinite(Z[0])          # initial layer has no zero set
    assert np.isfinite(Z[-1])
    dc = derived_constants(ref_params)
    finite = Z[np.isfinite(Z)]
    assert np.all(finite > dc.s_alpha)    # Z stays above the kink
    assert np.all(np.diff(finite) <= 2 * small_solution.lattice.ds)


def test_extract_Z_non_monotone_raises(ref_params):
    lat = toy_lattice(ref_params, n_s=9, n_tau=2)
    v = np.ones((3, lat.n_s))
    v[1, 2:] = 0.0
    v[2, 7:] = 0.0   # Z jumps right by 5 cells between layers
    sol = _handmade_solution(ref_params, lat, v)
    with pytest.raises(NonMonotoneBoundary):
        extract_Z(sol)


def test_extract_S_plateau(ref_params, small_solution):
    lat = small_solution.lattice
    S = extract_S(small_solution)
    for k in (1, lat.n_tau // 2, lat.n_tau):
        lab = small_solution.regime[k]
        j = int(np.nonzero(lab[1:] != GRADIENT)[0][0]) + 1
        assert lat.s_nodes[j - 1] - 1e-12 <= S[k] <= min(lat.s_nodes[j], 0.0) + 1e-12
    assert np.all(S <= 0.0)
    assert abs(S[1]) <= 2 * lat.ds
    assert np.all(np.diff(S[1:]) <= 2 * lat.ds)


def test_invert_S_to_T_two_point():
    S = np.array([0.0, -0.1, -0.3])
    tau = np.array([0.0, 0.5, 1.0])
    T_of_s = invert_S_to_T(S, tau)
    assert T_of_s(-0.2) == pytest.approx(0.75)
    assert T_of_s(0.5) == 0.0
    assert T_of_s(1e-9) == 0.0


def test_T_round_trip(small_boundaries, small_solution):
    lat = small_solution.lattice
    T_of_s = small_boundaries.T_of_s
    for k in range(5, lat.n_tau + 1, 20):
        assert abs(T_of_s(small_boundaries.S[k]) - lat.tau_nodes[k]) <= 2 * lat.dtau


def test_phi_closed_form_and_order(ref_params):
    dc = derived_constants(ref_params)
    v0, a0 = dc.v0, dc.a0
    errs = []
    for n in (100, 200):
        tau = np.linspace(0.0, 1.0, n + 1)
        phi = solve_phi(np.zeros(n + 1), ref_params, tau)
        exact = v0 / a0 + (v0 - v0 / a0) * np.exp(-a0 * tau)
        errs.append(np.max(np.abs(phi - exact)))
    assert phi[0] == v0
    assert errs[0] / errs[1] > 3.0     # O(dtau^2) quadrature
    assert errs[1] < 1e-5


def test_phi_prime_at_zero(small_boundaries, ref_params):
    # phi'(0) = (1 - a0) v0 from the ODE with S(0) = 0; negative here
    dc = derived_constants(ref_params)
    dtau = small_boundaries.tau[1]
    slope = (small_boundaries.phi[1] - small_boundaries.phi[0]) / dtau
    assert slope == pytest.approx((1.0 - dc.a0) * dc.v0, abs=0.05)


def test_phi_no_decay_variant_differs(small_boundaries, ref_params):
    alt = solve_phi_no_decay(small_boundaries.S, ref_params, small_boundaries.tau)
    assert alt[0] == small_boundaries.phi[0]
    assert np.max(np.abs(alt - small_boundaries.phi)) > 0.1
    assert np.all(np.diff(alt) > 0)   # the variant is increasing when S <= 0


# -- toy obstacle oracle ------------------------------------------------------

def _w_oracle_layer(params, lat, wprev, g, tol):
    """Exhaustive contact-set enumeration for one layer of the w problem."""
    from test_dual_solver import _oracle_rows, _oracle_residuals
    n = lat.n_s
    feasible = []
    for contact in itertools.product([False, True], repeat=n):
        A = np.zeros((n, n))
        b = np.zeros(n)
        dc_rows, dc_rhs = _oracle_rows([EQUATION] * n, params, lat, wprev, -g)
        A[:], b[:] = dc_rows, dc_rhs
        for i in range(n):
            if contact[i]:
                A[i] = 0.0
                A[i, i] = 1.0
                b[i] = 0.0
        w = np.linalg.solve(A, b)
        r_eq, _, _ = _oracle_residuals(w, params, lat, wprev, -g)
        ok = True
        for i in range(n):
            if contact[i]:
                if r_eq[i] > tol:        # max branch: equation must be <= 0
                    ok = False
                    break
            else:
                if abs(r_eq[i]) > tol or w[i] > tol:
                    ok = False
                    break
        if ok:
            feasible.append(w)
    return feasible


def test_toy_w_oracle(ref_params):
    lat = toy_lattice(ref_params, n_s=5, n_tau=2, ds=0.3)
    g = obstacle_source_g(lat.s_nodes, ref_params)
    Z = np.full(lat.n_tau + 1, np.inf)
    w = solve_w_obstacle(ref_params, lat, Z)
    tol = 1e-10
    wprev = np.zeros(lat.n_s)
    for k in range(1, lat.n_tau + 1):
        feasible = _w_oracle_layer(ref_params, lat, wprev, g, tol)
        assert feasible
        for cand in feasible:
            assert np.max(np.abs(cand - w[k])) <= 1e-10
        wprev = w[k]


def test_w_structure(ref_params, small_solution, small_boundaries):
    lat = small_solution.lattice
    w, S = small_boundaries.w, small_boundaries.S
    assert np.max(w) <= 1e-12
    # contact on the gradient side
    for k in (lat.n_tau // 2, lat.n_tau):
        left = lat.s_nodes <= S[k] - lat.ds
        assert np.max(np.abs(w[k, left])) <= 1e-10
    # clearly negative on s > 0 at the last layer
    mid = (lat.s_nodes > 0.5) & (lat.s_nodes < 1.0)
    assert np.all(w[-1, mid] < -1e-6)


def test_reconstruction(ref_params, small_solution, small_boundaries):
    lat = small_solution.lattice
    b = small_boundaries
    vbar = reconstruct_v(b.w, b.phi, b.S, lat, b.Z)
    dc = derived_constants(ref_params)
    gap = np.max(np.abs(vbar - small_solution.v))
    assert gap <= 5.0 * (lat.ds + lat.dtau) * dc.v0
    # value phi on the boundary itself
    for k in (1, lat.n_tau):
        at_S = np.interp(b.S[k], lat.s_nodes, vbar[k])
        assert at_S == pytest.approx(b.phi[k], rel=1e-9)
    # nonincreasing in s up to the zero clamp at Z
    d = np.diff(vbar, axis=1)
    assert np.max(d[vbar[:, 1:] > 0.0]) <= 1e-12
