"""Free-boundary extraction and the reconstruction path.

From a solved dual solution this module extracts the function-constraint
boundary Z(tau) and the gradient boundary S(tau), inverts S into T(s),
integrates the phi ODE, solves the companion parabolic obstacle problem for
w(s,tau), and rebuilds v as phi(tau) + int_S(tau)^s w -- an independent
consistency path for the direct solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dual_solver import GRADIENT, DualSolution, PolicyIterationDiverged
from .errors import EmptyGradientRegion, NonMonotoneBoundary
from .lattice import Lattice, assemble_operator, banded_solve
from .model import (ModelParams, derived_constants, obstacle_source_g,
                    scaled_source)


class TimeOfBoundary:
    """Piecewise-linear inverse of the gradient boundary: s -> tau.

    T(s) = 0 for s > 0; clamped to the last layer for s below S(T).
    """

    def __init__(self, s_knots: np.ndarray, tau_knots: np.ndarray):
        # knots ascending in s, tau descending along them
        self.s_knots = s_knots
        self.tau_knots = tau_knots

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.interp(s, self.s_knots, self.tau_knots)
        out = np.where(s > 0.0, 0.0, out)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class BoundarySet:
    tau: np.ndarray
    Z: np.ndarray            # +inf where the function constraint is off-grid
    S: np.ndarray
    phi: np.ndarray
    w: np.ndarray = field(repr=False)
    T_of_s: TimeOfBoundary | None = None


def extract_Z(sol: DualSolution, tol_v: float | None = None) -> np.ndarray:
    """Smallest s per layer with v <= tol_v, refined by interpolating v to zero."""
    lat = sol.lattice
    dc = derived_constants(sol.params)
    tol = tol_v if tol_v is not None else 1e-10 * dc.v0
    s = lat.s_nodes
    Z = np.full(lat.n_tau + 1, np.inf)
    for k in range(1, lat.n_tau + 1):
        vk = sol.v[k]
        hits = np.nonzero(vk <= tol)[0]
        if hits.size == 0:
            continue
        j = hits[0]
        if j == 0:
            Z[k] = s[0]
            continue
        drop = vk[j - 1] - vk[j]
        if drop > 0.0:
            z = s[j - 1] + lat.ds * vk[j - 1] / drop
        else:
            z = s[j]
        Z[k] = min(max(z, s[j - 1]), s[j] + lat.ds)
    finite = np.isfinite(Z)
    zf = Z[finite]
    if np.any(np.diff(zf) > 2.0 * lat.ds):
        worst = float(np.max(np.diff(zf)))
        raise NonMonotoneBoundary(f"Z increases by {worst:.3g} > 2*ds across layers")
    return Z


def extract_S(sol: DualSolution, tol_grad: float | None = None) -> np.ndarray:
    """Right edge of the contiguous gradient-labelled block per layer.

    Refined by interpolating the forward difference to zero and clamped to
    <= 0.  S(tau=0) = 0 by convention.  A layer without gradient nodes is
    legal only within 2*dtau of tau = 0.
    """
    lat = sol.lattice
    s, ds = lat.s_nodes, lat.ds
    dc = derived_constants(sol.params)
    S = np.zeros(lat.n_tau + 1)
    for k in range(1, lat.n_tau + 1):
        lab = sol.regime[k]
        nong = np.nonzero(lab[1:] != GRADIENT)[0]
        j = (nong[0] + 1) if nong.size else lat.n_s  # first non-gradient node
        if j <= 1:
            if lat.tau_nodes[k] <= 2.0 * lat.dtau + 1e-15:
                S[k] = min(0.0, s[0])
                continue
            raise EmptyGradientRegion(f"no gradient nodes at tau={lat.tau_nodes[k]:.6g}")
        if j >= lat.n_s:
            S[k] = min(0.0, s[-1])
            continue
        # on the flat side v and vprev equal their node-0 values, so the
        # equation residual reduces to the smooth profile c_k + q(s); its
        # zero crossing is the boundary to within the scheme's own accuracy
        m_k = sol.v[k, 0]
        m_prev = sol.v[k - 1, 0]
        c_k = (m_k - m_prev) / lat.dtau + dc.a0 * m_k
        rr = c_k + scaled_source(s, sol.params)
        neg = np.nonzero(rr <= 0.0)[0]
        refined = s[j - 1]
        if neg.size and neg[0] > 0:
            i = neg[0]
            root = brentq(lambda x: c_k + float(scaled_source(np.array([x]), sol.params)[0]),
                          s[i - 1], s[i])
            if abs(root - s[j]) <= 2.0 * ds:
                refined = root
        S[k] = min(refined, 0.0)
    if np.any(np.diff(S[1:]) > 2.0 * ds):
        worst = float(np.max(np.diff(S[1:])))
        raise NonMonotoneBoundary(f"S increases by {worst:.3g} > 2*ds across layers")
    return S


def invert_S_to_T(S: np.ndarray, tau: np.ndarray) -> TimeOfBoundary:
    """Piecewise-linear inverse T(s) of a decreasing boundary sequence."""
    order = np.argsort(S)
    s_sorted = S[order]
    tau_sorted = tau[order]
    # drop duplicate abscissae (flat stretches within solver tolerance)
    keep = np.concatenate([[True], np.diff(s_sorted) > 1e-14])
    return TimeOfBoundary(s_sorted[keep], tau_sorted[keep])


def solve_phi(S: np.ndarray, params: ModelParams, tau: np.ndarray) -> np.ndarray:
    """Integrating-factor quadrature for phi' + a0 phi = rhs(S(tau)), phi(0)=p/(1-p).

    rhs(tau) = -e^((1-p)/p S)(e^S - 1/(1-p)); trapezoidal rule on the layers.
    """
    dc = derived_constants(params)
    p = params.p
    c = (1.0 - p) / p
    rhs = -np.exp(c * S) * (np.exp(S) - 1.0 / (1.0 - p))
    integrand = np.exp(dc.a0 * tau) * rhs
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(tau))])
    return np.exp(-dc.a0 * tau) * (dc.v0 + integral)


def solve_phi_no_decay(S: np.ndarray, params: ModelParams, tau: np.ndarray) -> np.ndarray:
    """Variant dropping the linear decay term: phi = p/(1-p) + int_0^tau rhs.

    Kept for comparison only; the primary path integrates the full ODE.
    """
    p = params.p
    c = (1.0 - p) / p
    rhs = -np.exp(c * S) * (np.exp(S) - 1.0 / (1.0 - p))
    dc = derived_constants(params)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (rhs[1:] + rhs[:-1]) * np.diff(tau))])
    return dc.v0 + integral


def solve_w_obstacle(params: ModelParams, lattice: Lattice, Z: np.ndarray,
                     *, max_iter: int = 200) -> np.ndarray:
    """Projected policy iteration for max{w_tau - L_s w - g, w} = 0 on s < Z(tau).

    The first node at or right of the interpolated Z(tau) is pinned to 0,
    as are all nodes beyond it; w(., 0) = 0.
    """
    op = assemble_operator(params, lattice)
    n_s, n_tau = lattice.n_s, lattice.n_tau
    dtau = lattice.dtau
    g = obstacle_source_g(lattice.s_nodes, params)
    w = np.zeros((n_tau + 1, n_s))

    contact = np.ones(n_s, dtype=bool)
    for k in range(1, n_tau + 1):
        wprev = w[k - 1]
        pinned = lattice.s_nodes >= Z[k] - 1e-14 if np.isfinite(Z[k]) else np.zeros(n_s, dtype=bool)
        contact = contact | pinned
        for _ in range(max_iter):
            lower = op.lower.copy()
            diag = op.diag.copy()
            upper = op.upper.copy()
            rhs = wprev / dtau + g
            lower[contact] = 0.0
            diag[contact] = 1.0
            upper[contact] = 0.0
            rhs[contact] = 0.0
            wk = banded_solve(lower, diag, upper, rhs)
            r_eq = op.apply(wk) - wprev / dtau - g
            new_contact = wk >= r_eq  # argmax of the two branches
            new_contact |= pinned
            if np.array_equal(new_contact, contact):
                break
            contact = new_contact
        else:
            raise PolicyIterationDiverged(f"obstacle layer {k}: no fixed contact set")
        w[k] = wk
    return w


def reconstruct_v(w: np.ndarray, phi: np.ndarray, S: np.ndarray, lattice: Lattice,
                  Z: np.ndarray | None = None) -> np.ndarray:
    """Rebuild v(s,tau) = phi(tau) + int_{S(tau)}^s w(xi,tau) dxi per layer.

    Extended by 0 beyond Z(tau) when Z is supplied.
    """
    s = lattice.s_nodes
    vbar = np.empty_like(w)
    for k in range(w.shape[0]):
        W = np.concatenate([[0.0], np.cumsum(0.5 * (w[k, 1:] + w[k, :-1]) * np.diff(s))])
        W_at_S = np.interp(S[k], s, W)
        vbar[k] = phi[k] + (W - W_at_S)
        if Z is not None and np.isfinite(Z[k]):
            vbar[k, s > Z[k]] = 0.0
    return vbar


def compute_boundaries(sol: DualSolution) -> BoundarySet:
    """Full boundary pipeline: Z, S, T(s), phi and the w obstacle solve."""
    lat = sol.lattice
    Z = extract_Z(sol)
    S = extract_S(sol)
    phi = solve_phi(S, sol.params, lat.tau_nodes)
    w = solve_w_obstacle(sol.params, lat, Z)
    return BoundarySet(tau=lat.tau_nodes, Z=Z, S=S, phi=phi, w=w,
                       T_of_s=invert_S_to_T(S, lat.tau_nodes))


def boundaries_to_csv(bset: BoundarySet, path: str, params: ModelParams) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# mu={params.mu:.17g} sigma={params.sigma:.17g} delta={params.delta:.17g}"
                 f" p={params.p:.17g} alpha={params.alpha:.17g} T={params.T:.17g}\n")
        fh.write("tau,S,Z,phi\n")
        for k in range(bset.tau.size):
            z = "inf" if not np.isfinite(bset.Z[k]) else f"{bset.Z[k]:.17g}"
            fh.write(f"{bset.tau[k]:.17g},{bset.S[k]:.17g},{z},{bset.phi[k]:.17g}\n")
