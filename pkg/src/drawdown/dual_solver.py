"""Backward-in-tau solver for the doubly constrained dual variational inequality.

At every node the discrete complementarity system
    min{ (v - v_prev)/dtau - L_s v + q(s), -D_s v, v } = 0
is enforced, with q(s) = e^((1-p)/p s) f(e^s), D_s the forward difference,
and the three branches labelled EQUATION / GRADIENT / FUNCTION.  Each layer
is solved by Howard policy iteration over the per-node regime assignment.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import NewtonDiverged, PolicyIterationDiverged, ToleranceNotMet
from .lattice import DiscreteOperator, Lattice, assemble_operator, banded_solve
from .model import ModelParams, derived_constants, scaled_source

EQUATION, GRADIENT, FUNCTION = 0, 1, 2
REGIME_NAMES = ("EQUATION", "GRADIENT", "FUNCTION")

_BIG = 1e300  # residual sentinel for branches unavailable at a node


def default_tol_active(params: ModelParams) -> float:
    return 1e-8 * params.p / (1.0 - params.p)


@dataclass(frozen=True)
class DualSolution:
    """v(s, tau) on the lattice with per-node active-regime labels.

    Arrays are layer-major: v[k, i] is layer tau_k, node s_i.
    """

    v: np.ndarray
    regime: np.ndarray
    lattice: Lattice
    params: ModelParams

    def to_csv(self, path: str) -> None:
        lat = self.lattice
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# n_s={lat.n_s} n_tau={lat.n_tau} ds={lat.ds:.17g} dtau={lat.dtau:.17g}\n")
            fh.write("s,tau,v,regime\n")
            for k, tau in enumerate(lat.tau_nodes):
                for i, s in enumerate(lat.s_nodes):
                    fh.write(f"{s:.17g},{tau:.17g},{self.v[k, i]:.17g},"
                             f"{REGIME_NAMES[self.regime[k, i]]}\n")

    def to_binary(self, path: str) -> None:
        """Compact dump: little-endian header (n_s, n_tau as int64) followed by
        the v array, float64, row-major in (layer, node) order."""
        lat = self.lattice
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qq", lat.n_s, lat.n_tau))
            fh.write(np.ascontiguousarray(self.v, dtype="<f8").tobytes())

    @staticmethod
    def read_binary(path: str) -> tuple[int, int, np.ndarray]:
        with open(path, "rb") as fh:
            n_s, n_tau = struct.unpack("<qq", fh.read(16))
            v = np.frombuffer(fh.read(), dtype="<f8").reshape(n_tau + 1, n_s)
        return n_s, n_tau, v


def _assemble_rows(regime: np.ndarray, op: DiscreteOperator, vprev: np.ndarray,
                   q: np.ndarray):
    """Banded rows + rhs for a given regime assignment."""
    n = regime.size
    ds, dtau = op.ds, op.dtau
    lower = op.lower.copy()
    diag = op.diag.copy()
    upper = op.upper.copy()
    rhs = vprev / dtau - q

    grad = regime == GRADIENT
    func = regime == FUNCTION
    # gradient rows: (v_i - v_{i+1})/ds = 0  (forward difference of -D_s v)
    lower[grad] = 0.0
    diag[grad] = 1.0 / ds
    upper[grad] = -1.0 / ds
    rhs[grad] = 0.0
    # function rows: v_i = 0
    lower[func] = 0.0
    diag[func] = 1.0
    upper[func] = 0.0
    rhs[func] = 0.0
    if grad[n - 1]:
        raise AssertionError("gradient regime is not available at the right edge")
    return lower, diag, upper, rhs


def branch_residuals(v: np.ndarray, vprev: np.ndarray, op: DiscreteOperator,
                     q: np.ndarray):
    """The three complementarity branches evaluated at v (equation branch uses
    the same upwinded rows as the solve, including boundary closures)."""
    r_eq = op.apply(v) - vprev / op.dtau + q
    r_grad = np.full_like(v, _BIG)
    r_grad[:-1] = -(v[1:] - v[:-1]) / op.ds
    r_func = v.copy()
    return r_eq, r_grad, r_func


def _label(r_eq, r_grad, r_func, tol: float) -> np.ndarray:
    """Deterministic labels with precedence FUNCTION > GRADIENT > EQUATION."""
    lab = np.full(r_eq.size, EQUATION, dtype=np.int8)
    lab[r_grad <= tol] = GRADIENT
    lab[r_func <= tol] = FUNCTION
    return lab


def solve_v(params: ModelParams, lattice: Lattice, *, tol_active: float | None = None,
            max_iter: int = 200) -> DualSolution:
    """Solve the dual VI layer by layer with policy iteration over three regimes.

    Node 0 always carries the gradient row (zero one-sided derivative, the
    left edge sits deep in the gradient region).  The right edge offers only
    the equation closure and the function constraint; with
    right_boundary='dirichlet_zero' it is pinned to v = 0.
    """
    op = assemble_operator(params, lattice)
    dc = derived_constants(params)
    tol = tol_active if tol_active is not None else default_tol_active(params)
    n_s, n_tau = lattice.n_s, lattice.n_tau
    q = scaled_source(lattice.s_nodes, params)
    pin_right = lattice.right_boundary == "dirichlet_zero"

    v = np.empty((n_tau + 1, n_s))
    labels = np.empty((n_tau + 1, n_s), dtype=np.int8)
    v[0] = dc.v0
    labels[0] = GRADIENT  # -D_s v = 0 on the constant initial layer

    regime = np.full(n_s, EQUATION, dtype=np.int8)  # first-layer guess
    for k in range(1, n_tau + 1):
        vprev = v[k - 1]
        regime = regime.copy()
        regime[0] = GRADIENT
        if pin_right:
            regime[-1] = FUNCTION
        elif regime[-1] == GRADIENT:
            regime[-1] = EQUATION

        vk = vprev
        for _ in range(max_iter):
            rows = _assemble_rows(regime, op, vprev, q)
            vk = banded_solve(*rows)
            r_eq, r_grad, r_func = branch_residuals(vk, vprev, op, q)
            active = np.choose(regime, [r_eq, r_grad, r_func])
            inact_eq = np.where(regime != EQUATION, r_eq, _BIG)
            inact_gr = np.where(regime != GRADIENT, r_grad, _BIG)
            inact_fn = np.where(regime != FUNCTION, r_func, _BIG)
            inactive_floor = np.minimum(np.minimum(inact_eq, inact_gr), inact_fn)
            # relabel only nodes violating complementarity; a full argmin
            # resweep dithers on FP noise near the boundary and can cycle
            bad = (np.abs(active) > tol) | (inactive_floor < -tol)
            bad[0] = False
            if not bad.any():
                break
            # argmin over (FUNCTION, GRADIENT, EQUATION) so exact ties fall
            # onto the higher-precedence branch
            stacked = np.vstack([r_func, r_grad, r_eq])
            new_regime = regime.copy()
            new_regime[bad] = (2 - np.argmin(stacked[:, bad], axis=0)).astype(np.int8)
            new_regime[0] = GRADIENT
            if pin_right:
                new_regime[-1] = FUNCTION
            elif new_regime[-1] == GRADIENT:
                new_regime[-1] = EQUATION
            if np.array_equal(new_regime, regime):
                raise ToleranceNotMet(
                    f"layer {k}: active residual {np.max(np.abs(active)):.3e}, "
                    f"inactive floor {np.min(inactive_floor):.3e}, tol {tol:.3e}")
            regime = new_regime
        else:
            raise PolicyIterationDiverged(f"layer {k}: no fixed regime in {max_iter} iterations")

        v[k] = vk
        labels[k] = _label(r_eq, r_grad, r_func, tol)
    return DualSolution(v=v, regime=labels, lattice=lattice, params=params)


@dataclass(frozen=True)
class RegimeStats:
    count: int
    max_abs: float | None
    mean_abs: float | None


@dataclass(frozen=True)
class ResidualReport:
    by_regime: dict
    max_violation: float  # worst (most negative) inactive inequality branch


def residual_report(sol: DualSolution) -> ResidualReport:
    """Region-wise complementarity residual statistics over layers tau > 0."""
    op = assemble_operator(sol.params, sol.lattice)
    q = scaled_source(sol.lattice.s_nodes, sol.params)
    buckets = {name: [] for name in REGIME_NAMES}
    violation = 0.0
    for k in range(1, sol.lattice.n_tau + 1):
        r_eq, r_grad, r_func = branch_residuals(sol.v[k], sol.v[k - 1], op, q)
        lab = sol.regime[k]
        for code, name in enumerate(REGIME_NAMES):
            mask = lab == code
            if mask.any():
                branch = (r_eq, r_grad, r_func)[code]
                buckets[name].append(np.abs(branch[mask]))
        viol_g = np.min(r_grad[r_grad < _BIG], initial=0.0)
        viol_f = np.min(r_func, initial=0.0)
        violation = min(violation, viol_g, viol_f)
    by_regime = {}
    for name, chunks in buckets.items():
        if chunks:
            allv = np.concatenate(chunks)
            by_regime[name] = RegimeStats(allv.size, float(allv.max()), float(allv.mean()))
        else:
            by_regime[name] = RegimeStats(0, None, None)
    return ResidualReport(by_regime=by_regime, max_violation=float(violation))


def penalty_cross_check(params: ModelParams, lattice: Lattice, eps: float,
                        *, max_newton: int = 100) -> DualSolution:
    """Penalized semilinear solve: both constraints replaced by 1/eps sources.

    Solves (v - vprev)/dtau - L_s v + q - (1/eps) max(D_s v, 0)
    - (1/eps) max(-v, 0) = 0 per layer by semismooth Newton, where the two
    penalty terms activate exactly when -D_s v >= 0 or v >= 0 is violated.
    """
    if not 0.0 < eps <= 1e-3:
        raise ValueError(f"eps must lie in (0, 1e-3], got {eps}")
    op = assemble_operator(params, lattice)
    dc = derived_constants(params)
    n_s, n_tau = lattice.n_s, lattice.n_tau
    ds, dtau = lattice.ds, lattice.dtau
    q = scaled_source(lattice.s_nodes, params)
    tol_newton = 1e-10 * (1.0 / dtau + dc.a0) * dc.v0

    v = np.empty((n_tau + 1, n_s))
    labels = np.empty((n_tau + 1, n_s), dtype=np.int8)
    v[0] = dc.v0
    labels[0] = GRADIENT

    def residual(vk, vprev):
        dsv = np.zeros_like(vk)
        dsv[:-1] = (vk[1:] - vk[:-1]) / ds
        pen_grad = np.maximum(dsv, 0.0)
        pen_func = np.maximum(-vk, 0.0)
        F = op.apply(vk) - vprev / dtau + q - (pen_grad + pen_func) / eps
        # left edge: exact zero one-sided derivative
        F[0] = (vk[0] - vk[1]) / ds
        return F, dsv

    for k in range(1, n_tau + 1):
        vprev = v[k - 1]
        vk = vprev.copy()
        for _ in range(max_newton):
            F, dsv = residual(vk, vprev)
            if np.max(np.abs(F)) <= tol_newton:
                break
            lower = op.lower.copy()
            diag = op.diag.copy()
            upper = op.upper.copy()
            act_g = dsv > 0.0
            act_g[-1] = False
            diag[act_g] += 1.0 / (eps * ds)
            upper[act_g] -= 1.0 / (eps * ds)
            diag[vk < 0.0] += 1.0 / eps
            lower[0], diag[0], upper[0] = 0.0, 1.0 / ds, -1.0 / ds
            vk = vk + banded_solve(lower, diag, upper, -F)
        else:
            raise NewtonDiverged(f"layer {k}: penalty Newton stalled (eps={eps})")
        v[k] = vk
        r_eq, r_grad, r_func = branch_residuals(vk, vprev, op, q)
        stacked = np.vstack([r_func, r_grad, r_eq])
        labels[k] = (2 - np.argmin(stacked, axis=0)).astype(np.int8)
        labels[k, 0] = GRADIENT
    return DualSolution(v=v, regime=labels, lattice=lattice, params=params)
