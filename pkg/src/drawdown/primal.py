"""Primal value function, wealth-ratio thresholds and feedback controls.

The dual solution v(s,tau) is mapped through u(y,t) = e^((p-1)/p s) v(s,tau)
with y = e^s, t = T - tau.  The marginal-value inverse I(y,t) = -du/dy is
inverted per layer to produce U(omega,t), its omega-derivative (= y), the
thresholds omega*(t) >= omega_1(t) > omega_alpha(t), and evaluable feedback
maps for consumption and investment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundarySet
from .dual_solver import DualSolution
from .errors import CrossCheckFailed, NonConvexDual, OutOfDomain
from .model import ModelParams, derived_constants


def _dual_tables(sol: DualSolution):
    """Per-layer arrays of u, I = -du/dy and d2u/dy2 on the s-grid."""
    lat = sol.lattice
    s, ds = lat.s_nodes, lat.ds
    c = (1.0 - sol.params.p) / sol.params.p
    ut = np.exp(-c * s)[None, :] * sol.v          # tilde-u per layer
    dut = np.empty_like(ut)
    dut[:, 1:-1] = (ut[:, 2:] - ut[:, :-2]) / (2.0 * ds)
    dut[:, 0] = (ut[:, 1] - ut[:, 0]) / ds
    dut[:, -1] = (ut[:, -1] - ut[:, -2]) / ds
    d2ut = np.empty_like(ut)
    d2ut[:, 1:-1] = (ut[:, 2:] - 2.0 * ut[:, 1:-1] + ut[:, :-2]) / ds**2
    d2ut[:, 0] = d2ut[:, 1]
    d2ut[:, -1] = d2ut[:, -2]
    es = np.exp(s)
    I = -dut / es[None, :]
    d2u = (d2ut - dut) / es[None, :] ** 2
    return ut, I, d2u


def _usable_count(lattice, Z_k: float) -> int:
    """Number of leading s-nodes strictly left of Z (all nodes if Z = +inf)."""
    if not np.isfinite(Z_k):
        return lattice.n_s
    return int(np.searchsorted(lattice.s_nodes, Z_k - 1e-14))


@dataclass
class PrimalPolicy:
    params: ModelParams
    tau: np.ndarray
    t: np.ndarray                      # = T - tau, descending along layers
    omega_grid: np.ndarray
    U: np.ndarray                      # (n_layers, n_omega)
    dU: np.ndarray                     # = y at each (layer, omega)
    d2U: np.ndarray                    # second omega-derivative (negative)
    omega_star: np.ndarray
    omega_one: np.ndarray
    omega_alpha: np.ndarray
    y0: np.ndarray                     # e^Z, inf sentinel when Z off-grid
    c_tab: np.ndarray                  # feedback tables on omega_grid
    pi_tab: np.ndarray
    crosscheck: dict = field(default_factory=dict)
    # per-layer dual tables used by the feedback maps
    _y_tabs: list = field(default_factory=list, repr=False)
    _I_tabs: list = field(default_factory=list, repr=False)
    _u_tabs: list = field(default_factory=list, repr=False)
    _d2u_tabs: list = field(default_factory=list, repr=False)

    # -- layer bookkeeping ------------------------------------------------
    def _bracket(self, t: float):
        """Layer indices (k0, k1) bracketing time t and the weight on k1."""
        T = self.params.T
        if not 0.0 <= t <= T + 1e-12:
            raise OutOfDomain(f"t={t} outside [0, {T}]")
        tau = min(max(T - t, 0.0), T)
        pos = tau / (self.tau[1] - self.tau[0])
        k0 = int(np.floor(pos))
        k0 = min(k0, self.tau.size - 1)
        k1 = min(k0 + 1, self.tau.size - 1)
        return k0, k1, pos - k0

    def _blend(self, table: np.ndarray, t: float) -> np.ndarray:
        k0, k1, wt = self._bracket(t)
        return (1.0 - wt) * table[k0] + wt * table[k1]

    def omega_star_at(self, t: float) -> float:
        k0, k1, wt = self._bracket(t)
        return float((1.0 - wt) * self.omega_star[k0] + wt * self.omega_star[k1])

    # -- evaluable maps ----------------------------------------------------
    def y_of_omega(self, omega, t: float):
        """Marginal value y = dU/domega at (omega, t) via the dual tables."""
        k0, k1, wt = self._bracket(t)
        out = 0.0
        for k, weight in ((k0, 1.0 - wt), (k1, wt)):
            if weight == 0.0 and k != k0:
                continue
            I = self._I_tabs[k]
            y = self._y_tabs[k]
            out = out + weight * np.interp(omega, I[::-1], y[::-1])
        return out

    def c_hat(self, omega, t: float):
        """Consumption fraction of the running maximum, clamped to [alpha, 1]."""
        y = self.y_of_omega(omega, t)
        raw = np.asarray(y, dtype=float) ** (-1.0 / self.params.p)
        return np.clip(raw, self.params.alpha, 1.0)

    def pi_hat(self, omega, t: float):
        """Investment per unit of the running maximum: (mu/sigma^2) y u_yy(y)."""
        k0, k1, wt = self._bracket(t)
        mu_s2 = self.params.mu / self.params.sigma**2
        out = 0.0
        for k, weight in ((k0, 1.0 - wt), (k1, wt)):
            if weight == 0.0 and k != k0:
                continue
            I = self._I_tabs[k]
            y = self._y_tabs[k]
            yw = np.interp(omega, I[::-1], y[::-1])
            d2u = np.interp(yw, self._y_tabs[k], self._d2u_tabs[k])
            out = out + weight * mu_s2 * yw * np.maximum(d2u, 0.0)
        return out

    def U_at(self, omega, t: float):
        k0, k1, wt = self._bracket(t)
        out = 0.0
        for k, weight in ((k0, 1.0 - wt), (k1, wt)):
            if weight == 0.0 and k != k0:
                continue
            I = self._I_tabs[k]
            y = self._y_tabs[k]
            yw = np.interp(omega, I[::-1], y[::-1])
            uw = np.interp(yw, y, self._u_tabs[k])
            out = out + weight * (uw + np.asarray(omega) * yw)
        return out


def _default_omega_grid(omega_alpha0: float, omega_star0: float, n: int = 400) -> np.ndarray:
    return np.geomspace(1e-3 * omega_alpha0, 2.0 * omega_star0, n)


def boundary_omega_star(bset: BoundarySet, sol: DualSolution,
                        *, rel_tol: float = 0.05):
    """Threshold omega*(t) from the closed form in (S, phi), with the dual
    cross-check -du/dy at y = e^S recorded per layer.

    Returns (omega_star, crosscheck_values, relative_gaps), all indexed by
    tau-layer.  Raises CrossCheckFailed when interior layers disagree by
    more than rel_tol.
    """
    params = sol.params
    p = params.p
    lat = sol.lattice
    omega_star = (1.0 - p) / p * np.exp(-bset.S / p) * bset.phi

    _, I, _ = _dual_tables(sol)
    cross = np.empty_like(omega_star)
    for k in range(omega_star.size):
        iz = _usable_count(lat, bset.Z[k])
        cross[k] = np.interp(bset.S[k], lat.s_nodes[:iz], I[k, :iz])
    gaps = np.abs(cross - omega_star) / np.maximum(np.abs(omega_star), 1e-300)
    interior = gaps[2:]
    if interior.size and np.max(interior) > rel_tol:
        raise CrossCheckFailed(
            f"omega* analytic vs dual-derivative gap {np.max(interior):.3%} > {rel_tol:.0%}")
    return omega_star, cross, gaps


def boundary_omega_one_alpha(bset: BoundarySet, sol: DualSolution, params: ModelParams,
                             *, rel_tol: float = 0.05):
    """Thresholds omega_1(t) = -du/dy(1,t) and omega_alpha(t) = -du/dy(alpha^-p,t).

    Primary values come from interpolating the dual derivative on the grid;
    the closed forms in (phi, w, S) are evaluated alongside and their gaps
    recorded.  Returns (omega_one, omega_alpha, gaps_dict).
    """
    p, alpha = params.p, params.alpha
    dc = derived_constants(params)
    lat = sol.lattice
    s = lat.s_nodes
    _, I, _ = _dual_tables(sol)

    n_layers = lat.n_tau + 1
    omega_one = np.empty(n_layers)
    omega_alpha = np.empty(n_layers)
    ana_one = np.empty(n_layers)
    ana_alpha = np.empty(n_layers)
    for k in range(n_layers):
        iz = _usable_count(lat, bset.Z[k])
        omega_one[k] = np.interp(0.0, s[:iz], I[k, :iz])
        omega_alpha[k] = np.interp(dc.s_alpha, s[:iz], I[k, :iz])
        wk = bset.w[k]
        W = np.concatenate([[0.0], np.cumsum(0.5 * (wk[1:] + wk[:-1]) * np.diff(s))])
        W_S = np.interp(bset.S[k], s, W)
        int_to_zero = np.interp(0.0, s, W) - W_S
        int_to_salpha = np.interp(dc.s_alpha, s, W) - W_S
        w_at0 = np.interp(0.0, s, wk)
        w_at_sa = np.interp(dc.s_alpha, s, wk)
        ana_one[k] = (1.0 - p) / p * (bset.phi[k] + int_to_zero) - w_at0
        ana_alpha[k] = alpha * ((1.0 - p) / p * (bset.phi[k] + int_to_salpha) - w_at_sa)
    gap_one = np.abs(ana_one - omega_one) / np.maximum(np.abs(omega_one), 1e-300)
    gap_alpha = np.abs(ana_alpha - omega_alpha) / np.maximum(np.abs(omega_alpha), 1e-300)
    for name, gaps in (("omega_one", gap_one), ("omega_alpha", gap_alpha)):
        interior = gaps[2:]
        if interior.size and np.max(interior) > rel_tol:
            raise CrossCheckFailed(
                f"{name} analytic vs interpolated gap {np.max(interior):.3%} > {rel_tol:.0%}")
    return omega_one, omega_alpha, {"omega_one": gap_one, "omega_alpha": gap_alpha,
                                    "omega_one_analytic": ana_one,
                                    "omega_alpha_analytic": ana_alpha}


def dual_to_primal(sol: DualSolution, bset: BoundarySet,
                   omega_grid: np.ndarray | None = None,
                   *, n_omega: int = 400) -> PrimalPolicy:
    """Build the primal policy object from the dual solution and boundaries."""
    params = sol.params
    lat = sol.lattice
    p = params.p
    mu_s2 = params.mu / params.sigma**2

    ut, I, d2u = _dual_tables(sol)
    es = np.exp(lat.s_nodes)

    omega_star, cross_star, gap_star = boundary_omega_star(bset, sol)
    omega_one, omega_alpha, gaps_1a = boundary_omega_one_alpha(bset, sol, params)

    if omega_grid is None:
        omega_grid = _default_omega_grid(omega_alpha[-1], omega_star[-1], n_omega)

    n_layers = lat.n_tau + 1
    n_w = omega_grid.size
    U = np.empty((n_layers, n_w))
    dU = np.empty((n_layers, n_w))
    d2U = np.empty((n_layers, n_w))
    c_tab = np.empty((n_layers, n_w))
    pi_tab = np.empty((n_layers, n_w))
    y_tabs, I_tabs, u_tabs, d2u_tabs = [], [], [], []
    y0 = np.exp(np.minimum(bset.Z, 700.0))
    y0[~np.isfinite(bset.Z)] = np.inf

    for k in range(n_layers):
        iz = _usable_count(lat, bset.Z[k])
        iz = max(iz, 3)
        y_k = es[:iz]
        I_k = I[k, :iz].copy()
        u_k = ut[k, :iz]
        d2u_k = d2u[k, :iz]

        d2u_floor = float(np.min(d2u_k[1:-1]))
        if d2u_floor < -1e-6 * max(1.0, float(np.max(d2u_k))):
            raise NonConvexDual(
                f"layer {k}: discrete u_yy reaches {d2u_floor:.3e} on (0, y0)")

        if np.isfinite(bset.Z[k]):
            y_k = np.append(y_k, np.exp(bset.Z[k]))
            I_k = np.append(I_k, 0.0)
            u_k = np.append(u_k, 0.0)
            d2u_k = np.append(d2u_k, max(d2u_k[-1], 0.0))
        # enforce strict decrease of I along increasing y before inversion
        I_k = np.minimum.accumulate(I_k)

        yw = np.interp(omega_grid, I_k[::-1], y_k[::-1])
        uw = np.interp(yw, y_k, u_k)
        d2uw = np.maximum(np.interp(yw, y_k, d2u_k), 1e-300)
        U[k] = uw + omega_grid * yw
        dU[k] = yw
        d2U[k] = -1.0 / d2uw
        c_tab[k] = np.clip(yw ** (-1.0 / p), params.alpha, 1.0)
        pi_tab[k] = mu_s2 * yw * d2uw

        y_tabs.append(y_k)
        I_tabs.append(I_k)
        u_tabs.append(u_k)
        d2u_tabs.append(d2u_k)

    return PrimalPolicy(
        params=params,
        tau=lat.tau_nodes,
        t=params.T - lat.tau_nodes,
        omega_grid=omega_grid,
        U=U, dU=dU, d2U=d2U,
        omega_star=omega_star,
        omega_one=omega_one,
        omega_alpha=omega_alpha,
        y0=y0,
        c_tab=c_tab,
        pi_tab=pi_tab,
        crosscheck={"omega_star_dual": cross_star, "omega_star_gap": gap_star, **gaps_1a},
        _y_tabs=y_tabs, _I_tabs=I_tabs, _u_tabs=u_tabs, _d2u_tabs=d2u_tabs,
    )


# -- spec-level operation wrappers ----------------------------------------

def feedback_consumption(omega, t: float, policy: PrimalPolicy):
    """Optimal consumption fraction c*(omega,t) in [alpha, 1] on the
    continuation side omega <= omega*(t)."""
    limit = policy.omega_star_at(t)
    if np.any(np.asarray(omega) > limit * (1.0 + 1e-9)):
        raise OutOfDomain(f"omega beyond omega*({t}) = {limit}")
    return policy.c_hat(omega, t)


def feedback_investment(omega, t: float, policy: PrimalPolicy):
    """Optimal risky fraction pi*(omega,t) >= 0 on omega <= omega*(t)."""
    limit = policy.omega_star_at(t)
    if np.any(np.asarray(omega) > limit * (1.0 + 1e-9)):
        raise OutOfDomain(f"omega beyond omega*({t}) = {limit}")
    return policy.pi_hat(omega, t)


def value_V(x, z, t: float, policy: PrimalPolicy):
    """Value V(x,z,t) = z^(1-p) U(x/z, t), applying the reference jump
    z -> x/omega*(t) whenever x/z exceeds omega*(t)."""
    p = policy.params.p
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    star = policy.omega_star_at(t)
    z_eff = np.maximum(z, x / star)
    omega = np.divide(x, z_eff, out=np.zeros_like(x * 1.0), where=z_eff > 0)
    out = z_eff ** (1.0 - p) * policy.U_at(omega, t)
    out = np.where(x <= 0.0, 0.0, out)
    return out if out.ndim else float(out)


def policy_to_csv(policy: PrimalPolicy, thresholds_path: str, table_path: str) -> None:
    pr = policy.params
    meta = (f"# mu={pr.mu:.17g} sigma={pr.sigma:.17g} delta={pr.delta:.17g}"
            f" p={pr.p:.17g} alpha={pr.alpha:.17g} T={pr.T:.17g}\n")
    with open(thresholds_path, "w", encoding="utf-8") as fh:
        fh.write(meta)
        fh.write("t,omega_star,omega_one,omega_alpha\n")
        for k in range(policy.t.size - 1, -1, -1):
            fh.write(f"{policy.t[k]:.17g},{policy.omega_star[k]:.17g},"
                     f"{policy.omega_one[k]:.17g},{policy.omega_alpha[k]:.17g}\n")
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(meta)
        fh.write("t,omega,U,dU,c_star,pi_star\n")
        for k in range(policy.t.size - 1, -1, -1):
            for j, omega in enumerate(policy.omega_grid):
                fh.write(f"{policy.t[k]:.17g},{omega:.17g},{policy.U[k, j]:.17g},"
                         f"{policy.dU[k, j]:.17g},{policy.c_tab[k, j]:.17g},"
                         f"{policy.pi_tab[k, j]:.17g}\n")
