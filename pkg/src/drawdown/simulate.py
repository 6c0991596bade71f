"""Monte Carlo verification of the synthesized feedback policy.

Simulates the controlled wealth / running-maximum pair by Euler-Maruyama
with the reference level reflected at the moving threshold omega*(t), and
compares realized discounted utility against the PDE value.  Challenger
policies (admissible but suboptimal feedback rules) provide one-sided
sanity bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InadmissibleChallenger, UnstableStep
from .primal import PrimalPolicy, value_V


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    dt: float = 1e-3
    seed: int = 0
    x0: float = 1.0
    z0: float = 1.0
    t0: float = 0.0
    antithetic: bool = True
    record_paths: bool = False

    def validate(self, policy: PrimalPolicy) -> None:
        dtau = policy.tau[1] - policy.tau[0]
        if self.n_paths < 100:
            raise ValueError(f"n_paths must be >= 100, got {self.n_paths}")
        if not 0.0 < self.dt <= dtau + 1e-15:
            raise ValueError(f"dt must lie in (0, dtau={dtau}], got {self.dt}")
        if not 0.0 <= self.t0 < policy.params.T:
            raise ValueError(f"t0 must lie in [0, T), got {self.t0}")
        if self.x0 < 0.0 or self.z0 <= 0.0:
            raise ValueError("need x0 >= 0 and z0 > 0")


@dataclass(frozen=True)
class SimResult:
    mean_utility: float
    std_error: float
    bankruptcy_fraction: float
    mean_terminal_wealth: float
    diagnostics: dict = field(default_factory=dict)
    paths_summary: list | None = None


@dataclass(frozen=True)
class Challenger:
    """An admissible feedback rule: fractions of the running maximum."""
    name: str
    c_fn: object   # (omega_array, t) -> consumption fraction in [alpha, 1]
    pi_fn: object  # (omega_array, t) -> investment fraction >= 0


def merton_fraction(params) -> float:
    return params.mu / (params.p * params.sigma**2)


def default_challengers(params) -> list:
    """The two built-in suboptimal rules: consume the drawdown floor or the
    full reference level, both investing the Merton fraction of wealth."""
    m = merton_fraction(params)
    alpha = params.alpha
    return [
        Challenger("floor_consumption_merton",
                   lambda omega, t, a=alpha: np.full_like(np.asarray(omega, dtype=float), a),
                   lambda omega, t, m=m: m * np.asarray(omega, dtype=float)),
        Challenger("peak_consumption_merton",
                   lambda omega, t: np.ones_like(np.asarray(omega, dtype=float)),
                   lambda omega, t, m=m: m * np.asarray(omega, dtype=float)),
    ]


def _policy_fns(policy: PrimalPolicy):
    grid = policy.omega_grid

    def c_fn(omega, t):
        return np.interp(omega, grid, policy._blend(policy.c_tab, t))

    def pi_fn(omega, t):
        return np.interp(omega, grid, policy._blend(policy.pi_tab, t))

    return c_fn, pi_fn


def _run(policy: PrimalPolicy, cfg: SimConfig, c_fn, pi_fn, *,
         reflect: bool, check_admissible: bool) -> SimResult:
    params = policy.params
    p, alpha, mu, sigma, delta, T = (params.p, params.alpha, params.mu,
                                     params.sigma, params.delta, params.T)
    n_steps = max(1, round((T - cfg.t0) / cfg.dt))
    dt = (T - cfg.t0) / n_steps
    sqdt = math.sqrt(dt)

    if cfg.antithetic:
        n_half = (cfg.n_paths + 1) // 2
        n = 2 * n_half
    else:
        n_half = cfg.n_paths
        n = cfg.n_paths

    rng = np.random.Generator(np.random.Philox(key=cfg.seed))

    X = np.full(n, float(cfg.x0))
    z = np.full(n, float(cfg.z0))
    alive = X > 0.0
    util = np.zeros(n)
    bankrupt_time = np.full(n, np.inf)
    max_boundary_gap = -np.inf  # max of (X/z - omega*) minus the step slack
    prev_abs_dx = np.full(n, np.inf)  # skip the slack check on the first step
    prev_star = None

    t = cfg.t0
    for step in range(n_steps):
        star = policy.omega_star_at(t)
        if reflect:
            # slack: the previous step's wealth move plus any downward drift
            # of the boundary itself since the last reflection
            drift = 0.0 if prev_star is None else max(prev_star - star, 0.0)
            gap = np.where(alive, X / z - star - drift - 2.0 * prev_abs_dx / z,
                           -np.inf)
            if gap.size:
                max_boundary_gap = max(max_boundary_gap, float(np.max(gap)))
            z = np.maximum(z, np.where(alive, X / star, z))
            prev_star = star
        omega = np.where(alive, X / z, 0.0)
        chat = np.asarray(c_fn(omega, t), dtype=float)
        pihat = np.asarray(pi_fn(omega, t), dtype=float)
        if check_admissible:
            live = alive
            if np.any(chat[live] < alpha - 1e-9) or np.any(chat[live] > 1.0 + 1e-9):
                raise InadmissibleChallenger(
                    f"consumption fraction outside [{alpha}, 1] at t={t:.6g}")
        c = z * chat
        pi = z * pihat

        disc = math.exp(-delta * (t - cfg.t0))
        util += np.where(alive, disc * c ** (1.0 - p) / (1.0 - p) * dt, 0.0)

        xi = rng.standard_normal(n_half)
        noise = np.concatenate([xi, -xi])[:n] if cfg.antithetic else xi
        dX = (mu * pi - c) * dt + sigma * pi * sqdt * noise
        # scale by max(X, z): paths about to go bankrupt legitimately move by
        # multiples of their (tiny) remaining wealth within one step
        rel = np.abs(dX[alive]) / np.maximum(X[alive], z[alive])
        if rel.size and np.max(rel) > 10.0:
            raise UnstableStep(f"step at t={t:.6g} moved wealth by x{np.max(rel):.1f}; reduce dt")
        X = np.where(alive, X + dX, X)
        prev_abs_dx = np.where(alive, np.abs(dX), 0.0)

        died = alive & (X <= 0.0)
        bankrupt_time[died] = t + dt
        X[died] = 0.0
        alive = alive & ~died
        t = cfg.t0 + (step + 1) * dt

    disc_T = math.exp(-delta * (T - cfg.t0))
    util += np.where(alive, disc_T * X ** (1.0 - p) / (1.0 - p), 0.0)

    if cfg.antithetic:
        pair_means = 0.5 * (util[:n_half] + util[n_half:])
        mean = float(np.mean(pair_means))
        sem = float(np.std(pair_means, ddof=1) / math.sqrt(n_half))
    else:
        mean = float(np.mean(util))
        sem = float(np.std(util, ddof=1) / math.sqrt(n))

    summary = None
    if cfg.record_paths:
        summary = [(i, float(min(bankrupt_time[i], T)), float(util[i])) for i in range(n)]
    return SimResult(
        mean_utility=mean,
        std_error=sem,
        bankruptcy_fraction=float(np.mean(~alive)),
        mean_terminal_wealth=float(np.mean(X)),
        diagnostics={"n_paths": n, "n_steps": n_steps, "dt": dt,
                     "max_boundary_gap": max_boundary_gap},
        paths_summary=summary,
    )


def simulate_policy(policy: PrimalPolicy, cfg: SimConfig) -> SimResult:
    """Simulate the synthesized optimal feedback policy with boundary reflection."""
    cfg.validate(policy)
    c_fn, pi_fn = _policy_fns(policy)
    return _run(policy, cfg, c_fn, pi_fn, reflect=True, check_admissible=False)


@dataclass(frozen=True)
class GapEstimate:
    gap: float
    std_error: float
    mc_mean: float
    pde_value: float


def estimate_gap(policy: PrimalPolicy, cfg: SimConfig) -> GapEstimate:
    """Signed gap (MC mean - V) of the simulated policy at the start point."""
    res = simulate_policy(policy, cfg)
    v = float(value_V(cfg.x0, cfg.z0, cfg.t0, policy))
    return GapEstimate(gap=res.mean_utility - v, std_error=res.std_error,
                       mc_mean=res.mean_utility, pde_value=v)


def run_challengers(policy: PrimalPolicy, cfg: SimConfig,
                    challengers: list | None = None) -> list:
    """Comparison table: the optimal policy row followed by each challenger.

    Each row is (name, mc_mean, std_error, gap_to_V).  Challengers run
    without reflection (their consumption never raises the running maximum)
    and with admissibility checks on the emitted fractions.
    """
    cfg.validate(policy)
    v = float(value_V(cfg.x0, cfg.z0, cfg.t0, policy))
    rows = []
    opt = simulate_policy(policy, cfg)
    rows.append(("optimal", opt.mean_utility, opt.std_error, opt.mean_utility - v))
    for ch in challengers or []:
        res = _run(policy, cfg, ch.c_fn, ch.pi_fn, reflect=False, check_admissible=True)
        rows.append((ch.name, res.mean_utility, res.std_error, res.mean_utility - v))
    return rows


def simresult_to_csv(result: SimResult, path: str, cfg: SimConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n_paths={cfg.n_paths} dt={cfg.dt:.17g} seed={cfg.seed}"
                 f" x0={cfg.x0:.17g} z0={cfg.z0:.17g} t0={cfg.t0:.17g}\n")
        fh.write("mean_utility,std_error,bankruptcy_fraction,mean_terminal_wealth\n")
        fh.write(f"{result.mean_utility:.17g},{result.std_error:.17g},"
                 f"{result.bankruptcy_fraction:.17g},{result.mean_terminal_wealth:.17g}\n")
        if result.paths_summary is not None:
            fh.write("path_id,stop_time,payoff\n")
            for pid, stop, payoff in result.paths_summary:
                fh.write(f"{pid},{stop:.17g},{payoff:.17g}\n")
