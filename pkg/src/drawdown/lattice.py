"""Truncated log-dual space-time grid and the discrete operator in s.

The grid is uniform in s with the kink points s = 0 and s = -p ln(alpha)
snapped onto nodes (spacing is adjusted downward to achieve this), and
uniform in backward time tau with dtau = T / n_tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import BadRange, GridTooCoarse
from .model import ModelParams, derived_constants


@dataclass(frozen=True)
class GridConfig:
    n_s: int = 1200
    n_tau: int = 600
    s_min: float | None = None
    s_max: float | None = None
    right_boundary: str = "auto"  # "auto" or "dirichlet_zero"

    @staticmethod
    def from_mapping(kv: dict) -> "GridConfig":
        kwargs = {}
        for key in ("n_s", "n_tau"):
            if key in kv:
                kwargs[key] = int(kv[key])
        for key in ("s_min", "s_max"):
            if key in kv:
                kwargs[key] = float(kv[key])
        if "right_boundary" in kv:
            kwargs["right_boundary"] = str(kv["right_boundary"])
        return GridConfig(**kwargs)


@dataclass(frozen=True)
class Lattice:
    s_min: float
    s_max: float
    n_s: int
    ds: float
    n_tau: int
    dtau: float
    s_nodes: np.ndarray = field(repr=False)
    tau_nodes: np.ndarray = field(repr=False)
    right_boundary: str = "auto"


def build_lattice(params: ModelParams, config: GridConfig | None = None) -> Lattice:
    """Build the uniform grid; defaults cover the kink interval with wide margins.

    Default range: s_min = -max(6, 4 s_alpha), s_max = s_alpha + max(8, 6 s_alpha).
    Requested n_s is a lower bound: ds is shrunk so that 0 and s_alpha land on
    nodes, which may add a few nodes at either end.
    """
    cfg = config or GridConfig()
    if cfg.n_s < 16 or cfg.n_tau < 4:
        raise GridTooCoarse(f"need n_s >= 16 and n_tau >= 4, got {cfg.n_s}, {cfg.n_tau}")
    if cfg.right_boundary not in ("auto", "dirichlet_zero"):
        raise BadRange(f"unknown right_boundary {cfg.right_boundary!r}")

    s_alpha = derived_constants(params).s_alpha
    s_min = cfg.s_min if cfg.s_min is not None else -max(6.0, 4.0 * s_alpha)
    s_max = cfg.s_max if cfg.s_max is not None else s_alpha + max(8.0, 6.0 * s_alpha)
    if s_min >= 0.0:
        raise BadRange(f"s_min must be negative, got {s_min}")
    if s_max <= s_alpha:
        raise BadRange(f"s_max must exceed s_alpha={s_alpha}, got {s_max}")

    # Snap: ds divides s_alpha exactly, grid anchored at s = 0.
    ds0 = (s_max - s_min) / (cfg.n_s - 1)
    m = max(1, math.ceil(s_alpha / ds0 - 1e-12))
    ds = s_alpha / m
    n_left = max(1, math.ceil(-s_min / ds - 1e-12))
    n_right = max(m + 1, math.ceil(s_max / ds - 1e-12))
    n_s = n_left + n_right + 1
    s_nodes = (np.arange(n_s) - n_left) * ds

    dtau = params.T / cfg.n_tau
    tau_nodes = np.linspace(0.0, params.T, cfg.n_tau + 1)
    return Lattice(
        s_min=float(s_nodes[0]),
        s_max=float(s_nodes[-1]),
        n_s=n_s,
        ds=ds,
        n_tau=cfg.n_tau,
        dtau=dtau,
        s_nodes=s_nodes,
        tau_nodes=tau_nodes,
        right_boundary=cfg.right_boundary,
    )


@dataclass(frozen=True)
class DiscreteOperator:
    """Banded rows of the implicit-Euler matrix I/dtau - L_s.

    L_s v = kappa v_ss - a1 v_s - a0 v.  Diffusion is central-differenced,
    the first-order term upwinded by the sign of a1 (coefficient of v_s is
    -a1, so a1 > 0 transports leftward and uses the forward difference).
    Boundary rows drop the diffusion term and keep only the upwind-feasible
    part of the convection, so every row is an M-matrix row.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    kappa: float
    a1: float
    a0: float
    ds: float
    dtau: float

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.upper[:-1] * v[1:]
        out[1:] += self.lower[1:] * v[:-1]
        return out


def assemble_operator(params: ModelParams, lattice: Lattice) -> DiscreteOperator:
    dc = derived_constants(params)
    n, ds, dtau = lattice.n_s, lattice.ds, lattice.dtau
    kappa, a1, a0 = dc.kappa, dc.a1, dc.a0

    diag = np.full(n, 1.0 / dtau + a0)
    lower = np.zeros(n)
    upper = np.zeros(n)

    # Row action: v/dtau - kappa*D2 v + a1*D1 v + a0*v, D1 upwinded on sign(a1).
    b = a1
    diag[1:-1] += 2.0 * kappa / ds**2 + abs(b) / ds
    lower[1:-1] = -kappa / ds**2 - (max(b, 0.0)) / ds
    upper[1:-1] = -kappa / ds**2 - (max(-b, 0.0)) / ds

    # Boundary closures: diffusion dropped, convection only where the upwind
    # neighbour exists.
    if b < 0.0:  # forward difference, needs the right neighbour
        diag[0] += -b / ds
        upper[0] = b / ds
    elif b > 0.0:  # backward difference, needs the left neighbour
        diag[-1] += b / ds
        lower[-1] = -b / ds
    return DiscreteOperator(
        lower=lower, diag=diag, upper=upper,
        kappa=kappa, a1=a1, a0=a0, ds=ds, dtau=dtau,
    )


def banded_solve(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                 rhs: np.ndarray) -> np.ndarray:
    """Solve the tridiagonal system with the (lower, diag, upper) rows."""
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)
