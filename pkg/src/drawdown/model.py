"""Model constants and the closed-form scalar sources of the dual problems.

All functions here are pure and accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import parse_kv_file, section
from .errors import DiscountTooSmall, RangeError

PARAM_KEYS = ("mu", "sigma", "delta", "p", "alpha", "T")


@dataclass(frozen=True)
class ModelParams:
    """Market and preference constants.

    mu    : excess drift of the risky asset (per unit time), > 0
    sigma : volatility (per sqrt time), > 0
    delta : discount rate, must satisfy the standing lower bound
    p     : relative risk aversion, in (0, 1)
    alpha : drawdown fraction on excess consumption, in (0, 1)
    T     : horizon, > 0
    """

    mu: float
    sigma: float
    delta: float
    p: float
    alpha: float
    T: float

    @property
    def discount_bound(self) -> float:
        return self.mu**2 * (1.0 - self.p) / (2.0 * self.p * self.sigma**2) + self.p


@dataclass(frozen=True)
class DerivedConstants:
    """Coefficients of the log-dual operator and related constants.

    The operator acting in s reads  kappa*v_ss - a1*v_s - a0*v  with
    kappa = mu^2/(2 sigma^2),
    a1    = (2-p)/(2p) * mu^2/sigma^2 - delta,
    a0    = delta/p - mu^2 (1-p)/(2 p^2 sigma^2).
    s_alpha = -p ln(alpha) is the upper kink of the source, v0 = p/(1-p)
    the initial plateau value.
    """

    kappa: float
    a1: float
    a0: float
    s_alpha: float
    v0: float


def derived_constants(params: ModelParams) -> DerivedConstants:
    mu2s2 = params.mu**2 / params.sigma**2
    p = params.p
    return DerivedConstants(
        kappa=0.5 * mu2s2,
        a1=(2.0 - p) / (2.0 * p) * mu2s2 - params.delta,
        a0=params.delta / p - mu2s2 * (1.0 - p) / (2.0 * p**2),
        s_alpha=-p * math.log(params.alpha),
        v0=p / (1.0 - p),
    )


def validate_params(raw) -> ModelParams:
    """Validate a parameter record (mapping or ModelParams) and return it.

    Raises RangeError for out-of-range fields and DiscountTooSmall when the
    discount rate falls below mu^2(1-p)/(2 p sigma^2) + p.
    """
    if isinstance(raw, ModelParams):
        vals = {k: getattr(raw, k) for k in PARAM_KEYS}
    else:
        missing = [k for k in PARAM_KEYS if k not in raw]
        if missing:
            raise RangeError(f"missing parameter(s): {', '.join(missing)}")
        vals = {k: float(raw[k]) for k in PARAM_KEYS}

    for k in ("mu", "sigma", "T"):
        if not vals[k] > 0.0:
            raise RangeError(f"{k} must be positive, got {vals[k]}")
    for k in ("p", "alpha"):
        if not 0.0 < vals[k] < 1.0:
            raise RangeError(f"{k} must lie in (0, 1), got {vals[k]}")

    params = ModelParams(**vals)
    if vals["delta"] < params.discount_bound:
        raise DiscountTooSmall(
            f"delta={vals['delta']} below the standing bound {params.discount_bound}"
        )
    return params


def load_params(path: str) -> ModelParams:
    """Load parameters from a flat key-value file (keys: mu, sigma, delta, p, alpha, T).

    Section-qualified keys (``model.mu``) are accepted as well.
    """
    kv = parse_kv_file(path)
    if any(k.startswith("model.") for k in kv):
        kv = {**kv, **section(kv, "model")}
    return validate_params({k: kv[k] for k in PARAM_KEYS if k in kv})


def dual_source_f(y, params: ModelParams):
    """Piecewise source f(y) of the dual variational inequality, y > 0.

    Branches: alpha*y - alpha^(1-p)/(1-p) for y >= alpha^-p,
    -p/(1-p)*y^(1-1/p) for 1 < y < alpha^-p, and y - 1/(1-p) for y <= 1.
    Continuously differentiable across both cutoffs.
    """
    p, alpha = params.p, params.alpha
    y = np.asarray(y, dtype=float)
    y_cut = alpha ** (-p)
    upper = alpha * y - alpha ** (1.0 - p) / (1.0 - p)
    middle = -p / (1.0 - p) * y ** (1.0 - 1.0 / p)
    lower = y - 1.0 / (1.0 - p)
    out = np.where(y >= y_cut, upper, np.where(y > 1.0, middle, lower))
    return out if out.ndim else float(out)


def tilde_source(s, params: ModelParams):
    """f(e^s) on the log scale; branch cutoffs at s = 0 and s = -p ln(alpha)."""
    return dual_source_f(np.exp(np.asarray(s, dtype=float)), params)


def scaled_source(s, params: ModelParams):
    """e^((1-p)/p s) * f(e^s): the forcing entering the v-problem."""
    s = np.asarray(s, dtype=float)
    p = params.p
    out = np.exp((1.0 - p) / p * s) * tilde_source(s, params)
    return out if out.ndim else float(out)


def obstacle_source_g(s, params: ModelParams):
    """Source g(s) of the parabolic obstacle problem, g = -(e^((1-p)/p s) f(e^s))'.

    g > 0 for s < 0, g = 0 on [0, -p ln alpha], g < 0 beyond.
    """
    p, alpha = params.p, params.alpha
    s = np.asarray(s, dtype=float)
    es = np.exp(s)
    growth = np.exp((1.0 - p) / p * s)
    y_cut = alpha ** (-p)
    right = alpha / p * growth * (y_cut - es) * (es >= y_cut)
    left = 1.0 / p * growth * (1.0 - es) * (es <= 1.0)
    out = right + left
    return out if out.ndim else float(out)
