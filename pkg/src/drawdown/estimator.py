"""Scikit-learn style wrapper around the solver pipeline.

``fit`` runs the dual solve, boundary extraction and primal reconstruction;
``predict`` evaluates the feedback controls on rows of (omega, t).  The
class follows the estimator contract (``get_params`` / ``set_params``) so it
composes with the wider ecosystem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .boundary import compute_boundaries
from .dual_solver import solve_v
from .lattice import GridConfig, build_lattice
from .model import validate_params
from .primal import dual_to_primal, value_V


class DrawdownPolicySolver(BaseEstimator):
    """Finite-horizon consumption-investment policy under a drawdown constraint.

    Parameters mirror the model constants plus grid resolution.  After
    ``fit`` the attributes ``solution_``, ``boundaries_`` and ``policy_``
    hold the dual solution, the free boundaries and the primal policy.
    """

    def __init__(self, mu=0.06, sigma=0.2, delta=0.6, p=0.5, alpha=0.5, T=1.0,
                 n_s=1200, n_tau=600, right_boundary="auto"):
        self.mu = mu
        self.sigma = sigma
        self.delta = delta
        self.p = p
        self.alpha = alpha
        self.T = T
        self.n_s = n_s
        self.n_tau = n_tau
        self.right_boundary = right_boundary

    def fit(self, X=None, y=None):
        """Solve the model. X and y are ignored (no data is fitted)."""
        params = validate_params({
            "mu": self.mu, "sigma": self.sigma, "delta": self.delta,
            "p": self.p, "alpha": self.alpha, "T": self.T,
        })
        lattice = build_lattice(params, GridConfig(
            n_s=self.n_s, n_tau=self.n_tau, right_boundary=self.right_boundary))
        self.params_ = params
        self.lattice_ = lattice
        self.solution_ = solve_v(params, lattice)
        self.boundaries_ = compute_boundaries(self.solution_)
        self.policy_ = dual_to_primal(self.solution_, self.boundaries_)
        return self

    def predict(self, X):
        """Feedback controls for rows (omega, t): returns columns (c_hat, pi_hat)."""
        if not hasattr(self, "policy_"):
            raise RuntimeError("call fit() before predict()")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise ValueError("expected an (n, 2) array of (omega, t) rows")
        out = np.empty_like(X)
        for i, (omega, t) in enumerate(X):
            out[i, 0] = self.policy_.c_hat(omega, float(t))
            out[i, 1] = self.policy_.pi_hat(omega, float(t))
        return out

    def value(self, x, z, t):
        """Value function V(x, z, t) of the fitted model."""
        if not hasattr(self, "policy_"):
            raise RuntimeError("call fit() before value()")
        return value_V(x, z, t, self.policy_)
