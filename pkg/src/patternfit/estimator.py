"""Scikit-learn style estimator facade over the identification pipeline.

``PatternControlEstimator`` implements the usual ``fit`` / ``predict`` /
``score`` / ``get_params`` / ``set_params`` protocol (compatible with
``sklearn.base.clone`` and parameter search, without requiring scikit-learn),
so the identification composes with the wider ecosystem: ``fit`` takes an
(N, 2) array of target positions and learns the control pair; ``predict``
simulates the pattern the fitted control produces.
"""

from __future__ import annotations

import inspect
import math


from .harness import sample_uniform_positions
from .dynamics import max_speed, simulate
from .optimize import OptimizerOptions, run_optimization
from .params import Control, ForceParams
from .transport import w2_squared
from .validation import check_positions


class NotFittedError(RuntimeError):
    pass


class PatternControlEstimator:
    """Identify the control pair (theta, eta) reproducing a target pattern.

    Parameters mirror the experiment configuration; all are plain constructor
    arguments stored verbatim, as the estimator protocol requires.

    Attributes set by ``fit``: ``theta_``, ``eta_``, ``n_iter_``,
    ``converged_``, ``result_`` (the full optimization record) and
    ``final_state_`` (positions reached under the fitted control).
    """

    def __init__(self, theta0=0.5 * math.pi, eta0=1.0, dt=2.0, steps=2500,
                 alpha=270.0, beta=0.1, gamma=35.0, e_r=100.0, e_a=95.0, chi=0.2,
                 eta_min=0.9, eta_max=1.1, lambda1=1e-5, lambda2=1e-3,
                 theta_ref=0.5 * math.pi, eta_ref=1.0, eps_stop=0.05,
                 max_iterations=50, tau0=1.0, adjoint_scheme="discrete",
                 orientation="transposed", seed_init=0):
        self.theta0 = theta0
        self.eta0 = eta0
        self.dt = dt
        self.steps = steps
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.e_r = e_r
        self.e_a = e_a
        self.chi = chi
        self.eta_min = eta_min
        self.eta_max = eta_max
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.theta_ref = theta_ref
        self.eta_ref = eta_ref
        self.eps_stop = eps_stop
        self.max_iterations = max_iterations
        self.tau0 = tau0
        self.adjoint_scheme = adjoint_scheme
        self.orientation = orientation
        self.seed_init = seed_init

    # -- sklearn parameter protocol ------------------------------------------------

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    # -- core API --------------------------------------------------------------------

    def _force_params(self) -> ForceParams:
        return ForceParams(self.alpha, self.beta, self.gamma, self.e_r, self.e_a,
                           self.chi, self.eta_min, self.eta_max)

    def _options(self) -> OptimizerOptions:
        return OptimizerOptions(self.lambda1, self.lambda2, self.theta_ref, self.eta_ref,
                                self.eps_stop, self.max_iterations, self.tau0,
                                adjoint_scheme=self.adjoint_scheme,
                                orientation=self.orientation)

    def fit(self, X, y=None, initial_positions=None):
        """Identify the control reproducing the target pattern ``X`` (N, 2).

        The forward solves start from ``initial_positions`` when given,
        otherwise from a fresh uniform sample seeded with ``seed_init``.
        """
        target = check_positions(X, "target pattern")
        if initial_positions is None:
            initial_positions = sample_uniform_positions(self.seed_init, target.shape[0])
        else:
            initial_positions = check_positions(initial_positions, "initial_positions")
            if initial_positions.shape != target.shape:
                raise ValueError("initial_positions must match the target particle count")
        result = run_optimization(initial_positions, target,
                                  Control(self.theta0, self.eta0),
                                  self._force_params(), self.dt, self.steps,
                                  self._options())
        self.result_ = result
        self.theta_ = result.control.theta
        self.eta_ = result.control.eta
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.final_state_ = result.final_state.positions
        return self

    def _check_fitted(self):
        if not hasattr(self, "theta_"):
            raise NotFittedError("estimator is not fitted; call fit(X) first")

    def predict(self, X=None, seed=None):
        """Simulate the stationary pattern under the fitted control.

        ``X`` are initial positions; omitted, a uniform sample is drawn (with
        ``seed`` or ``seed_init``) of the same size as the fitted target.
        """
        self._check_fitted()
        if X is None:
            n = self.final_state_.shape[0]
            X = sample_uniform_positions(self.seed_init if seed is None else seed, n)
        else:
            X = check_positions(X, "initial positions")
        traj = simulate(X, Control(self.theta_, self.eta_), self._force_params(),
                        self.dt, self.steps)
        return traj.positions[-1]

    def score(self, X, y=None):
        """Negative squared Wasserstein-2 distance between the fitted final
        state and ``X`` (higher is better)."""
        self._check_fitted()
        target = check_positions(X, "target pattern")
        return -w2_squared(self.final_state_, target)

    def stationarity(self) -> float:
        """Maximum particle speed of the fitted final state."""
        self._check_fitted()
        return max_speed(self.final_state_, Control(self.theta_, self.eta_),
                         self._force_params())
