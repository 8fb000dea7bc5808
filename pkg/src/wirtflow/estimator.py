"""Scikit-learn style estimator wrapping the gradient descent solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .linalg import MeasurementFrame
from .losses import make_loss
from .solver import SolverConfig, solve
from .validation import as_complex_matrix, as_count_vector

__all__ = ["WirtingerDescent"]


class WirtingerDescent(BaseEstimator):
    """Phase retrieval from photon counts by Wirtinger gradient descent.

    Recovers a complex vector x from counts ``y_i`` observed for the
    intensities ``|<a_i, x>|^2`` of a known measurement frame. The loss
    family, step-size policy and initialization are hyperparameters; with
    the default ``step_mode="theorem_constant"`` the step size is the
    largest one certified to decrease the loss in every iteration.

    Parameters
    ----------
    loss : str, default="zero_adapted"
        Loss kind: "poisson_reg", "poisson_unbiased", "gaussian_lsq",
        "amplitude", "sqrt_shift", "averaging_vst" or "zero_adapted".
    eps : float, default=0.25
        Regularization shift; read by the Poisson and amplitude losses.
    c : float, default=0.25
        Shift of the "sqrt_shift" loss.
    c1, c2 : float, default=0.12 and 0.27
        Shift pair of "averaging_vst" / "zero_adapted".
    sigma_sq : float, default=0.25
        Variance of the "gaussian_lsq" loss.
    subtract_quarter : bool, default=False
        Variance-corrected variant of "sqrt_shift" (restricts the domain).
    step_mode : str, default="theorem_constant"
        "theorem_constant" (mu = 1/L), "fixed" (mu = step_size), or
        "backtracking" (Armijo; required for "gaussian_lsq").
    step_size : float or None
        Step for ``step_mode="fixed"``.
    bt_shrink, bt_growth, bt_init : float
        Backtracking controls: shrink factor in (0, 1), growth applied to
        the accepted step for the next trial, and the first trial step.
    init : str, default="spectral"
        "spectral" (power method on the count-weighted frame matrix),
        "random", or "given" (uses z0).
    z0 : array or None
        Starting point for ``init="given"``.
    max_iters : int, default=2000
    grad_tol : float or None
        Stop when the gradient norm drops below this; None resolves to
        ``1e-8 * sqrt(n)``.
    monitor_descent : bool, default=False
        Record per-iteration descent certificates (one extra gradient
        evaluation is already paid; this only toggles bookkeeping and the
        abort-on-violation behavior).
    random_state : int or None, default=0
        Seed for the spectral/random initialization.

    Attributes
    ----------
    x_ : ndarray of shape (n,)
        Recovered signal (up to a global phase, at the scale implied by
        the counts).
    n_iter_ : int
    loss_trace_, grad_norm_trace_ : ndarray
    step_size_ : float or None
        Constant step used, None for backtracking.
    stop_reason_ : str
    init_fallback_ : bool
        True when all counts were zero and a random start replaced the
        spectral one.
    solver_run_ : SolverRun
        Full trace record.
    """

    def __init__(self, loss="zero_adapted", *, eps=0.25, c=0.25, c1=0.12,
                 c2=0.27, sigma_sq=0.25, subtract_quarter=False,
                 step_mode="theorem_constant", step_size=None,
                 bt_shrink=0.5, bt_growth=2.0, bt_init=1.0,
                 init="spectral", z0=None, max_iters=2000, grad_tol=None,
                 monitor_descent=False, random_state=0):
        self.loss = loss
        self.eps = eps
        self.c = c
        self.c1 = c1
        self.c2 = c2
        self.sigma_sq = sigma_sq
        self.subtract_quarter = subtract_quarter
        self.step_mode = step_mode
        self.step_size = step_size
        self.bt_shrink = bt_shrink
        self.bt_growth = bt_growth
        self.bt_init = bt_init
        self.init = init
        self.z0 = z0
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.monitor_descent = monitor_descent
        self.random_state = random_state

    def _loss_params(self) -> dict:
        kind = self.loss
        if kind in ("poisson_reg", "poisson_unbiased", "amplitude"):
            return {"eps": self.eps}
        if kind == "gaussian_lsq":
            return {"sigma_sq": self.sigma_sq}
        if kind == "sqrt_shift":
            return {"c": self.c, "subtract_quarter": self.subtract_quarter}
        if kind in ("averaging_vst", "zero_adapted"):
            return {"c1": self.c1, "c2": self.c2}
        raise ValueError(f"unknown loss kind {self.loss!r}")

    def fit(self, X, y):
        """Fit to frame rows X (shape (m, n), complex; row i is a_i) and
        observed counts y (shape (m,))."""
        X = as_complex_matrix(np.asarray(X), "X")
        frame = MeasurementFrame(X)
        y = as_count_vector(y, frame.m, "y")
        loss = make_loss(self.loss, frame, y, **self._loss_params())
        config = SolverConfig(
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            step_mode=self.step_mode,
            step_size=self.step_size,
            bt_shrink=self.bt_shrink,
            bt_growth=self.bt_growth,
            bt_init=self.bt_init,
            init_mode=self.init,
            z0=self.z0,
            seed=self.random_state,
            monitor_descent=self.monitor_descent,
        )
        run = solve(loss, config)
        self.x_ = run.z
        self.n_iter_ = run.n_iters
        self.loss_trace_ = run.loss_trace
        self.grad_norm_trace_ = run.grad_norm_trace
        self.step_size_ = run.step_size
        self.stop_reason_ = run.stop_reason
        self.init_fallback_ = run.init_fallback
        self.solver_run_ = run
        return self

    def predict(self, X):
        """Model intensities ``|<a_i, x_>|^2`` for frame rows X."""
        if not hasattr(self, "x_"):
            raise AttributeError("estimator is not fitted yet; call fit")
        X = as_complex_matrix(np.asarray(X), "X")
        return MeasurementFrame(X).intensities(self.x_)
