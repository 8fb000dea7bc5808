"""Wirtinger gradient descent with certified constant step sizes.

The update is ``z_{k+1} = z_k - mu * grad(z_k)``. With ``step_mode
"theorem_constant"`` the step is ``mu = 1 / L`` for the loss's constant
curvature bound L, which guarantees

    f(z_k) - f(z_{k+1}) >= mu * |grad f(z_{k+1})|_2^2

in every iteration; the solver can record that certificate per iteration
(``monitor_descent``) and aborts if it ever fails. Losses without a
constant bound (Gaussian least squares) run with Armijo backtracking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import StagnationError
from .linalg import MeasurementFrame, SpectralEstimate, complex_standard_normal, leading_eig
from .losses import IntensityLoss
from .validation import as_complex_vector, as_count_vector, check_count, check_positive

__all__ = [
    "SolverConfig",
    "SolverRun",
    "InitResult",
    "spectral_init",
    "backtracking_step",
    "solve",
]

STEP_MODES = ("theorem_constant", "fixed", "backtracking")
INIT_MODES = ("spectral", "given", "random")

# relative slack for the per-iteration descent certificate, covering
# floating-point rounding in the loss evaluation
CERT_SLACK = 1e-10

# backtracking gives up below this trial step
MIN_BT_STEP = 1e-18


@dataclass
class SolverConfig:
    """Knobs for :func:`solve`. ``grad_tol=None`` resolves to
    ``1e-8 * sqrt(n)`` at solve time."""

    max_iters: int = 2000
    grad_tol: float | None = None
    step_mode: str = "theorem_constant"
    step_size: float | None = None
    bt_shrink: float = 0.5
    bt_growth: float = 2.0
    bt_init: float = 1.0
    init_mode: str = "spectral"
    z0: np.ndarray | None = None
    seed: int | None = 0
    power_tol: float = 1e-8
    power_max_iter: int = 5000
    monitor_descent: bool = True
    keep_iterates: bool = False

    def __post_init__(self):
        check_count(self.max_iters, "max_iters")
        if self.grad_tol is not None and self.grad_tol < 0:
            raise ValueError(f"grad_tol must be >= 0, got {self.grad_tol}")
        if self.step_mode not in STEP_MODES:
            raise ValueError(f"step_mode must be one of {STEP_MODES}, "
                             f"got {self.step_mode!r}")
        if self.step_mode == "fixed":
            if self.step_size is None:
                raise ValueError("fixed step_mode needs step_size")
            check_positive(self.step_size, "step_size")
        if self.step_mode == "backtracking":
            if not 0.0 < self.bt_shrink < 1.0:
                raise ValueError(f"bt_shrink must lie in (0, 1), "
                                 f"got {self.bt_shrink}")
            if self.bt_growth < 1.0:
                raise ValueError(f"bt_growth must be >= 1, "
                                 f"got {self.bt_growth}")
            check_positive(self.bt_init, "bt_init")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, "
                             f"got {self.init_mode!r}")
        if self.init_mode == "given" and self.z0 is None:
            raise ValueError("init_mode 'given' needs z0")


@dataclass
class SolverRun:
    """Trace of one gradient descent run.

    ``loss_trace`` and ``grad_norm_trace`` are evaluated at every iterate
    including the start, so both have length ``n_iters + 1``;
    ``step_sizes`` and ``descent_certificates`` have one entry per step.
    """

    z: np.ndarray
    loss_trace: np.ndarray
    grad_norm_trace: np.ndarray
    step_sizes: np.ndarray
    stop_reason: str
    step_size: float | None = None
    descent_certificates: np.ndarray | None = None
    iterates: list | None = None
    init_fallback: bool = False

    @property
    def n_iters(self) -> int:
        return len(self.step_sizes)

    @property
    def final_loss(self) -> float:
        return float(self.loss_trace[-1])

    @property
    def final_grad_norm(self) -> float:
        return float(self.grad_norm_trace[-1])


@dataclass
class InitResult:
    """Starting point produced by :func:`spectral_init`."""

    z0: np.ndarray
    fallback: bool
    estimate: SpectralEstimate | None = field(default=None, repr=False)


def spectral_init(frame: MeasurementFrame, counts, seed: int | None = 0,
                  tol: float = 1e-8, max_iter: int = 5000) -> InitResult:
    """Power-method starting point from the count-weighted frame matrix.

    Returns ``z0 = scale * v`` where v is the unit leading eigenvector of
    ``Y = (1/m) sum_i y_i a_i a_i*`` and
    ``scale = sqrt(n * sum_i y_i / sum_i |a_i|_2^2)``. If every count is
    zero, Y vanishes and a random unit vector is returned with
    ``fallback=True``.
    """
    counts = as_count_vector(counts, frame.m)
    total = float(np.sum(counts))
    if total <= 0.0:
        rng = np.random.default_rng(seed)
        z0 = complex_standard_normal(rng, frame.n)
        z0 /= np.linalg.norm(z0)
        return InitResult(z0=z0, fallback=True)

    def apply(v):
        return frame.adjoint(counts * frame.forward(v)) / frame.m

    est = leading_eig(apply, frame.n, tol=tol, max_iter=max_iter,
                      seed=0 if seed is None else seed)
    scale = math.sqrt(frame.n * total / float(np.sum(frame.row_norms_sq)))
    return InitResult(z0=scale * est.vector, fallback=False, estimate=est)


def _armijo(loss, z, value, grad, grad_sq, mu, shrink):
    """Shrink mu until the sufficient-decrease test passes.

    Returns (z_trial, mu, trial value). A zero gradient passes at the first
    trial with z unchanged.
    """
    while mu >= MIN_BT_STEP:
        z_trial = z - mu * grad
        trial = loss.value(z_trial)
        if trial <= value - 0.5 * mu * grad_sq:
            return z_trial, mu, trial
        mu *= shrink
    raise StagnationError(
        f"backtracking step underflow below {MIN_BT_STEP:g} "
        f"(value {value:.6e}, |grad|^2 {grad_sq:.3e})")


def backtracking_step(loss: IntensityLoss, z, mu_init: float,
                      shrink: float = 0.5):
    """One Armijo-backtracked descent step; returns ``(z_next, mu_used)``."""
    check_positive(mu_init, "mu_init")
    if not 0.0 < shrink < 1.0:
        raise ValueError(f"shrink must lie in (0, 1), got {shrink}")
    z = as_complex_vector(z, loss.frame.n, "z")
    ge = loss.gradient(z)
    grad_sq = float(np.real(np.vdot(ge.grad, ge.grad)))
    z_next, mu_used, _ = _armijo(loss, z, ge.value, ge.grad, grad_sq,
                                 mu_init, shrink)
    return z_next, mu_used


def _initial_point(loss, config):
    frame = loss.frame
    if config.init_mode == "given":
        return as_complex_vector(config.z0, frame.n, "z0").copy(), False
    if config.init_mode == "random":
        rng = np.random.default_rng(config.seed)
        z0 = complex_standard_normal(rng, frame.n)
        return z0 / np.linalg.norm(z0), False
    init = spectral_init(frame, loss.counts, seed=config.seed,
                         tol=config.power_tol,
                         max_iter=config.power_max_iter)
    return init.z0, init.fallback


def solve(loss: IntensityLoss, config: SolverConfig | None = None) -> SolverRun:
    """Run Wirtinger gradient descent on a loss until the gradient norm
    drops below tolerance, the iteration budget is spent, or (when
    monitoring) a descent certificate fails."""
    if config is None:
        config = SolverConfig()
    frame = loss.frame
    grad_tol = (config.grad_tol if config.grad_tol is not None
                else 1e-8 * math.sqrt(frame.n))

    z, fallback = _initial_point(loss, config)

    mu = None
    if config.step_mode == "theorem_constant":
        mu = 1.0 / loss.lipschitz_bound()
    elif config.step_mode == "fixed":
        mu = float(config.step_size)

    ge = loss.gradient(z)
    loss_trace = [ge.value]
    grad_norms = [float(np.linalg.norm(ge.grad))]
    step_sizes: list[float] = []
    certs: list[bool] = []
    iterates = [z.copy()] if config.keep_iterates else None

    stop_reason = "max_iters"
    mu_next = config.bt_init
    for _ in range(config.max_iters):
        if grad_norms[-1] <= grad_tol:
            stop_reason = "grad_tol"
            break
        if config.step_mode == "backtracking":
            grad_sq = grad_norms[-1] ** 2
            try:
                z, mu_used, _ = _armijo(loss, z, loss_trace[-1], ge.grad,
                                        grad_sq, mu_next, config.bt_shrink)
            except StagnationError:
                stop_reason = "stagnation"
                break
            mu_next = mu_used * config.bt_growth
        else:
            mu_used = mu
            z = z - mu * ge.grad
        ge = loss.gradient(z)
        loss_trace.append(ge.value)
        grad_norms.append(float(np.linalg.norm(ge.grad)))
        step_sizes.append(mu_used)
        if iterates is not None:
            iterates.append(z.copy())
        if config.monitor_descent:
            slack = CERT_SLACK * abs(loss_trace[-2])
            if config.step_mode == "backtracking":
                ok = loss_trace[-1] <= loss_trace[-2] + slack
            else:
                decrease = loss_trace[-2] - loss_trace[-1]
                ok = decrease >= mu_used * grad_norms[-1] ** 2 - slack
            certs.append(bool(ok))
            if not ok:
                stop_reason = "descent_violation"
                break
    if stop_reason == "max_iters" and grad_norms[-1] <= grad_tol:
        stop_reason = "grad_tol"

    return SolverRun(
        z=z,
        loss_trace=np.asarray(loss_trace),
        grad_norm_trace=np.asarray(grad_norms),
        step_sizes=np.asarray(step_sizes),
        stop_reason=stop_reason,
        step_size=mu,
        descent_certificates=(np.asarray(certs, dtype=bool)
                              if config.monitor_descent else None),
        iterates=iterates,
        init_fallback=fallback,
    )
