"""Loss families for phase retrieval from photon counts.

Every loss has the separable form ``L(z) = sum_i l_i(|inner(a_i, z)|**2)``
for per-measurement functions ``l_i`` determined by the observed counts.
Consequently the Wirtinger gradient is

    grad L(z) = sum_i l_i'(t_i) * inner(a_i, z) * a_i,   t_i = |inner(a_i, z)|**2,

which each class implements via one forward and one adjoint frame action.

``lipschitz_bound`` returns a constant L with

    (v, conj(v))* Hess(z) (v, conj(v)) <= L * |(v, conj(v))|_2^2

for all z, v, so a gradient step of size ``1/L`` decreases the loss in every
iteration. The Gaussian least-squares loss has no such constant and raises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, NoConstantBoundError
from .linalg import MeasurementFrame
from .validation import as_complex_vector, as_count_vector, check_positive

__all__ = [
    "GradEval",
    "IntensityLoss",
    "RegularizedPoissonLoss",
    "UnbiasedPoissonLoss",
    "GaussianLeastSquaresLoss",
    "AmplitudeLoss",
    "ShiftedSqrtLoss",
    "AveragingVstLoss",
    "ZeroAdaptedVstLoss",
    "LOSS_KINDS",
    "make_loss",
]

# Numerical eigenvalue routines can land a hair below the true operator
# norm; the returned curvature bound is inflated by this factor so that
# mu = 1/L stays on the certified side.
_BOUND_GUARD = 1.0 + 1e-7


@dataclass
class GradEval:
    """Loss value and Wirtinger gradient at a point."""

    value: float
    grad: np.ndarray
    per_term: np.ndarray | None = None


class IntensityLoss:
    """Base class: binds a measurement frame and observed counts."""

    kind = "abstract"

    def __init__(self, frame: MeasurementFrame, counts):
        if not isinstance(frame, MeasurementFrame):
            frame = MeasurementFrame(frame)
        self.frame = frame
        self.counts = np.array(as_count_vector(counts, frame.m), copy=True)
        self.counts.setflags(write=False)
        self._lipschitz: float | None = None

    # -- per-measurement hooks -------------------------------------------
    def _terms(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _terms_deriv(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_domain(self, t: np.ndarray, for_gradient: bool) -> None:
        pass

    def _lipschitz_impl(self) -> float:
        raise NotImplementedError

    # -- public surface ---------------------------------------------------
    def value(self, z) -> float:
        z = as_complex_vector(z, self.frame.n, "z")
        t = self.frame.intensities(z)
        self._check_domain(t, for_gradient=False)
        return float(np.sum(self._terms(t)))

    def gradient(self, z, keep_per_term: bool = False) -> GradEval:
        """Value and Wirtinger gradient in a single forward/adjoint pass."""
        z = as_complex_vector(z, self.frame.n, "z")
        fwd = self.frame.forward(z)
        t = np.abs(fwd) ** 2
        self._check_domain(t, for_gradient=True)
        terms = self._terms(t)
        grad = self.frame.adjoint(self._terms_deriv(t) * fwd)
        return GradEval(value=float(np.sum(terms)), grad=grad,
                        per_term=terms if keep_per_term else None)

    def lipschitz_bound(self) -> float:
        if self._lipschitz is None:
            self._lipschitz = self._lipschitz_impl() * _BOUND_GUARD
        return self._lipschitz

    @property
    def params(self) -> dict:
        return {}

    def label(self) -> str:
        """Canonical 'kind(param=..,..)' string for reports."""
        inner = ",".join(f"{k}={v:g}" for k, v in self.params.items()
                         if not isinstance(v, np.ndarray))
        return f"{self.kind}({inner})" if inner else self.kind

    # shared helper: largest eigenvalue of A* diag(w) A
    def _weighted_gram_norm(self, weights: np.ndarray | None = None) -> float:
        return self.frame.largest_gram_eigenvalue(weights)


class RegularizedPoissonLoss(IntensityLoss):
    """Poisson negative log-likelihood with the log argument shifted by eps:
    ``l_i(t) = t - y_i * log(t + eps)``."""

    kind = "poisson_reg"

    def __init__(self, frame, counts, eps: float = 0.25):
        super().__init__(frame, counts)
        self.eps = check_positive(eps, "eps")

    def _terms(self, t):
        return t - self.counts * np.log(t + self.eps)

    def _terms_deriv(self, t):
        return 1.0 - self.counts / (t + self.eps)

    def _lipschitz_impl(self):
        # rows of the bounding operator are scaled by sqrt(1 + y_i/(8 eps))
        weights = 1.0 + self.counts / (8.0 * self.eps)
        return self._weighted_gram_norm(weights)

    @property
    def params(self):
        return {"eps": self.eps}


class UnbiasedPoissonLoss(IntensityLoss):
    """Shifted-count variant ``l_i(t) = t - (y_i + eps) * log(t + eps)``,
    minimized exactly where the model intensities equal the counts."""

    kind = "poisson_unbiased"

    def __init__(self, frame, counts, eps: float = 0.25):
        super().__init__(frame, counts)
        self.eps = check_positive(eps, "eps")

    def _terms(self, t):
        return t - (self.counts + self.eps) * np.log(t + self.eps)

    def _terms_deriv(self, t):
        return 1.0 - (self.counts + self.eps) / (t + self.eps)

    def _lipschitz_impl(self):
        weights = 1.0 + (self.counts + self.eps) / (8.0 * self.eps)
        return self._weighted_gram_norm(weights)

    @property
    def params(self):
        return {"eps": self.eps}


class GaussianLeastSquaresLoss(IntensityLoss):
    """Plain intensity least squares ``l_i(t) = (t - y_i)^2 / (2 sigma_sq)``.

    Its curvature grows with ``|z|``, so no constant step size certifies
    descent; pair it with backtracking.
    """

    kind = "gaussian_lsq"

    def __init__(self, frame, counts, sigma_sq: float = 0.25):
        super().__init__(frame, counts)
        self.sigma_sq = check_positive(sigma_sq, "sigma_sq")

    def _terms(self, t):
        return (t - self.counts) ** 2 / (2.0 * self.sigma_sq)

    def _terms_deriv(self, t):
        return (t - self.counts) / self.sigma_sq

    def _lipschitz_impl(self):
        raise NoConstantBoundError(
            "gaussian_lsq has no constant global curvature bound; "
            "use an adaptive (backtracking) step size")

    @property
    def params(self):
        return {"sigma_sq": self.sigma_sq}


class AmplitudeLoss(IntensityLoss):
    """Regularized amplitude loss ``l_i(t) = 2 (sqrt(t + eps) - sqrt(y_i))^2``."""

    kind = "amplitude"

    def __init__(self, frame, counts, eps: float = 1e-3):
        super().__init__(frame, counts)
        self.eps = check_positive(eps, "eps")
        self._sqrt_y = np.sqrt(self.counts)

    def _terms(self, t):
        return 2.0 * (np.sqrt(t + self.eps) - self._sqrt_y) ** 2

    def _terms_deriv(self, t):
        return 2.0 * (1.0 - self._sqrt_y / np.sqrt(t + self.eps))

    def _lipschitz_impl(self):
        return 2.0 * self._weighted_gram_norm()

    @property
    def params(self):
        return {"eps": self.eps}


class ShiftedSqrtLoss(IntensityLoss):
    """Matched shifted square roots on both model and data:
    ``l_i(t) = 2 (sqrt(t + s) - sqrt(y_i + c))^2``.

    With ``subtract_quarter`` the model shift is ``s = c - 1/4`` (the
    variance-corrected mean approximation); that variant is only defined
    where ``t >= 1/4 - c`` and is rejected outside. Default is the plain
    shift ``s = c``.
    """

    kind = "sqrt_shift"

    def __init__(self, frame, counts, c: float = 0.25,
                 subtract_quarter: bool = False):
        super().__init__(frame, counts)
        self.c = check_positive(c, "c")
        self.subtract_quarter = bool(subtract_quarter)
        self._shift = self.c - 0.25 if self.subtract_quarter else self.c
        self._sqrt_yc = np.sqrt(self.counts + self.c)

    def _check_domain(self, t, for_gradient):
        if self._shift > 0:
            return
        lo = -self._shift
        # value is defined down to t = lo; the derivative is singular there
        bad = (t + self._shift <= 0) if for_gradient else (t < lo)
        if np.any(bad):
            i = int(np.argmax(bad))
            what = "gradient" if for_gradient else "value"
            raise DomainError(
                f"sqrt_shift(c={self.c:g}, subtract_quarter="
                f"{self.subtract_quarter}) {what} undefined at measurement "
                f"{i}: |<a_i,z>|^2 = {t[i]:.3e}, boundary {lo:.3e}")

    def _terms(self, t):
        return 2.0 * (np.sqrt(t + self._shift) - self._sqrt_yc) ** 2

    def _terms_deriv(self, t):
        return 2.0 * (1.0 - self._sqrt_yc / np.sqrt(t + self._shift))

    def _lipschitz_impl(self):
        if self._shift <= 0:
            raise NoConstantBoundError(
                "sqrt_shift needs a strictly positive model shift for a "
                f"constant curvature bound (shift = {self._shift:g}); "
                "increase c or disable subtract_quarter")
        return 2.0 * self._weighted_gram_norm()

    @property
    def params(self):
        return {"c": self.c, "subtract_quarter": int(self.subtract_quarter)}


class AveragingVstLoss(IntensityLoss):
    """Averaged shifted-sqrt loss
    ``l_i(t) = 1/2 (sqrt(t + c1) + sqrt(t + c2) - C_i)^2``.

    By default ``C_i = sqrt(y_i + c1) + sqrt(y_i + c2)`` (the transformed
    counts); any nonnegative scalar or per-measurement array may be supplied
    via ``target``.
    """

    kind = "averaging_vst"

    def __init__(self, frame, counts, c1: float = 0.12, c2: float = 0.27,
                 target=None):
        super().__init__(frame, counts)
        self.c1 = check_positive(c1, "c1")
        self.c2 = check_positive(c2, "c2")
        if self.c2 < self.c1:
            raise ValueError(f"need c1 <= c2, got c1={c1}, c2={c2}")
        self.target = target
        if target is None:
            self._targets = (np.sqrt(self.counts + self.c1)
                             + np.sqrt(self.counts + self.c2))
        else:
            arr = np.asarray(target, dtype=np.float64)
            if arr.ndim == 0:
                arr = np.full(frame.m, float(arr))
            self._targets = as_count_vector(arr, frame.m, "target")

    def _terms(self, t):
        gap = np.sqrt(t + self.c1) + np.sqrt(t + self.c2) - self._targets
        return 0.5 * gap ** 2

    def _terms_deriv(self, t):
        s1 = np.sqrt(t + self.c1)
        s2 = np.sqrt(t + self.c2)
        return 0.5 * (s1 + s2 - self._targets) * (1.0 / s1 + 1.0 / s2)

    def _lipschitz_impl(self):
        factor = 0.5 * (3.0 + np.sqrt(self.c2 / self.c1))
        return factor * self._weighted_gram_norm()

    @property
    def params(self):
        return {"c1": self.c1, "c2": self.c2}


class ZeroAdaptedVstLoss(AveragingVstLoss):
    """Averaged shifted-sqrt loss with the exact Poisson term for zero
    counts: where ``y_i = 0`` the summand is plainly ``t`` (no transform)."""

    kind = "zero_adapted"

    def __init__(self, frame, counts, c1: float = 0.12, c2: float = 0.27,
                 target=None):
        super().__init__(frame, counts, c1=c1, c2=c2, target=target)
        self._positive = self.counts > 0

    def _terms(self, t):
        return np.where(self._positive, super()._terms(t), t)

    def _terms_deriv(self, t):
        return np.where(self._positive, super()._terms_deriv(t), 1.0)

    # curvature bound: the zero-count terms contribute factor 1, dominated
    # by the averaging factor (>= 2), so the parent bound applies unchanged.


LOSS_KINDS = {
    cls.kind: cls
    for cls in (RegularizedPoissonLoss, UnbiasedPoissonLoss,
                GaussianLeastSquaresLoss, AmplitudeLoss, ShiftedSqrtLoss,
                AveragingVstLoss, ZeroAdaptedVstLoss)
}


def make_loss(kind: str, frame, counts, **params) -> IntensityLoss:
    """Instantiate a loss by its kind tag (see :data:`LOSS_KINDS`)."""
    try:
        cls = LOSS_KINDS[kind]
    except KeyError:
        raise ValueError(
            f"unknown loss kind {kind!r}; expected one of "
            f"{sorted(LOSS_KINDS)}") from None
    return cls(frame, counts, **params)
