"""Variance stabilization analysis for Poisson counts.

All transforms considered here are averages of shifted square roots,

    f(k) = 1/2 * (sqrt(k + c1) + sqrt(k + c2)),

which covers the plain square root (c1 = c2 = 0), a single shifted root
(c1 = c2 = c, with c = 3/8 the Anscombe choice), the Freeman-Tukey average
(c1 = 0, c2 = 1) and general two-shift averages. The goal of every variant
is to make the variance of f(X), X ~ Poisson(lam), approximately constant
at 1/4 over the count range of interest.

Moments of f(X) are computed by summing the Poisson series directly. The
pmf follows the multiplicative recurrence p_{k+1} = p_k * lam / (k + 1),
evaluated in log space so that neither k! nor exp(-lam) over/underflows,
and is truncated once the accumulated probability mass reaches
``1 - tail`` (default tail 1e-14).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NoBracketError
from .validation import check_nonnegative, check_positive

__all__ = [
    "Transform",
    "sqrt_transform",
    "shifted_sqrt",
    "anscombe",
    "tukey_freeman",
    "averaging",
    "make_transform",
    "MomentReport",
    "transformed_moments",
    "optimal_shift",
    "variance_curve",
]

LAMBDA_MAX = 1e4


@dataclass(frozen=True)
class Transform:
    """Averaged shifted-sqrt transform, identified by its two shifts."""

    name: str
    c1: float
    c2: float

    def __post_init__(self):
        check_nonnegative(self.c1, "c1")
        check_nonnegative(self.c2, "c2")

    def __call__(self, k):
        k = np.asarray(k, dtype=np.float64)
        return 0.5 * (np.sqrt(k + self.c1) + np.sqrt(k + self.c2))


def sqrt_transform() -> Transform:
    return Transform("sqrt", 0.0, 0.0)


def shifted_sqrt(c: float) -> Transform:
    check_nonnegative(c, "c")
    return Transform(f"shifted_sqrt({c:g})", c, c)


def anscombe() -> Transform:
    return Transform("anscombe", 3.0 / 8.0, 3.0 / 8.0)


def tukey_freeman() -> Transform:
    return Transform("tukey_freeman", 0.0, 1.0)


def averaging(c1: float, c2: float) -> Transform:
    return Transform(f"averaging({c1:g},{c2:g})", c1, c2)


def make_transform(kind: str, **params) -> Transform:
    """Build a transform from its kind tag (CLI/config entry point)."""
    builders = {
        "sqrt": sqrt_transform,
        "shifted_sqrt": shifted_sqrt,
        "anscombe": anscombe,
        "tukey_freeman": tukey_freeman,
        "averaging": averaging,
    }
    try:
        builder = builders[kind]
    except KeyError:
        raise ValueError(f"unknown transform kind {kind!r}; expected one of "
                         f"{sorted(builders)}") from None
    return builder(**params)


@dataclass
class MomentReport:
    """Mean and variance of a transformed Poisson variable."""

    lam: float
    mean: float
    variance: float
    truncation_k: int
    tail_mass: float


def transformed_moments(transform: Transform, lam: float,
                        tail: float = 1e-14) -> MomentReport:
    """Mean and variance of ``transform(X)`` for ``X ~ Poisson(lam)``.

    The series is truncated once the accumulated pmf mass reaches
    ``1 - tail``; lam = 0 degenerates to the point mass at 0.
    """
    lam = check_nonnegative(lam, "lam")
    check_positive(tail, "tail")
    if lam == 0.0:
        f0 = float(transform(0.0))
        return MomentReport(lam=0.0, mean=f0, variance=0.0,
                            truncation_k=0, tail_mass=0.0)

    log_lam = math.log(lam)
    block = int(max(64, lam + 12.0 * math.sqrt(lam) + 32.0))
    mass = 0.0
    m1 = 0.0
    m2 = 0.0
    k_start = 0
    lp_last = 0.0
    # hard cap far beyond any lam <= LAMBDA_MAX requirement
    while k_start < 10_000_000:
        ks = np.arange(k_start, k_start + block, dtype=np.float64)
        if k_start == 0:
            incr = np.concatenate(([0.0], log_lam - np.log(ks[1:])))
            lp = -lam + np.cumsum(incr)
        else:
            lp = lp_last + np.cumsum(log_lam - np.log(ks))
        p = np.exp(lp)
        fv = transform(ks)
        mass += float(np.sum(p))
        m1 += float(np.sum(p * fv))
        m2 += float(np.sum(p * fv * fv))
        lp_last = lp[-1]
        k_start += block
        if mass >= 1.0 - tail:
            break
    variance = max(m2 - m1 * m1, 0.0)
    return MomentReport(lam=lam, mean=m1, variance=variance,
                        truncation_k=k_start - 1,
                        tail_mass=max(1.0 - mass, 0.0))


def optimal_shift(lam: float, tol: float = 1e-6) -> float:
    """Shift c with ``Var(sqrt(X + c)) = 1/4`` for ``X ~ Poisson(lam)``.

    Solved by bisection on c in [0, 2]: the variance is continuous and
    strictly decreasing in c there, which is re-checked numerically on a
    coarse grid before bisecting. For small lam (roughly below 0.36) the
    variance stays under 1/4 even at c = 0 and no root exists; that case
    raises :class:`NoBracketError`.
    """
    lam = check_positive(lam, "lam")
    check_positive(tol, "tol")
    if lam > LAMBDA_MAX:
        raise ValueError(f"lam = {lam:g} beyond supported maximum "
                         f"{LAMBDA_MAX:g}; the optimal shift is ~3/8 there")

    def var_at(c: float) -> float:
        return transformed_moments(shifted_sqrt(c), lam).variance

    lo, hi = 0.0, 2.0
    g_lo = var_at(lo) - 0.25
    g_hi = var_at(hi) - 0.25
    if not (g_lo > 0.0 > g_hi):
        raise NoBracketError(
            f"no root in range [0, 2] for lam = {lam:g}: variance offsets at "
            f"the ends are {g_lo:.4g} and {g_hi:.4g}")

    # runtime monotonicity guard for the bisection's validity
    grid = np.linspace(lo, hi, 9)
    values = [var_at(c) for c in grid]
    if np.any(np.diff(values) >= 0.0):
        raise RuntimeError(
            f"variance is not strictly decreasing in c on [0, 2] at "
            f"lam = {lam:g}; bisection aborted")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = var_at(mid) - 0.25
        if abs(g_mid) <= tol:
            return mid
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


def variance_curve(transform: Transform, lams) -> list[MomentReport]:
    """Transformed moments over a grid of Poisson parameters."""
    out = []
    for lam in lams:
        lam = check_positive(lam, "lam grid value")
        out.append(transformed_moments(transform, lam))
    return out
