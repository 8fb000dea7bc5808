"""Dense complex linear algebra: measurement frames and power iteration.

Conventions used everywhere in this package:

* the inner product is conjugate-linear in the first argument,
  ``inner(a, z) = sum_j conj(a_j) * z_j``;
* a frame stores its measurement vectors ``a_i`` as rows, and
  ``forward(z)_i = inner(a_i, z)``, i.e. forward action of the matrix A
  whose rows are ``a_i*``;
* ``adjoint(w) = sum_i w_i * a_i`` is the conjugate-transpose action
  ``A* w``.

With this convention the Wirtinger gradient of ``|inner(a, z)|**2`` is
``inner(a, z) * a``, which is what the descent updates in
:mod:`wirtflow.losses` rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .validation import as_complex_matrix, as_complex_vector, check_count, check_positive


def complex_standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard complex Gaussian draws: unit total variance per entry."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


class MeasurementFrame:
    """Dense collection of m measurement vectors a_i in C^n.

    Immutable after construction; forward/adjoint are pure functions of the
    stored rows, so instances can be shared freely.
    """

    def __init__(self, rows):
        rows = np.array(as_complex_matrix(rows, "rows"), copy=True)
        rows.setflags(write=False)
        self._rows = rows
        conj = rows.conj()
        conj.setflags(write=False)
        self._conj_rows = conj
        self._norm_cache: dict[tuple, "SpectralEstimate"] = {}
        self._gram_norm: float | None = None

    @property
    def rows(self) -> np.ndarray:
        """Read-only (m, n) array whose i-th row is a_i."""
        return self._rows

    @property
    def m(self) -> int:
        return self._rows.shape[0]

    @property
    def n(self) -> int:
        return self._rows.shape[1]

    @property
    def row_norms_sq(self) -> np.ndarray:
        """Per-row squared 2-norms ``|a_i|_2^2``."""
        return np.sum(np.abs(self._rows) ** 2, axis=1)

    def forward(self, z) -> np.ndarray:
        """Apply A: component i is ``inner(a_i, z)``."""
        z = as_complex_vector(z, self.n, "z")
        return self._conj_rows @ z

    def adjoint(self, w) -> np.ndarray:
        """Apply A*: returns ``sum_i w_i * a_i``."""
        w = as_complex_vector(w, self.m, "w")
        return w @ self._rows

    def intensities(self, z) -> np.ndarray:
        """Squared moduli ``|inner(a_i, z)|**2`` of the forward action."""
        fwd = self.forward(z)
        return np.abs(fwd) ** 2

    def gram_apply(self, z) -> np.ndarray:
        """Apply the PSD operator A*A."""
        return self.adjoint(self.forward(z))

    def operator_norm(self, tol: float = 1e-10, max_iter: int = 10000,
                      seed: int = 0) -> "SpectralEstimate":
        """Largest singular value of A; cached per (tol, max_iter, seed)."""
        key = (float(tol), int(max_iter), int(seed))
        if key not in self._norm_cache:
            self._norm_cache[key] = spectral_norm(self, tol=tol,
                                                  max_iter=max_iter, seed=seed)
        return self._norm_cache[key]

    def largest_gram_eigenvalue(self, weights=None) -> float:
        """Largest eigenvalue of A* diag(weights) A by dense eigendecomposition.

        At desk scale the n x n Gram matrix is cheap to form and LAPACK is
        both faster and more accurate than power iteration when the top of
        the spectrum is nearly flat (random frames at mild oversampling).
        The unweighted value is cached.
        """
        if weights is None and self._gram_norm is not None:
            return self._gram_norm
        a_mat = self._conj_rows
        scaled = a_mat if weights is None else weights[:, None] * a_mat
        gram = a_mat.conj().T @ scaled
        value = float(np.linalg.eigvalsh(gram)[-1])
        if weights is None:
            self._gram_norm = value
        return value

    def __repr__(self) -> str:
        return f"MeasurementFrame(m={self.m}, n={self.n})"


@dataclass
class SpectralEstimate:
    """Dominant eigenpair (or singular value) found by power iteration.

    ``residual`` is the absolute eigen-residual ``|Bv - lambda v|_2`` of the
    Hermitian operator B that was iterated; convergence is declared when it
    drops below ``tol * max(|lambda|, tiny)``, i.e. a relative criterion.
    For :func:`spectral_norm`, B = A*A and ``value`` is sqrt of the dominant
    eigenvalue.
    """

    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    converged: bool
    value_trace: np.ndarray = field(repr=False, default=None)


def leading_eig(hermitian_apply: Callable[[np.ndarray], np.ndarray], n: int,
                tol: float = 1e-10, max_iter: int = 10000,
                seed: int = 0) -> SpectralEstimate:
    """Dominant eigenpair of a Hermitian PSD operator given by its action.

    The start vector is a seeded complex Gaussian, so results are
    deterministic for a fixed seed. If ``max_iter`` is exhausted the best
    estimate so far is returned with ``converged=False``.
    """
    n = check_count(n, "n")
    check_positive(tol, "tol")
    check_count(max_iter, "max_iter")
    rng = np.random.default_rng(seed)
    v = complex_standard_normal(rng, n)
    v /= np.linalg.norm(v)

    tiny = np.finfo(np.float64).tiny
    trace = []
    value = 0.0
    residual = np.inf
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        w = hermitian_apply(v)
        w = as_complex_vector(w, n, "hermitian_apply(v)")
        value = float(np.real(np.vdot(v, w)))
        residual = float(np.linalg.norm(w - value * v))
        trace.append(value)
        if residual <= tol * max(abs(value), tiny):
            converged = True
            break
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # operator annihilates the iterate: 0 is an exact eigenvalue
            value, residual, converged = 0.0, 0.0, True
            break
        v = w / norm_w
    return SpectralEstimate(value=value, vector=v, iterations=iterations,
                            residual=residual, converged=converged,
                            value_trace=np.asarray(trace))


def spectral_norm(frame: MeasurementFrame, tol: float = 1e-10,
                  max_iter: int = 10000, seed: int = 0) -> SpectralEstimate:
    """Largest singular value of the frame operator via power iteration
    on A*A. The witness vector is the corresponding right singular vector."""
    est = leading_eig(frame.gram_apply, frame.n, tol=tol,
                      max_iter=max_iter, seed=seed)
    sigma = float(np.sqrt(max(est.value, 0.0)))
    return SpectralEstimate(value=sigma, vector=est.vector,
                            iterations=est.iterations, residual=est.residual,
                            converged=est.converged,
                            value_trace=est.value_trace)
