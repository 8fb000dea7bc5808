"""Problem-instance generation for low-dose intensity measurements.

An instance couples a ground-truth signal x, a measurement frame {a_i}, a
photon dose d and Poisson-sampled counts. The signal is rescaled after
drawing so that ``sum_i |inner(a_i, x)|**2 = 1``; the noiseless intensities
are then ``mu_i = d * |inner(a_i, x)|**2`` (summing exactly to d) and the
counts are ``y_i ~ Poisson(mu_i)``. Rescaling x rather than the frame keeps
frame norms, and with them certified step sizes, independent of the signal.

Reproducibility: an instance is a pure function of (frame spec, dose, seed).
The seed feeds ``numpy.random.SeedSequence(seed)``, whose first three spawns
drive, in order, the frame rows, the raw signal, and the Poisson noise, so a
frame can be rebuilt from its spec alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import MeasurementFrame, complex_standard_normal
from .validation import (as_complex_vector, as_count_vector, check_count,
                         check_positive)

__all__ = [
    "FrameSpec",
    "ProblemInstance",
    "CountHistogram",
    "build_frame",
    "gen_ptycho_frame",
    "gen_gaussian_instance",
    "gen_instance",
    "sample_poisson",
    "snr",
    "histogram",
    "instance_to_dict",
    "instance_from_dict",
    "save_instance",
    "load_instance",
]

FORMAT_NAME = "wirtflow-instance"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class FrameSpec:
    """Recipe for a measurement frame.

    kind "gaussian": i.i.d. standard complex Gaussian rows, reproducible
    from ``seed``. kind "ptycho": masked-DFT rows built from ``mask``
    (short-support probe), cyclic ``shifts`` and DFT ``freqs``; fully
    deterministic, ``seed`` only identifies the enclosing instance.
    """

    kind: str
    n: int
    m: int
    seed: int | None = None
    mask: tuple[complex, ...] | None = None
    shifts: tuple[int, ...] | None = None
    freqs: tuple[int, ...] | None = None

    def __post_init__(self):
        check_count(self.n, "n")
        check_count(self.m, "m")
        if self.kind == "gaussian":
            if self.mask is not None or self.shifts is not None:
                raise ValueError("gaussian frame spec takes no mask/shifts")
        elif self.kind == "ptycho":
            if self.mask is None or self.shifts is None or self.freqs is None:
                raise ValueError("ptycho frame spec needs mask, shifts, freqs")
            if len(self.mask) > self.n:
                raise ValueError(
                    f"mask support {len(self.mask)} exceeds n = {self.n}")
            if self.m != len(self.shifts) * len(self.freqs):
                raise ValueError(
                    f"ptycho m = {self.m} != shifts*freqs = "
                    f"{len(self.shifts) * len(self.freqs)}")
        else:
            raise ValueError(f"unknown frame kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n, "m": self.m, "seed": self.seed}
        if self.kind == "ptycho":
            d["mask"] = {"re": [c.real for c in self.mask],
                         "im": [c.imag for c in self.mask]}
            d["shifts"] = list(self.shifts)
            d["freqs"] = list(self.freqs)
        return d

    @staticmethod
    def from_dict(d: dict) -> "FrameSpec":
        kind = d["kind"]
        if kind == "ptycho":
            mask = tuple(complex(re, im) for re, im in
                         zip(d["mask"]["re"], d["mask"]["im"]))
            return FrameSpec(kind=kind, n=int(d["n"]), m=int(d["m"]),
                             seed=d.get("seed"), mask=mask,
                             shifts=tuple(int(s) for s in d["shifts"]),
                             freqs=tuple(int(f) for f in d["freqs"]))
        return FrameSpec(kind=kind, n=int(d["n"]), m=int(d["m"]),
                         seed=d.get("seed"))


def _instance_streams(seed):
    """The three per-instance RNG streams: frame, signal, noise."""
    return np.random.SeedSequence(seed).spawn(3)


def build_frame(spec: FrameSpec) -> MeasurementFrame:
    """Materialize the frame described by a spec."""
    if spec.kind == "gaussian":
        if spec.seed is None:
            raise ValueError("gaussian frame spec needs a seed to build from")
        frame_stream = _instance_streams(spec.seed)[0]
        rows = complex_standard_normal(np.random.default_rng(frame_stream),
                                       (spec.m, spec.n))
        return MeasurementFrame(rows)
    return gen_ptycho_frame(np.asarray(spec.mask), spec.n, spec.shifts,
                            spec.freqs)


def gen_ptycho_frame(mask, n: int, shifts, freqs) -> MeasurementFrame:
    """Masked-DFT frame: one row per (shift, frequency) pair.

    Row (k, l) has entries ``w[(j - l) mod n] * exp(-2i pi k j / n)`` where
    w is the mask zero-padded to length n. Rows are ordered with the shift
    as the outer loop and the frequency as the inner loop.
    """
    n = check_count(n, "n")
    mask = as_complex_vector(mask, name="mask")
    if mask.shape[0] > n:
        raise ValueError(f"mask support {mask.shape[0]} exceeds n = {n}")
    shifts = [int(s) for s in shifts]
    freqs = [int(k) for k in freqs]
    if not shifts or not freqs:
        raise ValueError("shifts and freqs must be nonempty")
    for s in shifts:
        if not 0 <= s < n:
            raise ValueError(f"shift {s} out of range [0, {n})")
    for k in freqs:
        if not 0 <= k < n:
            raise ValueError(f"frequency {k} out of range [0, {n})")

    w = np.zeros(n, dtype=np.complex128)
    w[: mask.shape[0]] = mask
    j = np.arange(n)
    rows = np.empty((len(shifts) * len(freqs), n), dtype=np.complex128)
    r = 0
    for s in shifts:
        shifted = np.roll(w, s)
        for k in freqs:
            rows[r] = shifted * np.exp(-2j * np.pi * k * j / n)
            r += 1
    return MeasurementFrame(rows)


@dataclass
class ProblemInstance:
    """Ground truth, frame, dose and observed counts for one experiment.

    ``x`` and ``truth_intensities`` are None for instances loaded from a
    file written without ground truth.
    """

    frame: MeasurementFrame
    frame_spec: FrameSpec
    dose: float
    counts: np.ndarray
    seed: int
    x: np.ndarray | None = None
    truth_intensities: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.frame.n

    @property
    def m(self) -> int:
        return self.frame.m


def gen_instance(spec: FrameSpec, dose: float, seed: int) -> ProblemInstance:
    """Generate an instance from a frame spec; fully seeded.

    For gaussian specs the spec's own seed is replaced by ``seed`` so
    that the stored spec rebuilds the identical frame.
    """
    dose = check_positive(dose, "dose")
    seed = int(seed)
    if spec.kind == "gaussian":
        spec = FrameSpec(kind="gaussian", n=spec.n, m=spec.m, seed=seed)
    _, signal_stream, noise_stream = _instance_streams(seed)
    frame = build_frame(spec)

    x_raw = complex_standard_normal(np.random.default_rng(signal_stream),
                                    spec.n)
    raw = frame.intensities(x_raw)
    total = float(np.sum(raw))
    if total <= 0.0:
        raise RuntimeError("degenerate draw: zero total intensity")
    x = x_raw / math.sqrt(total)
    mu = dose * (raw / total)
    counts = np.random.default_rng(noise_stream).poisson(mu).astype(np.int64)
    counts.setflags(write=False)
    return ProblemInstance(frame=frame, frame_spec=spec, dose=dose,
                           counts=counts, seed=seed, x=x,
                           truth_intensities=mu)


def gen_gaussian_instance(n: int, m: int, dose: float,
                          seed: int) -> ProblemInstance:
    """Instance with i.i.d. complex Gaussian signal and frame rows."""
    spec = FrameSpec(kind="gaussian", n=check_count(n, "n"),
                     m=check_count(m, "m"), seed=int(seed))
    return gen_instance(spec, dose, seed)


def sample_poisson(lam: float, rng: np.random.Generator) -> int:
    """One Poisson draw with mean lam; lam = 0 always yields 0."""
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValueError(f"lam must be finite and nonnegative, got {lam}")
    return int(rng.poisson(lam))


def snr(instance: ProblemInstance) -> float:
    """Signal-to-noise ratio |mu|_2 / |y - mu|_2 of the realized counts."""
    if instance.truth_intensities is None:
        raise ValueError("instance carries no ground-truth intensities")
    mu = instance.truth_intensities
    resid = instance.counts - mu
    denom = float(np.linalg.norm(resid))
    if denom == 0.0:
        raise ValueError("noiseless instance: counts equal the truth exactly")
    return float(np.linalg.norm(mu)) / denom


@dataclass
class CountHistogram:
    """Integer-binned histogram of observed counts."""

    values: np.ndarray
    frequencies: np.ndarray

    def as_dict(self) -> dict[int, int]:
        return {int(v): int(f) for v, f in
                zip(self.values, self.frequencies)}


def histogram(instance_or_counts) -> CountHistogram:
    """Histogram of counts over the integer bins 0..max(y)."""
    counts = getattr(instance_or_counts, "counts", instance_or_counts)
    counts = as_count_vector(counts)
    freqs = np.bincount(counts.astype(np.int64))
    return CountHistogram(values=np.arange(freqs.shape[0]),
                          frequencies=freqs)


# -- serialization ---------------------------------------------------------

def instance_to_dict(instance: ProblemInstance,
                     include_truth: bool = True) -> dict:
    d = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n": instance.n,
        "m": instance.m,
        "dose": instance.dose,
        "seed": instance.seed,
        "frame": instance.frame_spec.to_dict(),
        "counts": [int(c) for c in instance.counts],
        "truth": None,
    }
    if include_truth and instance.x is not None:
        d["truth"] = {"re": instance.x.real.tolist(),
                      "im": instance.x.imag.tolist()}
    return d


def instance_from_dict(d: dict) -> ProblemInstance:
    if d.get("format") != FORMAT_NAME:
        raise ValueError(f"not a {FORMAT_NAME} document: "
                         f"format = {d.get('format')!r}")
    spec = FrameSpec.from_dict(d["frame"])
    frame = build_frame(spec)
    counts = np.asarray(d["counts"], dtype=np.int64)
    if counts.shape[0] != frame.m:
        raise ValueError(f"counts length {counts.shape[0]} does not match "
                         f"frame m = {frame.m}")
    dose = check_positive(d["dose"], "dose")
    x = None
    mu = None
    if d.get("truth") is not None:
        x = np.asarray(d["truth"]["re"], dtype=np.float64) \
            + 1j * np.asarray(d["truth"]["im"], dtype=np.float64)
        x = as_complex_vector(x, frame.n, "truth")
        mu = dose * frame.intensities(x)
    return ProblemInstance(frame=frame, frame_spec=spec, dose=dose,
                           counts=counts, seed=int(d["seed"]), x=x,
                           truth_intensities=mu)


def save_instance(instance: ProblemInstance, path,
                  include_truth: bool = True) -> None:
    path = Path(path)
    payload = instance_to_dict(instance, include_truth=include_truth)
    try:
        with path.open("w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed writing instance to {path}: {exc}") from exc


def load_instance(path) -> ProblemInstance:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise OSError(f"failed reading instance from {path}: {exc}") from exc
    return instance_from_dict(payload)
