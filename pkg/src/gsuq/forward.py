"""Convolutional seismic forward model and correlation scoring.

Normal-incidence reflection coefficients are convolved trace by trace with a
wavelet sampled at the grid's vertical step. Correlation scores are Pearson
coefficients; traces with zero variance score 0 so dead traces can never win
best-trace selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Volume


@dataclass(frozen=True)
class Wavelet:
    """Sampled wavelet; `center_index` marks the zero-lag sample."""

    samples: np.ndarray
    center_index: int
    dt: float  # ms, must equal the grid dz it is used with

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("wavelet samples must be a non-empty 1-D sequence")
        if not np.isfinite(arr).all():
            raise ValueError("wavelet samples must be finite")
        if not 0 <= self.center_index < arr.size:
            raise ValueError("center_index outside samples")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)


def ricker(peak_freq_hz: float, dt_ms: float, n_half: int | None = None) -> Wavelet:
    """Zero-phase Ricker wavelet sampled every dt_ms milliseconds."""
    if peak_freq_hz <= 0:
        raise ValueError("peak frequency must be positive")
    if n_half is None:
        # cover until the envelope is negligible (~1.5 periods each side)
        n_half = max(2, int(math.ceil(1500.0 / (peak_freq_hz * dt_ms))))
    t = np.arange(-n_half, n_half + 1) * (dt_ms / 1000.0)
    a = (math.pi * peak_freq_hz * t) ** 2
    samples = (1.0 - 2.0 * a) * np.exp(-a)
    return Wavelet(samples, n_half, dt_ms)


def reflectivity(ip_trace) -> np.ndarray:
    """Normal-incidence reflection coefficients of one impedance trace."""
    ip = np.asarray(ip_trace, dtype=np.float64)
    if ip.ndim != 1 or ip.size < 2:
        raise ValueError("impedance trace must be 1-D with length >= 2")
    if np.any(ip <= 0):
        raise ValueError("impedance must be strictly positive")
    return (ip[1:] - ip[:-1]) / (ip[1:] + ip[:-1])


def _reflectivity_volume(values: np.ndarray) -> np.ndarray:
    if np.any(values <= 0):
        raise ValueError("impedance must be strictly positive")
    v = values.astype(np.float64)
    return (v[:, :, 1:] - v[:, :, :-1]) / (v[:, :, 1:] + v[:, :, :-1])


def synthesize(ip: Volume, w: Wavelet) -> Volume:
    """Synthetic seismic volume: per-trace convolution of reflectivity with w.

    Sample k of the output receives sum_m r[m] * w[center + k - m]; the
    result is truncated to nz samples with zero padding at the edges.
    """
    if not math.isclose(w.dt, ip.grid.dz, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"wavelet dt {w.dt} must equal grid dz {ip.grid.dz}")
    refl = _reflectivity_volume(ip.values)
    nz = ip.grid.nz
    out = np.zeros(ip.grid.shape, dtype=np.float64)
    nr = nz - 1
    for tap in range(w.samples.size):
        amp = w.samples[tap]
        if amp == 0.0:
            continue
        shift = w.center_index - tap  # out[k] += amp * refl[k + shift]
        k_lo = max(0, -shift)
        k_hi = min(nz, nr - shift)
        if k_lo < k_hi:
            out[:, :, k_lo:k_hi] += amp * refl[:, :, k_lo + shift:k_hi + shift]
    return Volume(ip.grid, out.astype(np.float32))


def synthesize_trace(ip_trace, w: Wavelet) -> np.ndarray:
    """1-D counterpart of :func:`synthesize` for a single trace."""
    r = reflectivity(ip_trace)
    nz = np.asarray(ip_trace).size
    out = np.zeros(nz)
    for tap in range(w.samples.size):
        amp = w.samples[tap]
        shift = w.center_index - tap
        k_lo = max(0, -shift)
        k_hi = min(nz, r.size - shift)
        if k_lo < k_hi:
            out[k_lo:k_hi] += amp * r[k_lo + shift:k_hi + shift]
    return out


_ZERO_VAR_REL = 1e-24


def trace_cc(a, b) -> float:
    """Pearson correlation of two equal-length traces; zero-variance gives 0."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size or a.size < 2:
        raise ValueError("traces must have equal length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    saa = float(da @ da)
    sbb = float(db @ db)
    if saa <= _ZERO_VAR_REL * float(a @ a) or sbb <= _ZERO_VAR_REL * float(b @ b):
        return 0.0
    return float((da @ db) / math.sqrt(saa * sbb))


def trace_cc_map(a: Volume, b: Volume) -> np.ndarray:
    """Per-trace Pearson correlation between two volumes, shape (nx, ny)."""
    if a.grid.shape != b.grid.shape:
        raise ValueError("volumes are not congruent")
    av = a.values.astype(np.float64)
    bv = b.values.astype(np.float64)
    da = av - av.mean(axis=2, keepdims=True)
    db = bv - bv.mean(axis=2, keepdims=True)
    saa = np.einsum("ijk,ijk->ij", da, da)
    sbb = np.einsum("ijk,ijk->ij", db, db)
    num = np.einsum("ijk,ijk->ij", da, db)
    dead = (saa <= _ZERO_VAR_REL * np.einsum("ijk,ijk->ij", av, av)) | (
        sbb <= _ZERO_VAR_REL * np.einsum("ijk,ijk->ij", bv, bv)
    )
    den = np.sqrt(saa * sbb)
    den[dead] = 1.0
    cc = num / den
    cc[dead] = 0.0
    return np.clip(cc, -1.0, 1.0)


def global_cc(a: Volume, b: Volume) -> float:
    """Pearson correlation over all cells of two congruent volumes."""
    if a.grid.shape != b.grid.shape:
        raise ValueError("volumes are not congruent")
    return trace_cc(a.values.ravel(), b.values.ravel())


def write_wavelet(path, w: Wavelet) -> None:
    """Two-line header (metadata, column names) then index,amplitude rows."""
    with open(path, "w") as f:
        f.write(f"center_index={w.center_index},dt_ms={w.dt!r}\n")
        f.write("index,amplitude\n")
        for i, amp in enumerate(w.samples):
            f.write(f"{i},{amp!r}\n")


def read_wavelet(path) -> Wavelet:
    with open(path) as f:
        meta = f.readline().strip()
        cols = f.readline().strip()
        if cols != "index,amplitude":
            raise ValueError(f"{path}: expected column header index,amplitude")
        fields = dict(item.split("=", 1) for item in meta.split(","))
        center = int(fields["center_index"])
        dt = float(fields["dt_ms"])
        amps = [float(line.split(",")[1]) for line in f if line.strip()]
    return Wavelet(np.array(amps), center, dt)
