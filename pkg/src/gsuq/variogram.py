"""Anisotropic variogram and covariance models, experimental variograms.

Models are single-structure with geometric anisotropy: the lag is rotated by
the azimuth (a1 axis measured from the grid i axis, in the i-j plane) and
scaled per axis by the ranges, giving a normalized distance d. The practical
range convention is used for exponential and gaussian structures (95% of the
sill at d = 1); the spherical structure reaches the sill exactly at d = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("spherical", "exponential", "gaussian")
KIND_CODES = {name: code for code, name in enumerate(KINDS)}


@dataclass(frozen=True)
class VariogramModel:
    """Spatial continuity model.

    a1, a2 are horizontal ranges in meters (a1 along the azimuth direction),
    a3 the vertical range in milliseconds. Total variance is nugget + sill.
    """

    kind: str = "spherical"
    a1: float = 1.0
    a2: float = 1.0
    a3: float = 1.0
    azimuth_deg: float = 0.0
    sill: float = 1.0
    nugget: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown variogram kind {self.kind!r}")
        if min(self.a1, self.a2, self.a3) <= 0:
            raise ValueError("ranges must be strictly positive")
        if not 0.0 <= self.azimuth_deg < 180.0:
            raise ValueError("azimuth must be in [0, 180)")
        if self.sill <= 0:
            raise ValueError("sill must be strictly positive")
        if self.nugget < 0:
            raise ValueError("nugget must be non-negative")

    @property
    def total_variance(self) -> float:
        return self.nugget + self.sill

    @property
    def ranges(self) -> tuple[float, float, float]:
        return (self.a1, self.a2, self.a3)

    def kernel_params(self) -> np.ndarray:
        """Flat parameter vector consumed by the numba kernels."""
        az = np.radians(self.azimuth_deg)
        return np.array(
            [
                KIND_CODES[self.kind],
                self.a1,
                self.a2,
                self.a3,
                np.cos(az),
                np.sin(az),
                self.sill,
                self.nugget,
            ],
            dtype=np.float64,
        )


def normalized_distance(model: VariogramModel, h) -> np.ndarray:
    """Anisotropic normalized distance of lag(s) h, shape (..., 3)."""
    h = np.asarray(h, dtype=np.float64)
    az = np.radians(model.azimuth_deg)
    c, s = np.cos(az), np.sin(az)
    u = (c * h[..., 0] + s * h[..., 1]) / model.a1
    v = (-s * h[..., 0] + c * h[..., 1]) / model.a2
    w = h[..., 2] / model.a3
    return np.sqrt(u * u + v * v + w * w)


def _structure(kind: str, d: np.ndarray) -> np.ndarray:
    # normalized semivariance in [0, 1]
    if kind == "spherical":
        dc = np.minimum(d, 1.0)
        return 1.5 * dc - 0.5 * dc**3
    if kind == "exponential":
        return 1.0 - np.exp(-3.0 * d)
    return 1.0 - np.exp(-3.0 * d * d)


def gamma(model: VariogramModel, h) -> np.ndarray:
    """Semivariance at lag(s) h. gamma(0) = 0; the nugget appears for any h > 0."""
    d = normalized_distance(model, h)
    g = model.nugget + model.sill * _structure(model.kind, d)
    out = np.where(d > 0.0, g, 0.0)
    return out if out.ndim else float(out)


def covariance(model: VariogramModel, h) -> np.ndarray:
    """C(h) = nugget + sill - gamma(h); C(0) is the total variance."""
    out = model.total_variance - gamma(model, h)
    return out if isinstance(out, np.ndarray) and out.ndim else float(out)


@dataclass(frozen=True)
class ExperimentalVariogram:
    """Binned experimental variogram; gamma is NaN where pair_count is 0."""

    lags: np.ndarray
    gamma: np.ndarray
    pairs: np.ndarray

    def __len__(self):
        return len(self.lags)


def experimental_variogram(
    positions,
    values,
    direction,
    lag: float,
    n_lags: int,
    tol: float | None = None,
) -> ExperimentalVariogram:
    """Directional experimental variogram of scattered data.

    A pair contributes to the bin centered at m*lag when the absolute
    projection of its separation onto `direction` falls within tol of the
    bin center. Quadratic in the number of data; intended for well data and
    1-D profiles, not full grids (see :func:`volume_axis_variogram`).
    """
    if lag <= 0:
        raise ValueError("lag must be positive")
    if tol is None:
        tol = lag / 2.0
    if not 0 < tol <= lag / 2.0:
        raise ValueError("tol must be in (0, lag/2]")
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    values = np.asarray(values, dtype=np.float64).ravel()
    if positions.shape[0] != values.shape[0]:
        raise ValueError("positions and values length mismatch")
    if values.shape[0] < 2:
        empty = np.empty(0)
        return ExperimentalVariogram(empty, empty.copy(), np.empty(0, dtype=np.int64))

    direction = np.asarray(direction, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)

    iu, ju = np.triu_indices(values.shape[0], k=1)
    proj = np.abs((positions[iu] - positions[ju]) @ direction)
    sq = (values[iu] - values[ju]) ** 2

    centers = lag * np.arange(1, n_lags + 1, dtype=np.float64)
    # nearest bin center, then keep pairs within tol of it
    m = np.rint(proj / lag).astype(np.int64)
    ok = (m >= 1) & (m <= n_lags) & (np.abs(proj - m * lag) <= tol)
    counts = np.bincount(m[ok], minlength=n_lags + 1)[1:]
    sums = np.bincount(m[ok], weights=sq[ok], minlength=n_lags + 1)[1:]
    gam = np.full(n_lags, np.nan)
    nonzero = counts > 0
    gam[nonzero] = sums[nonzero] / (2.0 * counts[nonzero])
    return ExperimentalVariogram(centers, gam, counts.astype(np.int64))


def volume_axis_variogram(volume, axis: int, n_lags: int) -> ExperimentalVariogram:
    """Experimental variogram of a gridded volume along one grid axis.

    Uses all aligned pairs at integer cell offsets 1..n_lags; lags are in the
    physical units of that axis. Linear in grid size, suitable for full
    realizations.
    """
    vals = volume.values.astype(np.float64)
    step = volume.grid.cell_sizes()[axis]
    n_axis = vals.shape[axis]
    n_lags = min(n_lags, n_axis - 1)
    lags = np.empty(n_lags)
    gam = np.empty(n_lags)
    pairs = np.empty(n_lags, dtype=np.int64)
    moved = np.moveaxis(vals, axis, 0)
    for m in range(1, n_lags + 1):
        diff = moved[m:] - moved[:-m]
        lags[m - 1] = m * step
        pairs[m - 1] = diff.size
        gam[m - 1] = 0.5 * np.mean(diff**2)
    return ExperimentalVariogram(lags, gam, pairs)


def write_experimental_variogram(path, ev: ExperimentalVariogram) -> None:
    """CSV export: lag,gamma,pairs. Empty bins get an empty gamma field."""
    with open(path, "w") as f:
        f.write("lag,gamma,pairs\n")
        for lag, g, n in zip(ev.lags, ev.gamma, ev.pairs):
            gtxt = "" if np.isnan(g) else repr(float(g))
            f.write(f"{lag!r},{gtxt},{int(n)}\n")
