"""Local estimation kernels: simple kriging and collocated co-kriging.

Simple kriging uses a known global mean (the mean of the simulation target
distribution). Co-kriging follows Markov model 1 with a single secondary
datum collocated at the estimation point; the secondary is assumed to share
the primary variance scale, so its cross-covariance at lag h is
cc_local * C(h).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .variogram import VariogramModel


class DegenerateDataError(ValueError):
    """Conditioning data produce a singular kriging system."""


@dataclass(frozen=True)
class Neighborhood:
    """Search configuration: cap on conditioning points and per-axis radii.

    `search_radii` of None means "use the variogram ranges".
    """

    max_data: int = 32
    search_radii: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.max_data < 1:
            raise ValueError("max_data must be >= 1")
        if self.search_radii is not None and min(self.search_radii) <= 0:
            raise ValueError("search radii must be positive")

    def radii_for(self, model: VariogramModel) -> tuple[float, float, float]:
        return self.search_radii if self.search_radii is not None else model.ranges


@dataclass(frozen=True)
class KrigingResult:
    mean: float
    variance: float


def _prepare(target, positions, values):
    target = np.asarray(target, dtype=np.float64).reshape(3)
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    values = np.asarray(values, dtype=np.float64).ravel()
    if positions.shape[0] != values.shape[0]:
        raise ValueError("positions and values length mismatch")
    if positions.shape[0]:
        # collapse exact duplicate positions: same value screens to one datum,
        # conflicting values cannot be kriged
        _, first, inverse = np.unique(
            positions, axis=0, return_index=True, return_inverse=True
        )
        if first.shape[0] != positions.shape[0]:
            for grp in range(first.shape[0]):
                vals_grp = values[inverse == grp]
                if not np.all(vals_grp == vals_grp[0]):
                    raise DegenerateDataError(
                        "duplicate data positions with conflicting values"
                    )
            keep = np.sort(first)
            positions = positions[keep]
            values = values[keep]
    return target, positions, values


def _finalize(mean, variance, model):
    if np.isnan(variance):
        raise DegenerateDataError("singular kriging system")
    tol = 1e-9 * max(1.0, model.total_variance)
    if variance < -tol:
        raise DegenerateDataError(
            f"kriging variance {variance} below -{tol}: invalid covariance setup"
        )
    if not (np.isfinite(mean) and np.isfinite(variance)):
        raise DegenerateDataError("kriging system produced non-finite solution")
    return KrigingResult(float(mean), float(max(variance, 0.0)))


def simple_krige(target, positions, values, global_mean: float, model: VariogramModel) -> KrigingResult:
    """Simple kriging of the value at `target` from scattered data.

    With no data the prior is returned: (global_mean, nugget + sill).
    """
    target, positions, values = _prepare(target, positions, values)
    mean, variance = _kernels.krige_at(
        target[0], target[1], target[2],
        positions, values, positions.shape[0],
        float(global_mean), False, 0.0, 0.0, 0.0,
        model.kernel_params(),
    )
    return _finalize(mean, variance, model)


def collocated_cokrige(
    target,
    positions,
    values,
    secondary_value: float,
    cc_local: float,
    global_mean: float,
    secondary_mean: float,
    model: VariogramModel,
) -> KrigingResult:
    """Collocated co-kriging with one secondary datum at the target.

    cc_local = 0 reduces exactly to simple kriging on the same data.
    """
    if not np.isfinite(cc_local):
        raise ValueError("cc_local must be finite")
    target, positions, values = _prepare(target, positions, values)
    mean, variance = _kernels.krige_at(
        target[0], target[1], target[2],
        positions, values, positions.shape[0],
        float(global_mean), True, float(secondary_value), float(secondary_mean),
        float(cc_local), model.kernel_params(),
    )
    return _finalize(mean, variance, model)
