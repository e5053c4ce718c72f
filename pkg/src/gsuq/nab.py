"""Posterior approximation over sampled models via Voronoi-cell Gibbs walks.

The sampled-model history is treated as a proxy posterior surface: parameter
space is partitioned into Voronoi cells around the (normalized) sampled
positions, and the likelihood is constant within each cell, exp(-M) of its
model. Walkers perform axis-sweeping Gibbs steps: along each coordinate axis
the 1-D slice through the Voronoi diagram is partitioned exactly into cell
intersections, and a new coordinate is drawn from the piecewise-constant
conditional density proportional to exp(-M_cell) times interval length.
Every full sweep contributes one resample: the model whose cell the walker
occupies. Resampling never invents new positions; all weight lands on
sampled models.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .grid import Volume, WellSet

logger = logging.getLogger(__name__)


class ConsistencyError(ValueError):
    """A resampled model id has no backing volume."""


@dataclass(frozen=True)
class ProxySurface:
    """Sampled models with positions normalized to the unit box."""

    positions: np.ndarray  # (N, D) in [0, 1]
    misfits: np.ndarray    # (N,)
    ids: np.ndarray        # (N,) int64
    lo: np.ndarray         # denormalization: original = lo + positions * (hi - lo)
    hi: np.ndarray

    def __post_init__(self):
        if self.positions.ndim != 2 or self.positions.shape[0] < 1:
            raise ValueError("need at least one model")
        n, d = self.positions.shape
        if self.misfits.shape != (n,) or self.ids.shape != (n,):
            raise ValueError("misfits/ids shape mismatch")
        if self.lo.shape != (d,) or self.hi.shape != (d,):
            raise ValueError("bounds shape mismatch")
        if len(np.unique(self.ids)) != n:
            raise ValueError("model ids must be unique")

    @classmethod
    def from_history(cls, history, prior) -> "ProxySurface":
        """Build from PSO SampledModels and the prior box they were drawn in."""
        lo, hi = prior.bounds()
        pos = np.stack([m.position.as_array() for m in history])
        norm = (pos - lo) / (hi - lo)
        return cls(
            positions=np.clip(norm, 0.0, 1.0),
            misfits=np.array([m.M for m in history], dtype=np.float64),
            ids=np.array([m.id for m in history], dtype=np.int64),
            lo=np.asarray(lo, dtype=np.float64),
            hi=np.asarray(hi, dtype=np.float64),
        )

    @property
    def n_models(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        return self.lo + x * (self.hi - self.lo)


@dataclass(frozen=True)
class PosteriorEnsemble:
    """Resampled model ids with normalized posterior weights.

    `weights` aligns with `surface_ids` (all models; unvisited ones carry
    weight 0) and sums to 1. `map_id` attains the maximum weight, ties going
    to the smallest id.
    """

    resample_ids: np.ndarray
    surface_ids: np.ndarray
    weights: np.ndarray
    map_id: int

    def __post_init__(self):
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")

    def weight_of(self, model_id: int) -> float:
        idx = np.nonzero(self.surface_ids == model_id)[0]
        return float(self.weights[idx[0]]) if idx.size else 0.0


def _slice_segments(pd_: np.ndarray, r2: np.ndarray):
    """Exact partition of the unit interval into Voronoi-cell intersections.

    Along the current axis each model m defines the parabola
    f_m(t) = (t - pd_[m])^2 + r2[m]; differences between parabolas are linear
    in t, so walking the lower envelope rightward from t = 0 visits each
    segment exactly once. Returns (bounds, cells): segment [bounds[i],
    bounds[i+1]] belongs to model index cells[i].
    """
    a = pd_ * pd_ + r2  # f_m(t) = t^2 - 2 pd_ t + a_m
    f0 = a  # value at t = 0 (plus the shared t^2 term)
    cur = int(np.argmin(f0))
    bounds = [0.0]
    cells = []
    t_lo = 0.0
    for _ in range(pd_.shape[0]):
        ahead = pd_ > pd_[cur]
        if not ahead.any():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = (a[ahead] - a[cur]) / (2.0 * (pd_[ahead] - pd_[cur]))
        cross = np.where(cross > t_lo + 1e-15, cross, np.inf)
        j = int(np.argmin(cross))
        t_star = float(cross[j])
        if t_star >= 1.0:
            break
        candidates = np.nonzero(ahead)[0]
        at_min = candidates[np.abs(cross - t_star) <= 1e-15]
        nxt = int(at_min[np.argmax(pd_[at_min])])
        bounds.append(t_star)
        cells.append(cur)
        cur = nxt
        t_lo = t_star
    bounds.append(1.0)
    cells.append(cur)
    return np.array(bounds), np.array(cells, dtype=np.int64)


def gibbs_resample(surface: ProxySurface, n_walkers: int = 8,
                   n_steps: int | None = None, seed: int = 0) -> PosteriorEnsemble:
    """NAB resampling of the proxy surface; one resample per full sweep.

    n_steps of None picks enough sweeps per walker for at least 10^4 total
    resamples. Walkers are independent and deterministic per (seed, walker).
    """
    if n_walkers < 1:
        raise ValueError("n_walkers must be >= 1")
    if n_steps is None:
        n_steps = max(1, -(-10_000 // n_walkers))
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    pos = surface.positions
    n, d = pos.shape
    logl = -surface.misfits  # log-likelihood per cell, used shifted per slice
    resamples = np.empty(n_walkers * n_steps, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    out = 0
    for walker in range(n_walkers):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(walker,)))
        )
        x = rng.random(d)
        diff = pos - x[None, :]
        dist2 = np.einsum("nd,nd->n", diff, diff)
        for _ in range(n_steps):
            cell = 0
            for dim in range(d):
                pd_ = pos[:, dim]
                r2 = np.maximum(dist2 - (x[dim] - pd_) ** 2, 0.0)
                bounds, cells = _slice_segments(pd_, r2)
                seg_len = np.diff(bounds)
                logw = logl[cells]
                w = np.exp(logw - logw.max()) * seg_len
                total = w.sum()
                if total <= 0.0 or not np.isfinite(total):
                    # degenerate slice; keep the current coordinate
                    dist2 = r2 + (x[dim] - pd_) ** 2
                    cell = int(np.argmin(dist2))
                    continue
                cum = np.cumsum(w)
                pick = int(np.searchsorted(cum, rng.random() * total, side="right"))
                pick = min(pick, len(w) - 1)
                t = bounds[pick] + rng.random() * seg_len[pick]
                x[dim] = t
                dist2 = r2 + (t - pd_) ** 2
                cell = int(cells[pick])
            resamples[out] = surface.ids[cell]
            counts[cell] += 1
            out += 1
    weights = counts / counts.sum()
    best = np.nonzero(weights == weights.max())[0]
    map_id = int(surface.ids[best[np.argmin(surface.ids[best])]])
    return PosteriorEnsemble(
        resample_ids=resamples,
        surface_ids=surface.ids.copy(),
        weights=weights,
        map_id=map_id,
    )


@dataclass(frozen=True)
class Histogram:
    """Weighted density histogram; integrates to 1 over its edges."""

    edges: np.ndarray
    density: np.ndarray


def marginal_ppd(ens: PosteriorEnsemble, surface: ProxySurface, dim: int,
                 n_bins: int = 32) -> Histogram:
    """Weighted marginal of the resampled models along one parameter axis,
    in original units."""
    if not 0 <= dim < surface.dim:
        raise ValueError(f"dim {dim} outside surface dimension {surface.dim}")
    # ens.weights aligns with ens.surface_ids; map onto surface order
    pos_of = {int(mid): i for i, mid in enumerate(ens.surface_ids)}
    aligned = np.array([ens.weights[pos_of[int(mid)]] for mid in surface.ids])
    values = surface.denormalize(surface.positions)[:, dim]
    lo = surface.lo[dim]
    hi = surface.hi[dim]
    counts, edges = np.histogram(values, bins=n_bins, range=(lo, hi), weights=aligned)
    width = edges[1] - edges[0]
    total = counts.sum()
    density = counts / (total * width) if total > 0 else counts
    return Histogram(edges=edges, density=density)


@dataclass(frozen=True)
class QuantileMaps:
    p10: Volume
    p50: Volume
    p90: Volume

    def __post_init__(self):
        if not (
            np.all(self.p10.values <= self.p50.values)
            and np.all(self.p50.values <= self.p90.values)
        ):
            raise ValueError("quantile maps must be cell-wise monotone")


def weighted_quantile_volumes(ens: PosteriorEnsemble, model_volumes: dict,
                              probs) -> list[Volume]:
    """Cell-wise lower weighted empirical quantiles of the posterior ensemble.

    The quantile at probability p is the smallest value whose cumulative
    weight reaches p. Every model with positive weight must have a volume.
    """
    active = [(int(mid), float(w)) for mid, w in zip(ens.surface_ids, ens.weights) if w > 0]
    missing = [mid for mid, _ in active if mid not in model_volumes]
    if missing:
        raise ConsistencyError(f"no volume for resampled model ids {missing}")
    grid = model_volumes[active[0][0]].grid
    stacked = np.stack([model_volumes[mid].values for mid, _ in active]).astype(np.float64)
    w = np.array([wt for _, wt in active])
    w = w / w.sum()
    k = stacked.shape[0]
    flat = stacked.reshape(k, -1)
    order = np.argsort(flat, axis=0, kind="stable")
    svals = np.take_along_axis(flat, order, axis=0)
    sw = w[order]
    cum = np.cumsum(sw, axis=0)
    out = []
    for p in probs:
        if not 0.0 < p < 1.0:
            raise ValueError("probabilities must be in (0, 1)")
        idx = np.argmax(cum >= p - 1e-12, axis=0)
        q = svals[idx, np.arange(flat.shape[1])]
        out.append(Volume(grid, q.reshape(grid.shape).astype(np.float32)))
    return out


def quantile_maps(ens: PosteriorEnsemble, model_volumes: dict,
                  probs=(0.1, 0.5, 0.9)) -> QuantileMaps:
    p10, p50, p90 = weighted_quantile_volumes(ens, model_volumes, probs)
    return QuantileMaps(p10=p10, p50=p50, p90=p90)


def coverage(maps: QuantileMaps, blind: WellSet) -> float:
    """Fraction of blind-well samples inside the [p10, p90] envelope."""
    total = 0
    inside = 0
    p10 = maps.p10.values
    p90 = maps.p90.values
    for w in blind.wells:
        for k, ip in w.samples:
            total += 1
            s = np.float32(ip)  # compare in the volumes' float32 domain
            if p10[w.i, w.j, k] <= s <= p90[w.i, w.j, k]:
                inside += 1
    if total == 0:
        logger.warning("coverage of an empty blind-well set is defined as 0")
        return 0.0
    return inside / total


def write_weights(path, ens: PosteriorEnsemble) -> None:
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["id", "weight"])
        for mid, w in zip(ens.surface_ids, ens.weights):
            out.writerow([int(mid), repr(float(w))])


def read_weights(path) -> dict[int, float]:
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd)
        if header != ["id", "weight"]:
            raise ValueError(f"{path}: unexpected weights header {header}")
        return {int(row[0]): float(row[1]) for row in rd if row}


def write_marginal(path, hist: Histogram) -> None:
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["bin_lo", "bin_hi", "density"])
        for lo, hi, dens in zip(hist.edges[:-1], hist.edges[1:], hist.density):
            out.writerow([repr(float(lo)), repr(float(hi)), repr(float(dens))])
