"""Direct sequential simulation and co-simulation on a regular grid.

Nodes are visited along a seeded random path; each node gets a local mean and
variance by (co-)kriging from conditioning wells and previously simulated
nodes, and a value is drawn from the global target distribution through a
Gaussian interval in normal-score space. The interval width is the kriging
variance on the normal-score scale (s^2 = kriging variance / target
variance) and its center is solved so that the back-transformed mean equals
the kriged mean exactly; zero variance degenerates to exact rank matching.
Simulated values never leave the target support, and the pooled marginal
reproduces the target histogram (exactly so in the unconditional limit).

Realization r of a plan derives its RNG stream deterministically from
(plan.seed, r); identical plans give bit-identical realizations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from . import _kernels
from .grid import Grid3, Volume, WellSet
from .kriging import DegenerateDataError, KrigingResult, Neighborhood
from .variogram import VariogramModel, normalized_distance

logger = logging.getLogger(__name__)

# spiral search scans at most this many nearest offsets per node
MAX_TEMPLATE = 8192

_EPS_TAIL = 1e-8
_TABLE_KNOTS = 257
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class SimulationError(RuntimeError):
    """A realization could not be completed."""


def _strictly_increasing(x, y):
    """Filter (x, y) pairs so x is strictly increasing (keep first of ties)."""
    keep = np.concatenate(([True], np.diff(x) > 0))
    return x[keep], y[keep]


def _segment_means(yk, xs, ygrid, s_pos):
    """Mean of f(y + s Z), Z ~ N(0,1), for each (y, s) pair.

    f is the piecewise-linear map through knots (yk, xs), constant beyond the
    end knots. Each linear segment integrates against the Gaussian in closed
    form, so steep segments cost nothing in accuracy.
    """
    beta = np.diff(xs) / np.diff(yk)
    z = (yk[:, None, None] - ygrid[None, :, None]) / s_pos[None, None, :]
    phi_cdf = ndtr(z)
    pdf = np.exp(-0.5 * z * z) / _SQRT_2PI
    d_cdf = phi_cdf[1:] - phi_cdf[:-1]
    d_pdf = pdf[:-1] - pdf[1:]
    # on segment i the integrand is c_i + beta_i * s * z with
    # c_i = xs_i + beta_i * (y - yk_i)
    c = xs[:-1, None] + beta[:, None] * (ygrid[None, :] - yk[:-1, None])
    return (
        np.einsum("kb,kbs->bs", c, d_cdf)
        + np.einsum("k,kbs->bs", beta, d_pdf) * s_pos[None, :]
        + xs[0] * phi_cdf[0]
        + xs[-1] * (1.0 - phi_cdf[-1])
    )


class TargetDistribution:
    """Discretized global distribution: sorted support with a cdf in [0, 1].

    The quantile function interpolates linearly between knots, which defines
    the exact mean and variance used by the simulator.
    """

    def __init__(self, support, cdf):
        support = np.asarray(support, dtype=np.float64).ravel()
        cdf = np.asarray(cdf, dtype=np.float64).ravel()
        if support.size != cdf.size or support.size < 2:
            raise ValueError("support and cdf must have equal length >= 2")
        if not np.all(np.diff(support) > 0):
            raise ValueError("support must be strictly increasing")
        if cdf[0] < -1e-12 or abs(cdf[-1] - 1.0) > 1e-9 or np.any(np.diff(cdf) < 0):
            raise ValueError("cdf must be non-decreasing from >= 0 to 1")
        cdf = np.clip(cdf, 0.0, 1.0)
        cdf[-1] = 1.0
        self.support = support
        self.cdf = cdf
        self.support.setflags(write=False)
        self.cdf.setflags(write=False)
        self._tables = None
        self._moments = None

    @classmethod
    def from_samples(cls, samples, n_points: int = 4096) -> "TargetDistribution":
        """Empirical target from data samples (midpoint-rank ecdf knots)."""
        s = np.sort(np.asarray(samples, dtype=np.float64).ravel())
        if s.size < 2:
            raise ValueError("need at least two samples")
        ranks = (np.arange(s.size) + 0.5) / s.size
        x, u = _strictly_increasing(s, ranks)
        # pin the ends so the support covers the data range exactly
        x = np.concatenate(([s[0] - 1e-9 * max(1.0, abs(s[0]))], x, [s[-1]]))
        u = np.concatenate(([0.0], u, [1.0]))
        x, u = _strictly_increasing(x, u)
        if x.size > n_points:
            idx = np.unique(np.linspace(0, x.size - 1, n_points).astype(np.int64))
            x, u = x[idx], u[idx]
            u[0], u[-1] = 0.0, 1.0
        return cls(x, u)

    # --- moments of the piecewise-linear quantile function ---------------

    def _compute_moments(self):
        u = self.cdf
        x = self.support
        du = np.diff(u)
        xa, xb = x[:-1], x[1:]
        mean = float(np.sum(du * 0.5 * (xa + xb)))
        ex2 = float(np.sum(du * (xa * xa + xa * xb + xb * xb) / 3.0))
        return mean, max(ex2 - mean * mean, 0.0)

    @property
    def mean(self) -> float:
        if self._moments is None:
            self._moments = self._compute_moments()
        return self._moments[0]

    @property
    def variance(self) -> float:
        if self._moments is None:
            self._moments = self._compute_moments()
        return self._moments[1]

    def quantile(self, u):
        return np.interp(u, self.cdf, self.support)

    def cdf_at(self, x):
        return np.interp(x, self.support, self.cdf)

    # --- normal-score machinery ------------------------------------------

    def tables(self):
        """Lookup tables for the Gaussian-interval sampler.

        Returns (ts, ty, ygrid, sgrid, mean_tab): support knots with their
        normal scores, and the forward table of the back-transformed mean
        over a (s, y*) grid, used to center each local interval so its
        back-transformed mean equals the kriged mean. The forward means are
        exact Gaussian integrals over a piecewise-linear resampling of the
        normal-score transform (quadrature would smear the steep segments a
        multimodal target puts between its modes).
        """
        if self._tables is not None:
            return self._tables
        cdf = np.clip(self.cdf, _EPS_TAIL, 1.0 - _EPS_TAIL)
        ty, ts = _strictly_increasing(ndtri(cdf), self.support)

        cdf_d, sup_d = _strictly_increasing(self.cdf, self.support)
        uk = np.linspace(_EPS_TAIL, 1.0 - _EPS_TAIL, _TABLE_KNOTS)
        yk = ndtri(uk)
        xs = np.interp(uk, cdf_d, sup_d)

        ygrid = np.linspace(-8.0, 8.0, 321)
        sgrid = np.concatenate([np.linspace(0.0, 0.6, 61), np.linspace(0.62, 1.5, 45)])
        mean_tab = np.empty((ygrid.size, sgrid.size))
        mean_tab[:, 0] = np.interp(ygrid, yk, xs)
        for blk in range(0, ygrid.size, 64):
            yb = ygrid[blk:blk + 64]
            mean_tab[blk:blk + 64, 1:] = _segment_means(yk, xs, yb, sgrid[1:])
        # kernels index the table (s, y) so s rows are contiguous
        self._tables = (
            np.ascontiguousarray(ts),
            np.ascontiguousarray(ty),
            ygrid,
            sgrid,
            np.ascontiguousarray(mean_tab.T),
        )
        return self._tables

    def match_moments(self, mean: float, variance: float):
        """(y*, s, clamped): local interval with width s^2 = variance /
        target variance, centered so its back-transformed mean is `mean`."""
        ts, ty, ygrid, sgrid, mean_tab = self.tables()
        return _kernels.match_moments(
            float(mean), float(variance), ygrid, sgrid, mean_tab, ts, ty,
            max(self.variance, 1e-300),
        )


def local_sample(kr: KrigingResult, target: TargetDistribution, u: float) -> float:
    """Draw one value from the target given local kriging moments.

    `u` is a uniform(0, 1) deviate. Zero variance returns the value whose
    target rank matches the kriging mean; out-of-support means clamp to the
    support endpoints.
    """
    if kr.variance < 0:
        raise ValueError("kriging variance must be non-negative")
    if not 0.0 < u < 1.0:
        raise ValueError("u must be in (0, 1)")
    ts, ty, *_ = target.tables()
    ystar, s, clamped = target.match_moments(kr.mean, kr.variance)
    if clamped:
        logger.warning("kriging mean %g outside target support, clamped", kr.mean)
    g = ystar + s * float(ndtri(u))
    return float(np.interp(g, ty, ts))


def random_path(grid: Grid3, seed: int) -> np.ndarray:
    """Uniform random permutation of all flat node indices, reproducible."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.permutation(grid.n_cells).astype(np.int64)


def node_index(grid: Grid3, i: int, j: int, k: int) -> int:
    return (i * grid.ny + j) * grid.nz + k


@dataclass(frozen=True)
class CoSimData:
    """Secondary variable for collocated co-simulation.

    `cc` holds the local correlation coefficient per cell (column-constant
    in the inversion loop). `mean` of None means "use the target mean".
    """

    volume: Volume
    cc: Volume
    mean: float | None = None


@dataclass(frozen=True)
class SimulationPlan:
    grid: Grid3
    model: VariogramModel
    target: TargetDistribution
    seed: int = 0
    n_realizations: int = 1
    neighborhood: Neighborhood = Neighborhood()
    conditioning: WellSet | None = None
    secondary: CoSimData | None = None

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.conditioning is not None:
            self.conditioning.validate_against(self.grid)
        if self.secondary is not None:
            if self.secondary.volume.grid.shape != self.grid.shape:
                raise ValueError("secondary volume not congruent with grid")
            if self.secondary.cc.grid.shape != self.grid.shape:
                raise ValueError("secondary cc volume not congruent with grid")


def search_template(grid: Grid3, model: VariogramModel, nbh: Neighborhood) -> np.ndarray:
    """Integer cell offsets inside the search ellipsoid, nearest first.

    Sorted by anisotropic (variogram-normalized) distance and capped at
    MAX_TEMPLATE entries; the simulation scans it in order until max_data
    previously-informed nodes are found.
    """
    r1, r2, r3 = nbh.radii_for(model)
    az = math.radians(model.azimuth_deg)
    c, s = abs(math.cos(az)), abs(math.sin(az))
    ext_x = math.hypot(r1 * c, r2 * s)
    ext_y = math.hypot(r1 * s, r2 * c)
    bx = min(grid.nx - 1, int(math.ceil(ext_x / grid.dx)))
    by = min(grid.ny - 1, int(math.ceil(ext_y / grid.dy)))
    bz = min(grid.nz - 1, int(math.ceil(r3 / grid.dz)))
    di, dj, dk = np.meshgrid(
        np.arange(-bx, bx + 1), np.arange(-by, by + 1), np.arange(-bz, bz + 1),
        indexing="ij",
    )
    offs = np.stack([di.ravel(), dj.ravel(), dk.ravel()], axis=1).astype(np.int64)
    phys = offs * np.array(grid.cell_sizes())
    search_model = VariogramModel(
        kind=model.kind, a1=r1, a2=r2, a3=r3,
        azimuth_deg=model.azimuth_deg, sill=model.sill, nugget=model.nugget,
    )
    d_search = normalized_distance(search_model, phys)
    inside = (d_search <= 1.0) & (np.abs(offs).sum(axis=1) > 0)
    offs = offs[inside]
    d_model = normalized_distance(model, offs * np.array(grid.cell_sizes()))
    order = np.argsort(d_model, kind="stable")
    return np.ascontiguousarray(offs[order][:MAX_TEMPLATE])


def _conditioning_arrays(plan: SimulationPlan):
    n = plan.grid.n_cells
    vals = np.zeros(n, dtype=np.float64)
    known = np.zeros(n, dtype=np.bool_)
    if plan.conditioning is not None:
        for w in plan.conditioning.wells:
            for k, ip in w.samples:
                idx = node_index(plan.grid, w.i, w.j, k)
                # float32 cast now so realizations reproduce wells bit-exactly
                vals[idx] = np.float32(ip)
                known[idx] = True
    return vals, known


def simulate(plan: SimulationPlan) -> list[Volume]:
    """Generate plan.n_realizations volumes honoring wells, target, variogram.

    With a secondary present every node is collocated-co-kriged against it;
    otherwise simple kriging is used. Realizations differ only through the
    per-realization RNG stream derived from (seed, r).
    """
    grid = plan.grid
    target = plan.target
    model = plan.model
    gm = target.mean
    if abs(model.total_variance - target.variance) > 0.05 * max(target.variance, 1e-300):
        logger.warning(
            "variogram total variance %g differs from target variance %g; "
            "local interval widths will be rescaled by moment matching",
            model.total_variance, target.variance,
        )
    ts, ty, ygrid, sgrid, mean_tab = target.tables()
    tmpl = search_template(grid, model, plan.neighborhood)
    base_vals, base_known = _conditioning_arrays(plan)

    use_sec = plan.secondary is not None
    if use_sec:
        sec = plan.secondary.volume.values.astype(np.float64).ravel()
        ccv = np.clip(plan.secondary.cc.values.astype(np.float64).ravel(), -1.0, 1.0)
        sec_mean = gm if plan.secondary.mean is None else float(plan.secondary.mean)
    else:
        sec = np.zeros(1)
        ccv = np.zeros(1)
        sec_mean = 0.0

    out = []
    for r in range(plan.n_realizations):
        ss = np.random.SeedSequence(entropy=plan.seed, spawn_key=(r,))
        rng = np.random.Generator(np.random.PCG64(ss))
        path = rng.permutation(grid.n_cells).astype(np.int64)
        z = rng.standard_normal(grid.n_cells)
        vals = base_vals.copy()
        known = base_known.copy()
        nclamp, err, err_node, err_nbh = _kernels.dss_realization(
            grid.nx, grid.ny, grid.nz, grid.dx, grid.dy, grid.dz,
            vals, known, path, z, tmpl, plan.neighborhood.max_data,
            gm, model.kernel_params(),
            ts, ty, ygrid, sgrid, mean_tab,
            max(target.variance, 1e-300),
            use_sec, sec, ccv, sec_mean,
        )
        if err == 1:
            raise DegenerateDataError(
                f"realization {r}: invalid kriging variance at node {err_node} "
                f"(neighborhood size {err_nbh})"
            )
        if err == 2:
            raise SimulationError(
                f"realization {r}: singular kriging system at node {err_node} "
                f"(neighborhood size {err_nbh})"
            )
        if nclamp:
            logger.info("realization %d: %d kriging means clamped to target support", r, nclamp)
        out.append(Volume(grid, vals.reshape(grid.shape).astype(np.float32)))
    return out
