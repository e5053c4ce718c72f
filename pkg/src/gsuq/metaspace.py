"""Large-scale geological metaparameter space.

A metaparameter vector bundles the variogram ranges with the parameters of a
Gaussian-mixture target distribution (one mode per facies). Uniform prior
boxes over named parameters define the search space; materializing a vector
yields the (VariogramModel, TargetDistribution) pair that drives one full
inversion run. The misfit score of an inverted volume is

    M = sum over traces of (1 - CC_trace) / (2 * sigma2)

so a perfect trace-by-trace match gives M = 0, and the likelihood of a model
is exp(-M), always handled in log space.

Parameter names carry their units and are interpreted by convention:

    range_h_m           horizontal variogram range a1 (meters), required
    range_h2_m          second horizontal range a2 (optional; default a1)
    range_v_ms          vertical range a3 (milliseconds), required
    azimuth_deg         rotation of a1 from the grid i axis (optional; 0)
    mean_f<N>_kpasm     mode mean of facies N (1-based), required per facies
    std_f<N>_kpasm      mode standard deviation of facies N, or
    var_f<N>_kpasm2     mode variance of facies N (exactly one of the two)
    prop_f<N>_pct       mode proportion in percent; exactly one facies omits
                        it and takes the remainder
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .dss import TargetDistribution
from .forward import trace_cc_map
from .grid import Volume
from .variogram import VariogramModel

DEFAULT_SIGMA2 = 0.25
TARGET_POINTS = 4096


class OutOfPriorError(ValueError):
    """A metaparameter vector leaves its prior box or implies an invalid model."""


@dataclass(frozen=True)
class GmmMode:
    mu: float
    sigma: float
    weight: float


@dataclass(frozen=True)
class GmmSpec:
    """Gaussian mixture over impedance; one mode per facies."""

    modes: tuple[GmmMode, ...]

    def __post_init__(self):
        if len(self.modes) < 1:
            raise ValueError("need at least one mode")
        if any(m.sigma <= 0 for m in self.modes):
            raise ValueError("mode standard deviations must be positive")
        if any(m.weight < 0 for m in self.modes):
            raise ValueError("mode weights must be non-negative")
        total = sum(m.weight for m in self.modes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mode weights must sum to 1, got {total}")

    @property
    def k(self) -> int:
        return len(self.modes)

    def mean(self) -> float:
        return sum(m.weight * m.mu for m in self.modes)

    def variance(self) -> float:
        mu = self.mean()
        return sum(m.weight * (m.sigma**2 + m.mu**2) for m in self.modes) - mu**2


def build_target(g: GmmSpec, n_points: int = TARGET_POINTS) -> TargetDistribution:
    """Discretized cdf of the mixture on a support spanning +-4 sigma.

    Tail mass beyond the support (< 0.01%) is renormalized away; flat cdf
    runs are deduplicated so the inverse transform is well defined.
    """
    if n_points < 64:
        raise ValueError("n_points must be >= 64")
    lo = min(m.mu - 4.0 * m.sigma for m in g.modes)
    hi = max(m.mu + 4.0 * m.sigma for m in g.modes)
    support = np.linspace(lo, hi, n_points)
    cdf = np.zeros(n_points)
    for m in g.modes:
        cdf += m.weight * ndtr((support - m.mu) / m.sigma)
    cdf = (cdf - cdf[0]) / (cdf[-1] - cdf[0])
    keep = np.concatenate(([True], np.diff(cdf) > 0))
    keep[-1] = True
    support, cdf = support[keep], cdf[keep]
    if cdf[-1] != 1.0:
        cdf = cdf / cdf[-1]
    return TargetDistribution(support, cdf)


@dataclass(frozen=True)
class PriorParam:
    lo: float
    hi: float
    distribution: str = "uniform"

    def __post_init__(self):
        if self.distribution != "uniform":
            raise ValueError("only uniform priors are supported")
        if not self.lo < self.hi:
            raise ValueError(f"prior bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]")


_NAME_RE = re.compile(
    r"^(range_h_m|range_h2_m|range_v_ms|azimuth_deg|"
    r"mean_f\d+_kpasm|std_f\d+_kpasm|var_f\d+_kpasm2|prop_f\d+_pct)$"
)


@dataclass(frozen=True)
class PriorBox:
    """Ordered uniform prior box over named metaparameters."""

    params: dict[str, PriorParam] = field(default_factory=dict)

    def __post_init__(self):
        if not self.params:
            raise ValueError("prior box must not be empty")
        for name in self.params:
            if not _NAME_RE.match(name):
                raise ValueError(f"unrecognized parameter name {name!r}")
        # fail early if the names cannot be materialized
        _facies_layout(tuple(self.params))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.params)

    @property
    def dim(self) -> int:
        return len(self.params)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([p.lo for p in self.params.values()])
        hi = np.array([p.hi for p in self.params.values()])
        return lo, hi

    def contains(self, values) -> bool:
        lo, hi = self.bounds()
        v = np.asarray(values, dtype=np.float64)
        return bool(np.all(v >= lo - 1e-12) and np.all(v <= hi + 1e-12))

    def sample(self, rng: np.random.Generator) -> "MetaVector":
        lo, hi = self.bounds()
        for _ in range(256):
            v = MetaVector(self.names, tuple(rng.uniform(lo, hi)))
            try:
                v.validate(self)
                return v
            except OutOfPriorError:
                continue
        raise OutOfPriorError("could not draw a valid vector from the prior box")


def _facies_layout(names: tuple[str, ...]):
    """Facies indices, their spread keys, and the derived-proportion facies."""
    means = sorted(int(n.split("_f")[1].split("_")[0]) for n in names if n.startswith("mean_f"))
    if not means:
        raise ValueError("prior needs at least one mean_f<N>_kpasm parameter")
    if means != list(range(1, len(means) + 1)):
        raise ValueError(f"facies must be numbered 1..k, got {means}")
    if "range_h_m" not in names or "range_v_ms" not in names:
        raise ValueError("prior needs range_h_m and range_v_ms")
    spread = {}
    for f in means:
        has_std = f"std_f{f}_kpasm" in names
        has_var = f"var_f{f}_kpasm2" in names
        if has_std == has_var:
            raise ValueError(f"facies {f} needs exactly one of std_f{f}_kpasm / var_f{f}_kpasm2")
        spread[f] = f"std_f{f}_kpasm" if has_std else f"var_f{f}_kpasm2"
    with_prop = {f for f in means if f"prop_f{f}_pct" in names}
    derived = set(means) - with_prop
    if len(means) == 1:
        if with_prop:
            raise ValueError("single-facies prior must not carry proportions")
        derived = {1}
    elif len(derived) != 1:
        raise ValueError("exactly one facies must omit prop_f<N>_pct (it takes the remainder)")
    return means, spread, derived.pop()


@dataclass(frozen=True)
class MetaVector:
    """One point of the metaparameter space, aligned with a PriorBox order."""

    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.names) != len(self.values):
            raise ValueError("names and values length mismatch")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)

    def validate(self, prior: PriorBox) -> None:
        if self.names != prior.names:
            raise OutOfPriorError("vector names do not match the prior box")
        if not prior.contains(self.values):
            raise OutOfPriorError(f"vector {self.values} outside prior box")
        self.gmm()  # raises if the derived proportion leaves [0, 1]

    def gmm(self) -> GmmSpec:
        d = self.as_dict()
        facies, spread_key, derived = _facies_layout(self.names)
        weights = {}
        free_total = 0.0
        for f in facies:
            if f == derived:
                continue
            w = d[f"prop_f{f}_pct"] / 100.0
            weights[f] = w
            free_total += w
        rem = 1.0 - free_total
        if rem < -1e-9 or rem > 1.0 + 1e-9:
            raise OutOfPriorError(f"derived proportion {rem} outside [0, 1]")
        weights[derived] = min(max(rem, 0.0), 1.0)
        modes = []
        for f in facies:
            key = spread_key[f]
            sigma = math.sqrt(d[key]) if key.startswith("var_") else d[key]
            if sigma <= 0:
                raise OutOfPriorError(f"facies {f} has non-positive spread")
            modes.append(GmmMode(mu=d[f"mean_f{f}_kpasm"], sigma=sigma, weight=weights[f]))
        return GmmSpec(tuple(modes))

    def variogram(self, kind: str = "spherical", nugget: float = 0.0,
                  sill: float | None = None) -> VariogramModel:
        d = self.as_dict()
        a1 = d["range_h_m"]
        if a1 <= 0:
            raise OutOfPriorError("horizontal range must be positive")
        return VariogramModel(
            kind=kind,
            a1=a1,
            a2=d.get("range_h2_m", a1),
            a3=d["range_v_ms"],
            azimuth_deg=d.get("azimuth_deg", 0.0),
            sill=1.0 if sill is None else sill,
            nugget=nugget,
        )


def materialize(v: MetaVector, prior: PriorBox,
                kind: str = "spherical") -> tuple[VariogramModel, TargetDistribution]:
    """Variogram model and target distribution implied by a vector.

    The variogram sill is set to the mixture variance so kriging variances
    and the target interval widths share one scale. Horizontal isotropy is
    applied when range_h2_m is absent.
    """
    v.validate(prior)
    gmm = v.gmm()
    target = build_target(gmm)
    model = v.variogram(kind=kind, sill=target.variance)
    return model, target


@dataclass(frozen=True)
class MisfitScore:
    """Trace-summed misfit with the per-trace correlation map (nx, ny)."""

    M: float
    trace_cc: np.ndarray

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("misfit must be non-negative")


def misfit(observed: Volume, synthetic: Volume, sigma2: float = DEFAULT_SIGMA2) -> MisfitScore:
    """Misfit score summed over all traces: (1 - CC) / (2 sigma2) per trace."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    cc = trace_cc_map(observed, synthetic)
    m = float(np.sum(1.0 - cc) / (2.0 * sigma2))
    return MisfitScore(M=max(m, 0.0), trace_cc=cc)


def log_likelihood(m: float) -> float:
    """log p proportional to -M; exact in log space for any M."""
    if m < 0:
        raise ValueError("misfit must be non-negative")
    return -float(m)


def likelihood(m: float) -> float:
    """exp(-M); may underflow to 0 for display purposes, use log_likelihood
    for computation."""
    return math.exp(log_likelihood(m))
