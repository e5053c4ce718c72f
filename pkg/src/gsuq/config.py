"""Run configuration: TOML ingestion and validation.

Keys carry explicit units in their names (range_h_m, range_v_ms, dz_ms,
mean_f1_kpasm, var_f1_kpasm2, prop_f1_pct). The [prior] table defines the
uniform metaparameter box for multi-scale runs; the [model] table pins the
fixed large-scale model used by conventional inversion, either as an explicit
mixture ([[model.gmm]] entries) or estimated from the conditioning wells
(target_from_wells = true).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .grid import Grid3
from .gsi import GsiConfig
from .kriging import Neighborhood
from .metaspace import DEFAULT_SIGMA2, PriorBox, PriorParam
from .pso import PsoConfig
from .synthetic import FaciesStats, SyntheticSpec


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class FixedModelConfig:
    """Large-scale model for conventional runs (no metaparameter sampling)."""

    kind: str = "spherical"
    range_h_m: float = 750.0
    range_h2_m: float | None = None
    range_v_ms: float = 40.0
    azimuth_deg: float = 0.0
    nugget_frac: float = 0.0
    target_from_wells: bool = False
    gmm: tuple[tuple[float, float, float], ...] = ()  # (mean, std, weight)

    def __post_init__(self):
        if not 0.0 <= self.nugget_frac < 1.0:
            raise ConfigError("nugget_frac must be in [0, 1)")
        if not self.target_from_wells and not self.gmm:
            raise ConfigError("[model] needs [[model.gmm]] modes or target_from_wells = true")


@dataclass(frozen=True)
class MultiscaleConfig:
    inner_iterations: int = 2
    inner_ensemble: int = 5
    n_walkers: int = 8
    n_resamples: int = 10000
    marginal_bins: int = 32

    def __post_init__(self):
        if min(self.inner_iterations, self.inner_ensemble, self.n_walkers,
               self.n_resamples, self.marginal_bins) < 1:
            raise ConfigError("[multiscale] values must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    sigma2: float = DEFAULT_SIGMA2
    blind_wells: tuple[str, ...] = ()
    paths: dict[str, str] = field(default_factory=dict)
    grid: Grid3 | None = None
    gsi: GsiConfig = GsiConfig()
    neighborhood: Neighborhood = Neighborhood()
    model: FixedModelConfig | None = None
    pso: PsoConfig = PsoConfig()
    multiscale: MultiscaleConfig = MultiscaleConfig()
    prior: PriorBox | None = None
    synthetic: SyntheticSpec | None = None
    base_dir: str = "."

    def path(self, key: str) -> str:
        if key not in self.paths:
            raise ConfigError(f"[paths] is missing {key!r}")
        p = self.paths[key]
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    def require(self, *attrs) -> None:
        for a in attrs:
            if getattr(self, a) is None:
                raise ConfigError(f"configuration section [{a}] is required for this mode")


def _section(data: dict, name: str) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(sec)


def _build(cls, sec: dict, what: str):
    try:
        return cls(**sec)
    except TypeError as exc:
        raise ConfigError(f"[{what}]: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"[{what}]: {exc}") from exc


def _grid_from(sec: dict) -> Grid3:
    try:
        return Grid3(
            nx=int(sec["nx"]), ny=int(sec["ny"]), nz=int(sec["nz"]),
            dx=float(sec.get("dx_m", 25.0)),
            dy=float(sec.get("dy_m", 25.0)),
            dz=float(sec.get("dz_ms", 4.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"[grid] is missing {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from exc


def _model_from(sec: dict) -> FixedModelConfig:
    gmm = sec.pop("gmm", [])
    modes = []
    for i, mode in enumerate(gmm):
        try:
            mean = float(mode["mean_kpasm"])
            if "var_kpasm2" in mode:
                std = float(mode["var_kpasm2"]) ** 0.5
            else:
                std = float(mode["std_kpasm"])
            modes.append((mean, std, float(mode["weight"])))
        except KeyError as exc:
            raise ConfigError(f"[[model.gmm]] entry {i} is missing {exc}") from exc
    sec["gmm"] = tuple(modes)
    return _build(FixedModelConfig, sec, "model")


def _prior_from(sec: dict) -> PriorBox:
    params = {}
    for name, bounds in sec.items():
        if not (isinstance(bounds, (list, tuple)) and len(bounds) == 2):
            raise ConfigError(f"[prior] {name} must be a two-element [lo, hi] array")
        try:
            params[name] = PriorParam(float(bounds[0]), float(bounds[1]))
        except ValueError as exc:
            raise ConfigError(f"[prior] {name}: {exc}") from exc
    try:
        return PriorBox(params)
    except ValueError as exc:
        raise ConfigError(f"[prior]: {exc}") from exc


def _synthetic_from(sec: dict) -> SyntheticSpec:
    grid = _grid_from(_section(sec, "grid")) if "grid" in sec else Grid3(60, 70, 20)
    kwargs = {k: v for k, v in sec.items() if k not in ("grid", "background", "channel")}
    for facies in ("background", "channel"):
        if facies in sec:
            f = sec[facies]
            try:
                kwargs[facies] = FaciesStats(float(f["mean_kpasm"]), float(f["std_kpasm"]))
            except KeyError as exc:
                raise ConfigError(f"[synthetic.{facies}] is missing {exc}") from exc
    kwargs["grid"] = grid
    return _build(SyntheticSpec, kwargs, "synthetic")


def load_config(path) -> RunConfig:
    """Parse and structurally validate a TOML run configuration."""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    base_dir = os.path.dirname(os.path.abspath(path))
    pso_sec = _section(data, "pso")
    if "restart_at" in pso_sec:
        pso_sec["restart_at"] = tuple(int(v) for v in pso_sec["restart_at"])
    nbh_sec = _section(data, "neighborhood")
    if "search_radii" in nbh_sec:
        nbh_sec["search_radii"] = tuple(float(v) for v in nbh_sec["search_radii"])

    cfg = RunConfig(
        seed=int(data.get("seed", 0)),
        sigma2=float(data.get("sigma2", DEFAULT_SIGMA2)),
        blind_wells=tuple(data.get("blind_wells", ())),
        paths={k: str(v) for k, v in _section(data, "paths").items()},
        grid=_grid_from(_section(data, "grid")) if "grid" in data else None,
        gsi=_build(GsiConfig, _section(data, "gsi"), "gsi"),
        neighborhood=_build(Neighborhood, nbh_sec, "neighborhood"),
        model=_model_from(_section(data, "model")) if "model" in data else None,
        pso=_build(PsoConfig, pso_sec, "pso"),
        multiscale=_build(MultiscaleConfig, _section(data, "multiscale"), "multiscale"),
        prior=_prior_from(_section(data, "prior")) if "prior" in data else None,
        synthetic=_synthetic_from(_section(data, "synthetic")) if "synthetic" in data else None,
        base_dir=base_dir,
    )
    if cfg.sigma2 <= 0:
        raise ConfigError("sigma2 must be positive")
    return cfg


def validate_inversion_inputs(cfg: RunConfig, wells) -> None:
    """Checks shared by the inversion modes once inputs are loaded."""
    known = set(wells.names())
    missing = [w for w in cfg.blind_wells if w not in known]
    if missing:
        raise ConfigError(f"blind wells not present in well file: {missing}")
    conditioning = known - set(cfg.blind_wells)
    if not conditioning:
        raise ConfigError("no conditioning wells remain after excluding blind wells")
