"""Geostatistical seismic inversion with multi-scale uncertainty quantification.

Local uncertainty comes from stochastic sequential simulation inside an
iterative trace-matching inversion loop; large-scale geological uncertainty
(variogram ranges, mixture target distribution) is inferred by swarm sampling
of a prior box with Bayesian posterior approximation over the sampled models,
yielding posterior P10/P50/P90 impedance volumes and blind-well validation.
"""

from .grid import (
    Grid3,
    TraceId,
    Volume,
    VolumeStats,
    Well,
    WellSet,
    extract_trace,
    insert_trace,
    read_volume,
    read_wells,
    volume_stats,
    write_volume,
    write_wells,
)
from .variogram import VariogramModel, covariance, experimental_variogram, gamma
from .kriging import KrigingResult, Neighborhood, collocated_cokrige, simple_krige
from .dss import (
    CoSimData,
    SimulationPlan,
    TargetDistribution,
    local_sample,
    random_path,
    simulate,
)
from .forward import Wavelet, global_cc, reflectivity, ricker, synthesize, trace_cc
from .gsi import AuxiliaryVolumes, GsiConfig, GsiReport, run_gsi, select_best
from .metaspace import (
    GmmMode,
    GmmSpec,
    MetaVector,
    MisfitScore,
    PriorBox,
    PriorParam,
    build_target,
    likelihood,
    log_likelihood,
    materialize,
    misfit,
)
from .pso import PsoConfig, SampledModel, run_sampling
from .nab import (
    PosteriorEnsemble,
    ProxySurface,
    QuantileMaps,
    coverage,
    gibbs_resample,
    marginal_ppd,
    quantile_maps,
)

__version__ = "0.1.0"
