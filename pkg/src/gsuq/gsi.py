"""Global stochastic inversion loop.

Each iteration simulates an ensemble of impedance volumes, scores every
realization's synthetic seismic against the observed data trace by trace,
and assembles auxiliary volumes from the per-trace winners. From the second
iteration on, the ensemble is co-simulated against the previous winners with
the winning correlation broadcast down each column, which pulls matched
traces forward while leaving unmatched (noisy) traces variable.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass

import numpy as np

from .dss import CoSimData, SimulationPlan, SimulationError, simulate
from .forward import Wavelet, global_cc, synthesize, trace_cc_map
from .grid import Volume, write_volume
from .kriging import DegenerateDataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuxiliaryVolumes:
    """Per-trace best impedance and its correlation, broadcast per column."""

    best_ip: Volume
    best_cc: Volume

    def __post_init__(self):
        if self.best_ip.grid.shape != self.best_cc.grid.shape:
            raise ValueError("auxiliary volumes are not congruent")
        cc = self.best_cc.values
        if cc.min() < -1.0 - 1e-6 or cc.max() > 1.0 + 1e-6:
            raise ValueError("best_cc values must lie in [-1, 1]")


@dataclass(frozen=True)
class GsiConfig:
    n_iterations: int = 6
    ensemble_size: int = 32
    cc_stop: float = 1.0
    persist: bool = False

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if not 0.0 < self.cc_stop <= 1.0:
            raise ValueError("cc_stop must be in (0, 1]")


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    global_cc_best: float
    mean_trace_cc: float
    median_trace_cc: float


@dataclass(frozen=True)
class GsiReport:
    iterations: tuple[IterationStats, ...]
    final_ensemble: tuple[Volume, ...]
    best_synthetic: Volume
    best_realization: Volume
    auxiliary: AuxiliaryVolumes


def select_best(ensemble, observed: Volume, w: Wavelet) -> AuxiliaryVolumes:
    """Auxiliary volumes from the per-trace argmax of synthetic correlation.

    Ties break toward the lowest realization index.
    """
    if len(ensemble) == 0:
        raise ValueError("ensemble must be non-empty")
    grid = observed.grid
    cc_all = np.empty((len(ensemble), grid.nx, grid.ny))
    for r, vol in enumerate(ensemble):
        if vol.grid.shape != grid.shape:
            raise ValueError("ensemble member not congruent with observed")
        cc_all[r] = trace_cc_map(synthesize(vol, w), observed)
    winner = np.argmax(cc_all, axis=0)  # first max wins ties
    best_cc_2d = np.take_along_axis(cc_all, winner[None], axis=0)[0]
    stacked = np.stack([vol.values for vol in ensemble])
    best_ip = np.take_along_axis(stacked, winner[None, :, :, None], axis=0)[0]
    best_cc = np.broadcast_to(
        best_cc_2d[:, :, None].astype(np.float32), grid.shape
    ).copy()
    return AuxiliaryVolumes(Volume(grid, best_ip), Volume(grid, best_cc))


def run_gsi(
    plan: SimulationPlan,
    observed: Volume,
    w: Wavelet,
    cfg: GsiConfig,
    diagnostics_path=None,
    persist_dir=None,
) -> GsiReport:
    """Iterate simulate / score / select until cc_stop or n_iterations.

    Iteration 1 runs without a secondary; later iterations co-simulate
    against the previous iteration's auxiliary volumes. A realization that
    fails is dropped with a warning unless the ensemble would become empty.
    """
    if plan.grid.shape != observed.grid.shape:
        raise ValueError("plan grid not congruent with observed volume")
    if plan.secondary is not None:
        raise ValueError("plan must not carry a secondary at iteration 1")

    stats: list[IterationStats] = []
    aux = None
    ensemble: list[Volume] = []
    best_vol = None
    best_syn = None
    diag_lines = []
    for it in range(1, cfg.n_iterations + 1):
        it_plan = dataclasses.replace(
            plan,
            seed=_derived_seed(plan.seed, 0xA5, it),
            n_realizations=cfg.ensemble_size,
            secondary=None if aux is None else CoSimData(aux.best_ip, aux.best_cc),
        )
        ensemble = _simulate_ensemble(it_plan, it)
        syns = [synthesize(vol, w) for vol in ensemble]
        gccs = [global_cc(s, observed) for s in syns]
        r_best = int(np.argmax(gccs))
        best_vol = ensemble[r_best]
        best_syn = syns[r_best]
        aux = select_best(ensemble, observed, w)
        cc_2d = aux.best_cc.values[:, :, 0]
        stats.append(
            IterationStats(it, float(gccs[r_best]), float(cc_2d.mean()), float(np.median(cc_2d)))
        )
        diag_lines.append(f"{it},{gccs[r_best]!r},{float(cc_2d.mean())!r}\n")
        if persist_dir is not None and cfg.persist:
            for r, vol in enumerate(ensemble):
                write_volume(os.path.join(persist_dir, f"real_{it}_{r}.gsuq"), vol)
        if gccs[r_best] >= cfg.cc_stop:
            break
    if diagnostics_path is not None:
        fresh = not os.path.exists(diagnostics_path) or os.path.getsize(diagnostics_path) == 0
        with open(diagnostics_path, "a") as f:
            if fresh:
                f.write("iter,global_cc_best,mean_trace_cc\n")
            f.writelines(diag_lines)
    return GsiReport(
        iterations=tuple(stats),
        final_ensemble=tuple(ensemble),
        best_synthetic=best_syn,
        best_realization=best_vol,
        auxiliary=aux,
    )


def ensemble_mean(ensemble) -> Volume:
    """Cell-wise mean volume of an ensemble."""
    grid = ensemble[0].grid
    acc = np.zeros(grid.shape, dtype=np.float64)
    for vol in ensemble:
        acc += vol.values
    return Volume(grid, (acc / len(ensemble)).astype(np.float32))


def ensemble_variance(ensemble) -> Volume:
    """Cell-wise population variance across an ensemble."""
    grid = ensemble[0].grid
    stacked = np.stack([vol.values.astype(np.float64) for vol in ensemble])
    return Volume(grid, stacked.var(axis=0).astype(np.float32))


def _derived_seed(seed: int, tag: int, index: int) -> int:
    gen = np.random.SeedSequence(entropy=seed, spawn_key=(tag, index))
    return int(gen.generate_state(1, dtype=np.uint64)[0])


def _simulate_ensemble(plan: SimulationPlan, iteration: int) -> list[Volume]:
    out: list[Volume] = []
    for r in range(plan.n_realizations):
        one = dataclasses.replace(
            plan, n_realizations=1, seed=_derived_seed(plan.seed, 0x5A, r)
        )
        try:
            out.extend(simulate(one))
        except (SimulationError, DegenerateDataError) as exc:
            logger.warning("iteration %d realization %d failed: %s", iteration, r, exc)
    if not out:
        raise SimulationError(f"iteration {iteration}: every realization failed")
    return out
