"""Particle swarm sampling of the metaparameter space.

Particles live in the unit box (each prior dimension normalized to [0, 1] so
one coefficient set serves meters, impedances and fractions alike) and are
reflected at the bounds with a velocity sign flip, which avoids the boundary
pile-up that clamping would feed into the posterior approximation. The full
evaluation history is returned, not just the bests: the posterior step needs
every sampled model.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .metaspace import MetaVector, PriorBox

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 20
    n_iterations: int = 25
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    restart_at: tuple[int, ...] = ()
    restart_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 1 or self.n_iterations < 1:
            raise ValueError("swarm_size and n_iterations must be >= 1")
        if not 0.0 <= self.inertia < 1.0:
            raise ValueError("inertia must be in [0, 1)")
        if self.cognitive <= 0 or self.social <= 0:
            raise ValueError("cognitive and social coefficients must be positive")
        if not 0.0 < self.restart_fraction <= 1.0:
            raise ValueError("restart_fraction must be in (0, 1]")


@dataclass(frozen=True)
class Particle:
    """Snapshot of one particle in original (denormalized) units."""

    position: MetaVector
    velocity: np.ndarray
    best_position: MetaVector
    best_m: float


@dataclass
class Swarm:
    """Mutable swarm state in normalized [0, 1] coordinates."""

    positions: np.ndarray       # (n, d)
    velocities: np.ndarray      # (n, d)
    misfits: np.ndarray         # (n,) current-position misfits
    pbest_positions: np.ndarray
    pbest_m: np.ndarray

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    def gbest_index(self) -> int:
        return int(np.argmin(self.pbest_m))

    def mean_pairwise_distance(self) -> float:
        x = self.positions
        d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=2)
        n = x.shape[0]
        if n < 2:
            return 0.0
        iu = np.triu_indices(n, k=1)
        return float(np.sqrt(d2[iu]).mean())

    def particle(self, i: int, prior: PriorBox) -> Particle:
        lo, hi = prior.bounds()
        return Particle(
            position=MetaVector(prior.names, tuple(lo + self.positions[i] * (hi - lo))),
            velocity=self.velocities[i].copy(),
            best_position=MetaVector(prior.names, tuple(lo + self.pbest_positions[i] * (hi - lo))),
            best_m=float(self.pbest_m[i]),
        )


@dataclass(frozen=True)
class SampledModel:
    """One evaluated metaparameter vector; log_likelihood is exactly -M."""

    id: int
    position: MetaVector
    M: float
    iteration: int

    @property
    def log_likelihood(self) -> float:
        return -self.M


def _reflect(x: np.ndarray, v: np.ndarray) -> None:
    """Fold positions into [0, 1] in place, flipping velocity on reflection."""
    for _ in range(100):
        below = x < 0.0
        above = x > 1.0
        if not (below.any() or above.any()):
            return
        x[below] = -x[below]
        v[below] = -v[below]
        x[above] = 2.0 - x[above]
        v[above] = -v[above]
    np.clip(x, 0.0, 1.0, out=x)


def step(swarm: Swarm, gbest_position: np.ndarray, cfg: PsoConfig,
         rng: np.random.Generator) -> Swarm:
    """One velocity/position update, reflected into the unit box."""
    n, d = swarm.positions.shape
    u1 = rng.random((n, d))
    u2 = rng.random((n, d))
    vel = (
        cfg.inertia * swarm.velocities
        + cfg.cognitive * u1 * (swarm.pbest_positions - swarm.positions)
        + cfg.social * u2 * (gbest_position[None, :] - swarm.positions)
    )
    pos = swarm.positions + vel
    _reflect(pos, vel)
    return Swarm(
        positions=pos,
        velocities=vel,
        misfits=np.full(n, np.inf),
        pbest_positions=swarm.pbest_positions.copy(),
        pbest_m=swarm.pbest_m.copy(),
    )


def run_sampling(prior: PriorBox, evaluator, cfg: PsoConfig) -> list[SampledModel]:
    """Adaptive sampling loop; returns every evaluated model in order.

    `evaluator` maps a MetaVector to a misfit M. A failing evaluation gets
    one fresh uniform redraw for that particle, then the failure is fatal.
    Iterations listed in cfg.restart_at replace the worst restart_fraction
    of particles (by personal best) with fresh uniform draws before the
    velocity update.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    lo, hi = prior.bounds()
    names = prior.names
    span = hi - lo

    def normalize(vec: MetaVector) -> np.ndarray:
        return (vec.as_array() - lo) / span

    def denorm_vec(x: np.ndarray) -> MetaVector:
        return MetaVector(names, tuple(lo + x * span))

    def evaluate(x: np.ndarray, particle_idx: int) -> tuple[np.ndarray, float]:
        try:
            return x, float(evaluator(denorm_vec(x)))
        except Exception as exc:  # noqa: BLE001 - one redraw allowed per spec'd contract
            logger.warning("evaluator failed for particle %d (%s); redrawing", particle_idx, exc)
            x = normalize(prior.sample(rng))
            return x, float(evaluator(denorm_vec(x)))

    n, d = cfg.swarm_size, prior.dim
    positions = np.stack([normalize(prior.sample(rng)) for _ in range(n)])
    swarm = Swarm(
        positions=positions,
        velocities=np.zeros((n, d)),
        misfits=np.full(n, np.inf),
        pbest_positions=positions.copy(),
        pbest_m=np.full(n, np.inf),
    )

    history: list[SampledModel] = []
    next_id = 0
    for it in range(1, cfg.n_iterations + 1):
        if it > 1:
            injected = np.zeros(n, dtype=bool)
            if it in cfg.restart_at:
                n_inject = max(1, int(round(cfg.restart_fraction * n)))
                worst = np.argsort(swarm.pbest_m, kind="stable")[::-1][:n_inject]
                injected[worst] = True
            gbest = swarm.pbest_positions[swarm.gbest_index()].copy()
            stepped = step(swarm, gbest, cfg, rng)
            if injected.any():
                for i in np.nonzero(injected)[0]:
                    stepped.positions[i] = normalize(prior.sample(rng))
                    stepped.velocities[i] = 0.0
                    stepped.pbest_positions[i] = stepped.positions[i]
                    stepped.pbest_m[i] = np.inf
            swarm = stepped
        for i in range(n):
            x, m = evaluate(swarm.positions[i].copy(), i)
            swarm.positions[i] = x
            swarm.misfits[i] = m
            if m < swarm.pbest_m[i]:
                swarm.pbest_m[i] = m
                swarm.pbest_positions[i] = x
            history.append(SampledModel(id=next_id, position=denorm_vec(x), M=m, iteration=it))
            next_id += 1
    return history


def write_history(path, history, names) -> None:
    """CSV persistence: id,iteration,<param columns>,misfit."""
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["id", "iteration", *names, "misfit"])
        for m in history:
            out.writerow([m.id, m.iteration, *[repr(v) for v in m.position.values], repr(m.M)])


def read_history(path) -> tuple[list[SampledModel], tuple[str, ...]]:
    """Inverse of :func:`write_history`; returns (models, parameter names)."""
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd)
        if header[:2] != ["id", "iteration"] or header[-1] != "misfit":
            raise ValueError(f"{path}: unexpected history header {header}")
        names = tuple(header[2:-1])
        out = []
        for row in rd:
            if not row:
                continue
            out.append(
                SampledModel(
                    id=int(row[0]),
                    iteration=int(row[1]),
                    position=MetaVector(names, tuple(float(v) for v in row[2:-1])),
                    M=float(row[-1]),
                )
            )
    return out, names
