"""Regular-grid data model, volume and well I/O, trace addressing, summary stats.

A volume lives on a regular 3-D grid: `nx` by `ny` columns of `nz` samples.
Horizontal cell sizes are in meters, the vertical cell size is in
milliseconds two-way time. In memory values are float32 with shape
(nx, ny, nz), so a trace ``values[i, j, :]`` is contiguous; sequential
simulation and trace scoring are trace-dominated.

On disk a volume is stored in the GSUQ binary format::

    magic   b"GSUQ"                  4 bytes
    version u16 = 1                  little-endian
    nx, ny, nz                       u32 LE each
    dx, dy, dz                       f32 LE each
    payload nx*ny*nz f32 LE,         k fastest, then i, then j

Wells are CSV files with header ``well,i,j,k,ip``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"GSUQ"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIIIfff")


class VolumeFormatError(ValueError):
    """Malformed magic, header fields, or inconsistent dimensions."""


class VolumeTruncatedError(VolumeFormatError):
    """Payload shorter than the header-declared size."""


class VolumeDataError(ValueError):
    """Payload contains non-finite values."""


@dataclass(frozen=True)
class Grid3:
    """Regular grid geometry: cell counts and physical cell sizes."""

    nx: int
    ny: int
    nz: int
    dx: float = 25.0
    dy: float = 25.0
    dz: float = 4.0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) <= 0:
            raise ValueError(f"cell counts must be positive, got {(self.nx, self.ny, self.nz)}")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError(f"cell sizes must be positive, got {(self.dx, self.dy, self.dz)}")

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def n_traces(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    def cell_sizes(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)


@dataclass(frozen=True)
class TraceId:
    """Column address (i, j) of one trace."""

    i: int
    j: int


@dataclass(frozen=True)
class Volume:
    """Immutable 3-D scalar field on a :class:`Grid3`.

    ``values`` has shape (nx, ny, nz), dtype float32, and is marked
    read-only; operations that modify a volume return a new one.
    """

    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float32)
        if arr.shape != self.grid.shape:
            if arr.size == self.grid.n_cells:
                arr = arr.reshape(self.grid.shape)
            else:
                raise ValueError(
                    f"values size {arr.size} does not match grid {self.grid.shape}"
                )
        if not np.isfinite(arr).all():
            raise VolumeDataError("volume contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def filled(cls, grid: Grid3, value: float) -> "Volume":
        return cls(grid, np.full(grid.shape, value, dtype=np.float32))

    def congruent_with(self, other: "Volume") -> bool:
        return self.grid.shape == other.grid.shape


@dataclass(frozen=True)
class Well:
    """One well snapped to grid column (i, j) with impedance samples by layer."""

    name: str
    i: int
    j: int
    samples: tuple[tuple[int, float], ...]  # (k, ip), at most one sample per k


@dataclass(frozen=True)
class WellSet:
    wells: tuple[Well, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for w in self.wells:
            ks = [k for k, _ in w.samples]
            if len(ks) != len(set(ks)):
                raise ValueError(f"well {w.name!r} has duplicate layer samples")
            if any(ip <= 0 for _, ip in w.samples):
                raise ValueError(f"well {w.name!r} has non-positive impedance")

    def validate_against(self, grid: Grid3) -> None:
        for w in self.wells:
            if not (0 <= w.i < grid.nx and 0 <= w.j < grid.ny):
                raise ValueError(f"well {w.name!r} column ({w.i},{w.j}) outside grid")
            for k, _ in w.samples:
                if not 0 <= k < grid.nz:
                    raise ValueError(f"well {w.name!r} sample layer {k} outside grid")

    def names(self) -> list[str]:
        return [w.name for w in self.wells]

    def subset(self, names) -> "WellSet":
        wanted = set(names)
        return WellSet(tuple(w for w in self.wells if w.name in wanted))

    def drop(self, names) -> "WellSet":
        unwanted = set(names)
        return WellSet(tuple(w for w in self.wells if w.name not in unwanted))

    def n_samples(self) -> int:
        return sum(len(w.samples) for w in self.wells)


@dataclass(frozen=True)
class VolumeStats:
    mean: float
    variance: float  # population variance (divide by N)
    min: float
    max: float


def volume_stats(v: Volume) -> VolumeStats:
    """Population statistics of all cells."""
    vals = v.values.astype(np.float64)
    return VolumeStats(
        mean=float(vals.mean()),
        variance=float(vals.var()),
        min=float(vals.min()),
        max=float(vals.max()),
    )


def write_volume(path, v: Volume) -> None:
    g = v.grid
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, g.nx, g.ny, g.nz, g.dx, g.dy, g.dz)
    # file order is k fastest, then i, then j
    payload = np.ascontiguousarray(v.values.transpose(1, 0, 2))
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload.astype("<f4", copy=False).tobytes())


def read_volume(path) -> Volume:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise VolumeFormatError(f"{path}: file shorter than header")
    magic, version, nx, ny, nz, dx, dy, dz = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise VolumeFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VolumeFormatError(f"{path}: unsupported version {version}")
    if min(nx, ny, nz) <= 0 or min(dx, dy, dz) <= 0:
        raise VolumeFormatError(f"{path}: invalid header dims {(nx, ny, nz, dx, dy, dz)}")
    expected = nx * ny * nz * 4
    body = raw[_HEADER.size:]
    if len(body) < expected:
        raise VolumeTruncatedError(
            f"{path}: payload {len(body)} bytes, expected {expected}"
        )
    if len(body) > expected:
        raise VolumeFormatError(f"{path}: trailing bytes after payload")
    flat = np.frombuffer(body, dtype="<f4")
    if not np.isfinite(flat).all():
        raise VolumeDataError(f"{path}: payload contains non-finite values")
    values = flat.reshape(ny, nx, nz).transpose(1, 0, 2)
    return Volume(Grid3(nx, ny, nz, dx, dy, dz), values)


def extract_trace(v: Volume, t: TraceId) -> np.ndarray:
    """The k-ordered sample column at (t.i, t.j), as a float32 copy."""
    if not (0 <= t.i < v.grid.nx and 0 <= t.j < v.grid.ny):
        raise IndexError(f"trace ({t.i},{t.j}) outside grid {v.grid.shape[:2]}")
    return v.values[t.i, t.j, :].copy()


def insert_trace(v: Volume, t: TraceId, trace) -> Volume:
    """A new volume equal to `v` with the column at `t` replaced."""
    if not (0 <= t.i < v.grid.nx and 0 <= t.j < v.grid.ny):
        raise IndexError(f"trace ({t.i},{t.j}) outside grid {v.grid.shape[:2]}")
    trace = np.asarray(trace, dtype=np.float32)
    if trace.shape != (v.grid.nz,):
        raise ValueError(f"trace length {trace.shape} does not match nz={v.grid.nz}")
    values = v.values.copy()
    values[t.i, t.j, :] = trace
    return Volume(v.grid, values)


def write_wells(path, ws: WellSet) -> None:
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["well", "i", "j", "k", "ip"])
        for w in ws.wells:
            for k, ip in w.samples:
                out.writerow([w.name, w.i, w.j, k, repr(float(ip))])


def read_wells(path) -> WellSet:
    by_name: dict[str, dict] = {}
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd, None)
        if header is None or [h.strip() for h in header] != ["well", "i", "j", "k", "ip"]:
            raise ValueError(f"{path}: expected header well,i,j,k,ip, got {header}")
        for row in rd:
            if not row:
                continue
            name, i, j, k, ip = row
            rec = by_name.setdefault(name, {"i": int(i), "j": int(j), "samples": []})
            if rec["i"] != int(i) or rec["j"] != int(j):
                raise ValueError(f"{path}: well {name!r} has inconsistent column indices")
            rec["samples"].append((int(k), float(ip)))
    wells = tuple(
        Well(name, rec["i"], rec["j"], tuple(sorted(rec["samples"])))
        for name, rec in by_name.items()
    )
    return WellSet(wells)
