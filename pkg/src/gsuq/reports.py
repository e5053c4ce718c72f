"""Plot-ready CSV emission and run summaries."""

from __future__ import annotations

import csv

import numpy as np

from .grid import Volume, WellSet
from .nab import PosteriorEnsemble, QuantileMaps


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    allv = np.concatenate([a, b])
    ca = np.searchsorted(a, allv, side="right") / a.size
    cb = np.searchsorted(b, allv, side="right") / b.size
    return float(np.abs(ca - cb).max())


def envelope_coverage(ensemble, blind: WellSet) -> float:
    """Fraction of blind samples inside the ensemble min-max envelope."""
    if not ensemble:
        raise ValueError("ensemble must be non-empty")
    stacked = np.stack([v.values for v in ensemble])
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    total = 0
    inside = 0
    for w in blind.wells:
        for k, ip in w.samples:
            total += 1
            s = np.float32(ip)
            if lo[w.i, w.j, k] <= s <= hi[w.i, w.j, k]:
                inside += 1
    return inside / total if total else 0.0


def write_misfit_vs_iteration(path, history) -> None:
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["id", "iteration", "misfit"])
        for m in history:
            out.writerow([m.id, m.iteration, repr(m.M)])


def write_parameter_vs_iteration(path, history, names) -> None:
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["id", "iteration", *names])
        for m in history:
            out.writerow([m.id, m.iteration, *[repr(v) for v in m.position.values]])


def write_parameter_vs_misfit(path, history, names, ens: PosteriorEnsemble) -> None:
    """History joined with posterior weights: the posterior-colored scatter."""
    weight_of = dict(zip((int(i) for i in ens.surface_ids), ens.weights))
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["id", *names, "misfit", "weight"])
        for m in history:
            out.writerow(
                [m.id, *[repr(v) for v in m.position.values], repr(m.M),
                 repr(float(weight_of.get(m.id, 0.0)))]
            )


def write_blind_well_envelope(path, blind: WellSet, true_ip: Volume | None,
                              maps: QuantileMaps) -> None:
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["well", "k", "true_ip", "p10", "p50", "p90"])
        for w in blind.wells:
            for k, ip in w.samples:
                out.writerow([
                    w.name, k, repr(float(ip)),
                    repr(float(maps.p10.values[w.i, w.j, k])),
                    repr(float(maps.p50.values[w.i, w.j, k])),
                    repr(float(maps.p90.values[w.i, w.j, k])),
                ])


def write_blind_well_traces(path, well, true_trace, realizations) -> None:
    """One blind well against every final-iteration realization trace."""
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["well", "k", "true_ip", *[f"real_{r}" for r in range(len(realizations))]])
        for k, ip in zip(range(len(true_trace)), true_trace):
            out.writerow([well.name, k, repr(float(ip)),
                          *[repr(float(tr[k])) for tr in realizations]])


def write_histogram_comparison(path, references: dict, n_bins: int = 48) -> None:
    """Aligned density histograms of several value sets on a shared range."""
    lo = min(float(np.min(v)) for v in references.values())
    hi = max(float(np.max(v)) for v in references.values())
    edges = np.linspace(lo, hi, n_bins + 1)
    width = edges[1] - edges[0]
    cols = {}
    for name, vals in references.items():
        counts, _ = np.histogram(np.asarray(vals, dtype=np.float64).ravel(), bins=edges)
        cols[name] = counts / (counts.sum() * width) if counts.sum() else counts
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["bin_lo", "bin_hi", *[f"{name}_density" for name in cols]])
        for i in range(n_bins):
            out.writerow([repr(float(edges[i])), repr(float(edges[i + 1])),
                          *[repr(float(cols[name][i])) for name in cols]])


def write_summary(path, lines) -> None:
    with open(path, "w") as f:
        for line in lines:
            f.write(line.rstrip("\n") + "\n")
