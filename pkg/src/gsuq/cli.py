"""Command-line orchestration of the inversion workflows.

Subcommands:

    synth              generate a synthetic dataset (truth, seismic, wells)
    invert-gsi         conventional inversion with a fixed large-scale model
    invert-multiscale  swarm-sampled metaparameters + posterior quantiles
    nab                posterior post-processing of an existing history
    compare            conventional vs multi-scale on the same inputs

Every subcommand takes --config, --out and an optional --seed override.
Exit codes: 0 success, 2 configuration error, 1 any other failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import traceback

import numpy as np

from .config import ConfigError, RunConfig, load_config, validate_inversion_inputs
from .dss import SimulationPlan, TargetDistribution
from .forward import read_wavelet, ricker, write_wavelet
from .grid import WellSet, read_volume, read_wells, volume_stats, write_volume, write_wells
from .gsi import ensemble_mean, run_gsi
from .metaspace import GmmMode, GmmSpec, build_target, materialize, misfit
from .nab import (
    ProxySurface,
    coverage,
    gibbs_resample,
    marginal_ppd,
    quantile_maps,
    write_marginal,
    write_weights,
)
from .pso import read_history, run_sampling, write_history
from .reports import (
    envelope_coverage,
    ks_two_sample,
    write_blind_well_envelope,
    write_blind_well_traces,
    write_histogram_comparison,
    write_misfit_vs_iteration,
    write_parameter_vs_iteration,
    write_parameter_vs_misfit,
    write_summary,
)
from .variogram import VariogramModel


def _derive_seed(seed: int, tag: int) -> int:
    gen = np.random.SeedSequence(entropy=seed, spawn_key=(tag,))
    return int(gen.generate_state(1, dtype=np.uint64)[0])


def _load_inputs(cfg: RunConfig):
    observed = read_volume(cfg.path("observed"))
    wells = read_wells(cfg.path("wells"))
    wavelet = read_wavelet(cfg.path("wavelet"))
    wells.validate_against(observed.grid)
    validate_inversion_inputs(cfg, wells)
    if cfg.grid is not None and cfg.grid.shape != observed.grid.shape:
        raise ConfigError(
            f"[grid] {cfg.grid.shape} does not match observed volume {observed.grid.shape}"
        )
    conditioning = wells.drop(cfg.blind_wells)
    blind = wells.subset(cfg.blind_wells)
    return observed, conditioning, blind, wavelet


def _fixed_model(cfg: RunConfig, conditioning: WellSet):
    mc = cfg.model
    if mc.target_from_wells:
        samples = [ip for w in conditioning.wells for _, ip in w.samples]
        target = TargetDistribution.from_samples(samples)
    else:
        total = sum(wt for _, _, wt in mc.gmm)
        modes = tuple(GmmMode(mu, sd, wt / total) for mu, sd, wt in mc.gmm)
        target = build_target(GmmSpec(modes))
    var = target.variance
    model = VariogramModel(
        kind=mc.kind,
        a1=mc.range_h_m,
        a2=mc.range_h_m if mc.range_h2_m is None else mc.range_h2_m,
        a3=mc.range_v_ms,
        azimuth_deg=mc.azimuth_deg,
        sill=(1.0 - mc.nugget_frac) * var,
        nugget=mc.nugget_frac * var,
    )
    return model, target


def cmd_synth(cfg: RunConfig, out: str) -> None:
    from .synthetic import generate_synthetic

    cfg.require("synthetic")
    spec = dataclasses.replace(cfg.synthetic, seed=cfg.seed)
    data = generate_synthetic(spec)
    write_volume(os.path.join(out, "true_ip.gsuq"), data.true_ip)
    write_volume(os.path.join(out, "observed.gsuq"), data.observed)
    write_wells(os.path.join(out, "wells.csv"), data.wells)
    write_wavelet(os.path.join(out, "wavelet.csv"), data.wavelet)
    st = volume_stats(data.true_ip)
    write_summary(
        os.path.join(out, "synth_stats.txt"),
        [
            f"grid = {spec.grid.shape}",
            f"true_ip mean = {st.mean:.2f}",
            f"true_ip variance = {st.variance:.2f}",
            f"true_ip min = {st.min:.2f}",
            f"true_ip max = {st.max:.2f}",
            f"wells = {len(data.wells.wells)}",
            f"noise_level = {spec.noise_level}",
        ],
    )


def cmd_invert_gsi(cfg: RunConfig, out: str) -> None:
    cfg.require("model")
    observed, conditioning, blind, wavelet = _load_inputs(cfg)
    model, target = _fixed_model(cfg, conditioning)
    plan = SimulationPlan(
        grid=observed.grid,
        model=model,
        target=target,
        seed=cfg.seed,
        neighborhood=cfg.neighborhood,
        conditioning=conditioning,
    )
    report = run_gsi(
        plan, observed, wavelet, cfg.gsi,
        diagnostics_path=os.path.join(out, "gsi_diagnostics.csv"),
        persist_dir=out,
    )
    write_volume(os.path.join(out, "best_ip.gsuq"), report.best_realization)
    write_volume(os.path.join(out, "best_synthetic.gsuq"), report.best_synthetic)
    write_volume(os.path.join(out, "ensemble_mean.gsuq"), ensemble_mean(report.final_ensemble))
    for w in blind.wells:
        traces = [vol.values[w.i, w.j, :] for vol in report.final_ensemble]
        true_trace = np.full(observed.grid.nz, np.nan)
        for k, ip in w.samples:
            true_trace[k] = ip
        write_blind_well_traces(
            os.path.join(out, f"blind_{w.name}.csv"), w, true_trace, traces
        )
    final = report.iterations[-1]
    write_summary(
        os.path.join(out, "summary.txt"),
        [
            f"iterations = {final.iteration}",
            f"global_cc_best = {final.global_cc_best:.6f}",
            f"mean_trace_cc = {final.mean_trace_cc:.6f}",
            f"median_trace_cc = {final.median_trace_cc:.6f}",
            f"ensemble_size = {len(report.final_ensemble)}",
        ],
    )


def _multiscale_evaluator(cfg, observed, conditioning, wavelet, volumes_out):
    inner = dataclasses.replace(
        cfg.gsi,
        n_iterations=cfg.multiscale.inner_iterations,
        ensemble_size=cfg.multiscale.inner_ensemble,
        persist=False,
    )
    inner_seed = _derive_seed(cfg.seed, 0x11)

    def evaluate(vec):
        model, target = materialize(vec, cfg.prior)
        plan = SimulationPlan(
            grid=observed.grid,
            model=model,
            target=target,
            seed=inner_seed,  # common random numbers across evaluations
            neighborhood=cfg.neighborhood,
            conditioning=conditioning,
        )
        report = run_gsi(plan, observed, wavelet, inner)
        score = misfit(observed, report.best_synthetic, cfg.sigma2)
        volumes_out.append(ensemble_mean(report.final_ensemble))
        return score.M

    return evaluate


def cmd_invert_multiscale(cfg: RunConfig, out: str) -> None:
    cfg.require("model", "prior")
    observed, conditioning, blind, wavelet = _load_inputs(cfg)
    volumes: list = []
    evaluate = _multiscale_evaluator(cfg, observed, conditioning, wavelet, volumes)
    pso_cfg = dataclasses.replace(cfg.pso, seed=cfg.seed)
    history = run_sampling(cfg.prior, evaluate, pso_cfg)

    names = cfg.prior.names
    write_history(os.path.join(out, "history.csv"), history, names)
    model_volumes = {}
    for m, vol in zip(history, volumes):
        model_volumes[m.id] = vol
        write_volume(os.path.join(out, f"model_{m.id}.gsuq"), vol)

    surface = ProxySurface.from_history(history, cfg.prior)
    ens = gibbs_resample(
        surface,
        n_walkers=cfg.multiscale.n_walkers,
        n_steps=max(1, -(-cfg.multiscale.n_resamples // cfg.multiscale.n_walkers)),
        seed=_derive_seed(cfg.seed, 0x22),
    )
    write_weights(os.path.join(out, "weights.csv"), ens)
    for d, name in enumerate(names):
        write_marginal(
            os.path.join(out, f"marginal_{name}.csv"),
            marginal_ppd(ens, surface, d, cfg.multiscale.marginal_bins),
        )
    maps = quantile_maps(ens, model_volumes)
    write_volume(os.path.join(out, "p10.gsuq"), maps.p10)
    write_volume(os.path.join(out, "p50.gsuq"), maps.p50)
    write_volume(os.path.join(out, "p90.gsuq"), maps.p90)

    cov = coverage(maps, blind) if blind.wells else float("nan")
    write_misfit_vs_iteration(os.path.join(out, "misfit_vs_iteration.csv"), history)
    write_parameter_vs_iteration(os.path.join(out, "parameter_vs_iteration.csv"), history, names)
    write_parameter_vs_misfit(os.path.join(out, "parameter_vs_misfit.csv"), history, names, ens)
    if blind.wells:
        write_blind_well_envelope(os.path.join(out, "blind_well_envelope.csv"), blind, None, maps)
    all_well_values = [ip for w in (*conditioning.wells, *blind.wells) for _, ip in w.samples]
    pooled = np.concatenate([maps.p10.values.ravel(), maps.p50.values.ravel(),
                             maps.p90.values.ravel()])
    write_histogram_comparison(
        os.path.join(out, "histogram_comparison.csv"),
        {"all_wells": np.array(all_well_values), "quantile_models": pooled},
    )
    map_model = next(m for m in history if m.id == ens.map_id)
    write_summary(
        os.path.join(out, "summary.txt"),
        [
            f"evaluations = {len(history)}",
            f"best_misfit = {min(m.M for m in history):.6f}",
            f"map_id = {ens.map_id}",
            f"map_weight = {ens.weight_of(ens.map_id):.4f}",
            *[f"map.{n} = {v!r}" for n, v in zip(names, map_model.position.values)],
            f"blind_coverage_p10_p90 = {cov:.4f}",
        ],
    )


def cmd_nab(cfg: RunConfig, out: str) -> None:
    cfg.require("prior")
    history, names = read_history(cfg.path("history"))
    if names != cfg.prior.names:
        raise ConfigError(
            f"history parameters {names} do not match [prior] {cfg.prior.names}"
        )
    surface = ProxySurface.from_history(history, cfg.prior)
    ens = gibbs_resample(
        surface,
        n_walkers=cfg.multiscale.n_walkers,
        n_steps=max(1, -(-cfg.multiscale.n_resamples // cfg.multiscale.n_walkers)),
        seed=cfg.seed,
    )
    write_weights(os.path.join(out, "weights.csv"), ens)
    for d, name in enumerate(names):
        write_marginal(
            os.path.join(out, f"marginal_{name}.csv"),
            marginal_ppd(ens, surface, d, cfg.multiscale.marginal_bins),
        )
    lines = [
        f"models = {surface.n_models}",
        f"map_id = {ens.map_id}",
        f"map_weight = {ens.weight_of(ens.map_id):.4f}",
    ]
    if "model_volumes" in cfg.paths:
        vol_dir = cfg.path("model_volumes")
        model_volumes = {
            m.id: read_volume(os.path.join(vol_dir, f"model_{m.id}.gsuq"))
            for m in history
        }
        maps = quantile_maps(ens, model_volumes)
        write_volume(os.path.join(out, "p10.gsuq"), maps.p10)
        write_volume(os.path.join(out, "p50.gsuq"), maps.p50)
        write_volume(os.path.join(out, "p90.gsuq"), maps.p90)
        if "wells" in cfg.paths and cfg.blind_wells:
            wells = read_wells(cfg.path("wells"))
            cov = coverage(maps, wells.subset(cfg.blind_wells))
            lines.append(f"blind_coverage_p10_p90 = {cov:.4f}")
    write_summary(os.path.join(out, "summary.txt"), lines)


def cmd_compare(cfg: RunConfig, out: str) -> None:
    if not cfg.blind_wells:
        raise ConfigError("compare mode needs blind_wells to validate against")
    conv_dir = os.path.join(out, "conventional")
    multi_dir = os.path.join(out, "multiscale")
    os.makedirs(conv_dir, exist_ok=True)
    os.makedirs(multi_dir, exist_ok=True)
    cmd_invert_gsi(cfg, conv_dir)
    cmd_invert_multiscale(cfg, multi_dir)

    observed, conditioning, blind, wavelet = _load_inputs(cfg)
    model, target = _fixed_model(cfg, conditioning)
    plan = SimulationPlan(
        grid=observed.grid, model=model, target=target, seed=cfg.seed,
        neighborhood=cfg.neighborhood, conditioning=conditioning,
    )
    conv_report = run_gsi(plan, observed, wavelet, cfg.gsi)
    cov_conv = envelope_coverage(conv_report.final_ensemble, blind)

    maps_vols = {name: read_volume(os.path.join(multi_dir, f"{name}.gsuq"))
                 for name in ("p10", "p50", "p90")}
    from .nab import QuantileMaps

    maps = QuantileMaps(maps_vols["p10"], maps_vols["p50"], maps_vols["p90"])
    cov_multi = coverage(maps, blind)

    all_well_values = np.array(
        [ip for w in (*conditioning.wells, *blind.wells) for _, ip in w.samples]
    )
    pooled_multi = np.concatenate([v.values.ravel() for v in maps_vols.values()])
    pooled_conv = np.concatenate([v.values.ravel() for v in conv_report.final_ensemble])
    ks_multi = ks_two_sample(all_well_values, pooled_multi)
    ks_conv = ks_two_sample(all_well_values, pooled_conv)

    with open(os.path.join(out, "comparison.csv"), "w") as f:
        f.write("metric,conventional,multiscale\n")
        f.write(f"blind_coverage,{cov_conv!r},{cov_multi!r}\n")
        f.write(f"ks_to_all_wells,{ks_conv!r},{ks_multi!r}\n")
    write_histogram_comparison(
        os.path.join(out, "histogram_comparison.csv"),
        {
            "all_wells": all_well_values,
            "multiscale_quantiles": pooled_multi,
            "conventional_ensemble": pooled_conv,
        },
    )
    write_summary(
        os.path.join(out, "summary.txt"),
        [
            f"conventional blind coverage (ensemble min-max) = {cov_conv:.4f}",
            f"multiscale blind coverage (p10-p90) = {cov_multi:.4f}",
            f"conventional KS to all-wells histogram = {ks_conv:.4f}",
            f"multiscale KS to all-wells histogram = {ks_multi:.4f}",
        ],
    )


_COMMANDS = {
    "synth": cmd_synth,
    "invert-gsi": cmd_invert_gsi,
    "invert-multiscale": cmd_invert_multiscale,
    "nab": cmd_nab,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsuq",
        description="Geostatistical seismic inversion with multi-scale "
                    "uncertainty quantification",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", required=True, help="output directory (owned by this run)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        os.makedirs(args.out, exist_ok=True)
        _COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # noqa: BLE001 - CLI boundary
        traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
