"""Command-line pipeline driver.

    nucdecay <kscan|evolve|oracle-compare|interfere|finite-size>
             [--config FILE] [--out DIR] [--jobs N]
             [--set section.key=value ...]

Commands read a TOML config (57Fe defaults when omitted), write CSV/JSON
artifacts into the output directory, and exit with 0 on success, 2 on
config errors, 3 on numerical failures, 4 on capacity errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, observables, oracle
from .config import RunConfig, load_config
from .couplings import (central_site, coupling_parameter_finite,
                        coupling_parameter_infinite)
from .dynamics import simulate_finite, simulate_reduced
from .errors import (CapacityError, ConfigError, IntegrationError,
                     NucdecayError, NumericsError)
from .serialize import trajectory_columns, write_csv, write_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_CAPACITY = 4


def _slug(value: float) -> str:
    return f"{value:g}".replace(".", "p").replace("-", "m").replace("+", "")


def _area_slug(area_pi: float) -> str:
    return "A" + _slug(area_pi)


def _angle_slug(theta_rad: float) -> str:
    return "th" + _slug(theta_rad * 1e3) + "mrad"


# ---------------------------------------------------------------- kscan

def _kscan_point(args):
    cfg_geom, decay, theta, mode, chain_length, coupling_kwargs = args
    geom = cfg_geom.with_incidence(theta)
    if mode == "finite":
        summary = coupling_parameter_finite(geom, decay, central_site(chain_length),
                                            chain_length)
    else:
        summary = coupling_parameter_infinite(geom, decay, **coupling_kwargs)
    return theta, summary


def cmd_kscan(config: RunConfig, outdir: Path, jobs: int) -> list:
    sect = config["kscan"]
    geom = config.geometry()
    decay = config.decay()
    thetas = np.linspace(sect["theta_min"], sect["theta_max"], sect["points"])
    tasks = [(geom, decay, float(t), sect["mode"], sect["chain_length"],
              config.coupling_kwargs()) for t in thetas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_kscan_point, tasks, chunksize=32))
    else:
        results = [_kscan_point(t) for t in tasks]
    columns = {
        "theta_in_rad": np.array([r[0] for r in results]),
        "K_real_over_Gamma": np.array([r[1].real for r in results]),
        "K_imag_over_Gamma": np.array([r[1].imag for r in results]),
        "provenance": np.array([r[1].provenance for r in results]),
        "regularization_eps": np.array([r[1].regularization_eps for r in results]),
    }
    meta = config.output_metadata("kscan", mode=sect["mode"],
                                  dipole_angle_rad=geom.dipole_angle)
    path = write_csv(outdir / "kscan.csv", columns, meta)
    write_json(outdir / "manifest_kscan.json", {"outputs": [path.name]},
               config.output_metadata("kscan"))
    return [path]


# --------------------------------------------------------------- evolve

def _write_trajectory(config: RunConfig, outdir: Path, stem: str, traj, command: str,
                      site=None) -> list:
    columns = trajectory_columns(traj, site=site)
    columns["t_ns"] = observables.to_nanoseconds(traj.times, config.lifetime_ns)
    meta = config.output_metadata(command, model=traj.metadata.get("model", ""))
    csv_path = write_csv(outdir / f"{stem}.csv", columns, meta)
    json_path = write_json(outdir / f"{stem}.json",
                           {"columns": {k: np.asarray(v) for k, v in columns.items()},
                            "metadata": traj.metadata, "warnings": traj.warnings},
                           config.output_metadata(command))
    return [csv_path, json_path]


def cmd_evolve(config: RunConfig, outdir: Path, jobs: int) -> list:
    sect = config["evolve"]
    geom = config.geometry()
    decay = config.decay()
    integ = config.integrator_kwargs()
    t_end = config["integrator"]["t_end"]
    grid = np.linspace(0.0, t_end, config["integrator"]["grid_points"])
    areas = [a * math.pi for a in sect["pulse_areas_pi"]]
    outputs = []

    run_reduced = sect["model"] in ("reduced", "both")
    run_finite = sect["model"] in ("finite", "both")
    coupling = coupling_parameter_infinite(geom, decay, **config.coupling_kwargs())

    for area_pi, area in zip(sect["pulse_areas_pi"], areas):
        base = f"{_area_slug(area_pi)}_{_angle_slug(geom.incidence_angle)}"
        if run_reduced:
            traj = simulate_reduced(geom, decay, area, coupling=coupling,
                                    t_end=t_end, grid=grid, **integ)
            outputs += _write_trajectory(config, outdir, f"evolve_reduced_{base}",
                                         traj, "evolve")
        if run_finite:
            n = sect["chain_length"]
            traj = simulate_finite(geom, decay, area, n, t_end=t_end, grid=grid, **integ)
            site = sect["site"] if sect["site"] >= 1 else None
            outputs += _write_trajectory(config, outdir,
                                         f"evolve_finite_N{n}_{base}", traj, "evolve",
                                         site=site)

    lowest_pi = min(sect["pulse_areas_pi"])
    for extra_theta in sect["extra_low_excitation_angles_rad"]:
        g2 = geom.with_incidence(extra_theta)
        k2 = coupling_parameter_infinite(g2, decay, **config.coupling_kwargs())
        traj = simulate_reduced(g2, decay, lowest_pi * math.pi, coupling=k2,
                                t_end=t_end, grid=grid, **integ)
        stem = f"evolve_reduced_{_area_slug(lowest_pi)}_{_angle_slug(extra_theta)}"
        outputs += _write_trajectory(config, outdir, stem, traj, "evolve")

    write_json(outdir / "manifest_evolve.json",
               {"outputs": sorted(p.name for p in outputs)},
               config.output_metadata("evolve"))
    return outputs


# ------------------------------------------------------- oracle-compare

def cmd_oracle_compare(config: RunConfig, outdir: Path, jobs: int) -> list:
    sect = config["oracle_compare"]
    geom = config.geometry()
    base_decay = config.decay()
    n = sect["chain_length"]
    grid = np.linspace(0.0, sect["t_end"], sect["grid_points"])
    area = sect["pulse_area_pi"] * math.pi
    report = {"chain_length": n, "pulse_area_pi": sect["pulse_area_pi"], "scales": []}
    outputs = []

    for scale in sect["coupling_scales"]:
        decay = base_decay.scaled_coupling(scale)
        matrices = oracle.build_system(geom, decay, n)
        exact = oracle.evolve_exact(matrices, _excitation(geom, area), grid,
                                    correlator_pairs=[(1, n)] if n > 1 else None,
                                    geom=geom, decay=decay)
        if scale == sect["coupling_scales"][0]:
            columns = trajectory_columns(exact)
            columns["t_ns"] = observables.to_nanoseconds(grid, config.lifetime_ns)
            outputs.append(write_csv(
                outdir / f"oracle_exact_N{n}.csv", columns,
                config.output_metadata("oracle-compare", model="exact",
                                       coupling_scale=scale)))
        cumulant = simulate_finite(geom, decay, area, n, t_end=sect["t_end"],
                                   grid=grid, rtol=1e-11)
        dp = np.abs(exact.populations - cumulant.populations)
        ds = np.abs(exact.coherences - cumulant.coherences)
        entry = {
            "coupling_scale": scale,
            "max_population_deviation": float(dp.max()),
            "mean_population_deviation": float(dp.mean()),
            "max_coherence_deviation": float(ds.max()),
        }
        if n > 1:
            rho = oracle.final_density_matrix(matrices, _excitation(geom, area), 1.0)
            entry["connected_correlation_at_1_over_gamma"] = abs(
                oracle.connected_correlation(rho, 1, n))
        report["scales"].append(entry)

    # low-excitation agreement in relative terms
    low_area = sect["low_excitation_area_pi"] * math.pi
    matrices = oracle.build_system(geom, base_decay, n)
    exact = oracle.evolve_exact(matrices, _excitation(geom, low_area), grid)
    cumulant = simulate_finite(geom, base_decay, low_area, n, t_end=sect["t_end"],
                               grid=grid, rtol=1e-11)
    rel = np.abs(exact.coherences - cumulant.coherences) / np.abs(exact.coherences)
    report["low_excitation_area_pi"] = sect["low_excitation_area_pi"]
    report["low_excitation_max_relative_coherence_deviation"] = float(rel.max())

    outputs.append(write_json(outdir / "oracle_compare.json", report,
                              config.output_metadata("oracle-compare")))
    return outputs


def _excitation(geom, area):
    from .dynamics import ExcitationSpec

    return ExcitationSpec.from_geometry(area, geom)


# ------------------------------------------------------------ interfere

def cmd_interfere(config: RunConfig, outdir: Path, jobs: int) -> list:
    sect = config["interfere"]
    decay = config.decay()
    integ = config.integrator_kwargs()
    t_end = config["integrator"]["t_end"]
    grid = np.linspace(0.0, t_end, config["integrator"]["grid_points"])
    geom_s = config.geometry(incidence_angle=sect["sample_angle_rad"])
    geom_r = config.geometry(incidence_angle=sect["reference_angle_rad"])
    k_s = coupling_parameter_infinite(geom_s, decay, **config.coupling_kwargs())
    k_r = coupling_parameter_infinite(geom_r, decay, **config.coupling_kwargs())
    zoom_lo, zoom_hi = sect["zoom_window"]
    outputs = []
    minima_manifest = []

    for area_pi in sect["pulse_areas_pi"]:
        area = area_pi * math.pi
        spec = observables.InterferometerSpec(
            detuning=sect["detuning"], sample_angle=sect["sample_angle_rad"],
            reference_angle=sect["reference_angle_rad"], pulse_area=area,
            amplitude_model=sect["amplitude_model"])
        sample = simulate_reduced(geom_s, decay, area, coupling=k_s,
                                  t_end=t_end, grid=grid, **integ)
        reference = simulate_reduced(geom_r, decay, area, coupling=k_r,
                                     t_end=t_end, grid=grid, **integ)
        t, intensity = observables.combined_intensity(spec, sample, reference)
        t_ns = observables.to_nanoseconds(t, config.lifetime_ns)
        meta = config.output_metadata("interfere", pulse_area_pi=area_pi,
                                      detuning_over_gamma=sect["detuning"])
        tag = _area_slug(area_pi)
        outputs.append(write_csv(outdir / f"intensity_full_{tag}.csv",
                                 {"t_over_Gamma": t, "t_ns": t_ns,
                                  "intensity_normalized": intensity}, meta))
        zoom = (t >= zoom_lo) & (t <= zoom_hi)
        outputs.append(write_csv(outdir / f"intensity_zoom_{tag}.csv",
                                 {"t_over_Gamma": t[zoom], "t_ns": t_ns[zoom],
                                  "intensity_normalized": intensity[zoom]}, meta))
        minima = observables.beat_minima(t, intensity)
        outputs.append(write_csv(
            outdir / f"minima_{tag}.csv",
            {"index": np.arange(len(minima)),
             "t_min_over_Gamma": np.array([m[0] for m in minima]),
             "t_min_ns": observables.to_nanoseconds([m[0] for m in minima],
                                                    config.lifetime_ns),
             "intensity": np.array([m[1] for m in minima])}, meta))
        minima_manifest.append({"pulse_area_pi": area_pi,
                                "files": [outputs[-3].name, outputs[-2].name,
                                          outputs[-1].name]})

    write_json(outdir / "manifest_interfere.json",
               {"runs": minima_manifest, "zoom_window": [zoom_lo, zoom_hi],
                "sample_k": k_s.value, "reference_k": k_r.value},
               config.output_metadata("interfere"))
    return outputs


# ---------------------------------------------------------- finite-size

def cmd_finite_size(config: RunConfig, outdir: Path, jobs: int) -> list:
    sect = config["finite_size"]
    geom = config.geometry()
    decay = config.decay()
    n_values = list(range(sect["n_min"], sect["n_max"] + 1, sect["n_step"]))
    sweep = analysis.SweepSpec(
        parameter="chain_length", values=tuple(n_values),
        fixed={"incidence_angle": geom.incidence_angle,
               "dipole_angle": geom.dipole_angle,
               "pulse_area_pi": sect["pulse_area_pi"],
               "window": list(sect["window"]), "samples": sect["samples"]})
    tag = sweep.digest()
    outputs = []

    scan = analysis.k_convergence_scan(geom, decay, n_values)
    meta = config.output_metadata("finite-size", sweep_hash=tag)
    outputs.append(write_csv(
        outdir / f"k_convergence.{tag}.csv",
        {"chain_length": scan["chain_lengths"],
         "K_real_over_Gamma": scan["k_finite"].real,
         "K_imag_over_Gamma": scan["k_finite"].imag,
         "Kinf_real_over_Gamma": np.full(len(n_values), scan["k_infinite"].real),
         "Kinf_imag_over_Gamma": np.full(len(n_values), scan["k_infinite"].imag),
         "k_diff_real_sq": scan["k_diff_real_sq"],
         "k_diff_imag_sq": scan["k_diff_imag_sq"]}, meta))

    reports = analysis.deviation_study(
        geom, decay, sect["pulse_area_pi"] * math.pi, n_values,
        window=tuple(sect["window"]), samples=sect["samples"],
        rtol=sect["rtol"], jobs=jobs)
    for obs, report in reports.items():
        outputs.append(write_csv(
            outdir / f"deviation_{obs}.{tag}.csv",
            {"chain_length": report.chain_lengths,
             "delta_o": report.deviations,
             "k_diff_real_sq": report.k_diff_real_sq,
             "k_diff_imag_sq": report.k_diff_imag_sq}, meta))

    study = analysis.finite_size_phase_study(
        geom, decay, [a * math.pi for a in sect["study_pulse_areas_pi"]],
        search_window=tuple(int(v) for v in sect["search_window"]),
        t_end=config["integrator"]["t_end"],
        grid_points=sect["phase_study_points"], rtol=sect["rtol"])
    for case in study["cases"]:
        stem = (f"phase_study_{case['label']}_N{case['chain_length']}_"
                f"{_area_slug(case['pulse_area'] / math.pi)}")
        outputs.append(write_csv(
            outdir / f"{stem}.{tag}.csv",
            {"t_over_Gamma": case["times"],
             "phase_finite_rad": case["phase_finite"],
             "phase_reduced_rad": case["phase_reduced"]},
            config.output_metadata("finite-size", sweep_hash=tag,
                                   chain_length=case["chain_length"],
                                   pulse_area_pi=case["pulse_area"] / math.pi)))

    write_json(outdir / f"manifest_finite_size.{tag}.json",
               {"outputs": sorted(p.name for p in outputs),
                "extremal_chain_lengths": {
                    "max_deviation": study["n_values"][0] if study["labels"][0] == "max_deviation" else None,
                    "labels": study["labels"], "n_values": study["n_values"]},
                "sweep": {"parameter": sweep.parameter, "values": list(sweep.values),
                          "fixed": sweep.fixed}},
               config.output_metadata("finite-size", sweep_hash=tag))
    return outputs


# ----------------------------------------------------------------- main

COMMANDS = {
    "kscan": cmd_kscan,
    "evolve": cmd_evolve,
    "oracle-compare": cmd_oracle_compare,
    "interfere": cmd_interfere,
    "finite-size": cmd_finite_size,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nucdecay",
        description="Collective decay of dipole-coupled nuclei: coupling scans, "
                    "trajectories, exact-oracle comparisons, interferometry and "
                    "finite-size studies.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="TOML config file (57Fe defaults if omitted)")
        p.add_argument("--out", default="nucdecay-out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="config override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.overrides)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](config, outdir, args.jobs)
        for path in outputs:
            print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (IntegrationError, NumericsError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except NucdecayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
