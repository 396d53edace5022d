#!/usr/bin/env python3
"""Render figure analogues from nucdecay CSV artifacts.

    python plots/render.py --figure fig1 --in RESULTS_DIR --out FIG_DIR

fig1  coupling parameter vs incidence angle        (kscan.csv)
fig2  dipole phase evolution per pulse area        (evolve_*.csv)
fig3  two-chain beat intensity with inset + minima (intensity_*/minima_*.csv)
fig4  finite-size deviation panels vs chain length (deviation_*.csv)
fig5  finite-vs-reduced phase at extremal lengths  (phase_study_*.csv)

This tool only reads the CSV/JSON files the simulation CLI wrote; it
recomputes no physics.  Input files must carry the config-hash metadata
header, otherwise they are rejected as untraceable.  Rendering is
deterministic: fixed SVG hash salt, no date metadata.
"""

import argparse
import json
import math
import re
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "nucdecay-plots"

import matplotlib.pyplot as plt  # noqa: E402

FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5")
GAMMA_LABEL = r"time  ($1/\Gamma$)"
NS_LABEL = "time  (ns)"


class RenderError(Exception):
    pass


def read_csv(path):
    """Parse one artifact: ({metadata}, {column: list}), floats where possible."""
    meta, names, rows = {}, None, []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, val = body.partition(":")
                    meta[key.strip()] = val.strip()
                continue
            if names is None:
                names = line.split(",")
            else:
                rows.append(line.split(","))
    if names is None:
        raise RenderError(f"{path}: no column header")
    if "config_hash" not in meta:
        raise RenderError(f"{path}: missing config_hash metadata header; "
                          "refusing untraceable input")
    cols = {}
    for j, name in enumerate(names):
        raw_col = [r[j] for r in rows]
        try:
            cols[name] = [float(x) for x in raw_col]
        except ValueError:
            cols[name] = raw_col
    return meta, cols


def require_columns(path, cols, expected):
    expected = list(expected)
    got = list(cols)
    if got != expected:
        missing = [c for c in expected if c not in got]
        surplus = [c for c in got if c not in expected]
        raise RenderError(
            f"{path}: column schema mismatch; missing={missing} unexpected={surplus} "
            f"(expected {expected}, found {got})")


def _times(cols, unit):
    if unit == "ns" and "t_ns" in cols:
        return cols["t_ns"], NS_LABEL
    return cols["t_over_Gamma"], GAMMA_LABEL if unit == "gamma" else NS_LABEL


def _area_label(area_pi):
    return rf"$\mathcal{{A}} = {area_pi:g}\,\pi$"


AREA_RE = re.compile(r"_A([0-9pem]+)[._]")
ANGLE_RE = re.compile(r"_th([0-9pem]+)mrad")
CHAIN_RE = re.compile(r"_N(\d+)_")


def _unslug(text):
    return float(text.replace("p", ".").replace("em", "e-").replace("e", "e"))


def parse_trajectory_name(name):
    area = AREA_RE.search(name)
    angle = ANGLE_RE.search(name)
    chain = CHAIN_RE.search(name)
    return {
        "area_pi": _unslug(area.group(1)) if area else None,
        "angle_mrad": _unslug(angle.group(1)) if angle else None,
        "chain": int(chain.group(1)) if chain else None,
        "model": "finite" if "finite" in name else "reduced",
    }


def fig1(indir, outpath, unit):
    meta, cols = read_csv(indir / "kscan.csv")
    require_columns("kscan.csv", cols,
                    ["theta_in_rad", "K_real_over_Gamma", "K_imag_over_Gamma",
                     "provenance", "regularization_eps"])
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(cols["theta_in_rad"], cols["K_real_over_Gamma"],
            color="tab:blue", lw=1.2, label=r"$K^R$")
    ax.plot(cols["theta_in_rad"], cols["K_imag_over_Gamma"],
            color="tab:red", lw=1.2, label=r"$K^I$")
    ax.axhline(0.0, color="0.8", lw=0.6, zorder=0)
    ax.set_xlabel(r"incidence angle $\theta_{\rm in}$  (rad)")
    ax.set_ylabel(r"coupling parameter  ($\Gamma$)")
    ax.legend(frameon=False)
    ax.set_title(f"coupling parameter scan  [config {meta['config_hash']}]",
                 fontsize=9)
    _finish(fig, outpath)


def _evolve_files(indir):
    manifest = indir / "manifest_evolve.json"
    if manifest.exists():
        names = json.loads(manifest.read_text())["outputs"]
        return [indir / n for n in names if n.endswith(".csv")]
    return sorted(indir.glob("evolve_*.csv"))


def fig2(indir, outpath, unit):
    files = _evolve_files(indir)
    if not files:
        raise RenderError(f"no evolve_*.csv trajectories in {indir}")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    palette = plt.get_cmap("viridis")
    reduced = [f for f in files if "reduced" in f.name]
    finite = [f for f in files if "finite" in f.name]
    areas = sorted({parse_trajectory_name(f.name)["area_pi"] for f in reduced + finite})
    color_of = {a: palette(i / max(len(areas) - 1, 1)) for i, a in enumerate(areas)}
    base_angles = sorted({parse_trajectory_name(f.name)["angle_mrad"] for f in reduced})
    styles = {angle: style for angle, style in zip(base_angles, ("-", ":", "--", "-."))}

    for f in finite:
        info = parse_trajectory_name(f.name)
        _, cols = read_csv(f)
        t, label = _times(cols, unit)
        phase = [p - cols["phase_rad_unwrapped"][0] for p in cols["phase_rad_unwrapped"]]
        ax.plot(t, phase, color=color_of[info["area_pi"]], alpha=0.35, lw=3.0,
                label=rf"finite $N={info['chain']}$, " + _area_label(info["area_pi"]))
    for f in reduced:
        info = parse_trajectory_name(f.name)
        _, cols = read_csv(f)
        t, label = _times(cols, unit)
        phase = [p - cols["phase_rad_unwrapped"][0] for p in cols["phase_rad_unwrapped"]]
        style = styles.get(info["angle_mrad"], "-")
        ax.plot(t, phase, style, color=color_of[info["area_pi"]], lw=1.4,
                label=_area_label(info["area_pi"])
                + rf", $\theta_{{\rm in}}={info['angle_mrad']:g}$ mrad")
    ax.set_xlabel(label)
    ax.set_ylabel(r"dipole phase $\phi$  (rad)")
    ax.legend(frameon=False, fontsize=7)
    _finish(fig, outpath)


def fig3(indir, outpath, unit):
    manifest_path = indir / "manifest_interfere.json"
    if not manifest_path.exists():
        raise RenderError(f"missing manifest_interfere.json in {indir}")
    manifest = json.loads(manifest_path.read_text())
    runs = manifest["runs"]
    if not runs:
        raise RenderError("interfere manifest lists no runs")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    inset = fig.add_axes([0.62, 0.62, 0.27, 0.25])
    palette = plt.get_cmap("plasma")
    zoom_lo, zoom_hi = manifest["zoom_window"]

    for i, run in enumerate(runs):
        color = palette(i / max(len(runs) - 1, 1))
        zoom_file = next(n for n in run["files"] if n.startswith("intensity_zoom"))
        full_file = next(n for n in run["files"] if n.startswith("intensity_full"))
        minima_file = next(n for n in run["files"] if n.startswith("minima"))
        _, zoom = read_csv(indir / zoom_file)
        require_columns(zoom_file, zoom, ["t_over_Gamma", "t_ns", "intensity_normalized"])
        t, label = _times(zoom, unit)
        ax.plot(t, zoom["intensity_normalized"], color=color, lw=1.2,
                label=_area_label(run["pulse_area_pi"]))
        _, full = read_csv(indir / full_file)
        t_full, _ = _times(full, unit)
        inset.semilogy(t_full, [max(v, 1e-12) for v in full["intensity_normalized"]],
                       color=color, lw=0.8)
        _, minima = read_csv(indir / minima_file)
        t_key = "t_min_ns" if (unit == "ns") else "t_min_over_Gamma"
        marks = [(tm, im) for tm, im in zip(minima[t_key], minima["intensity"])
                 if zoom_lo <= tm <= zoom_hi or unit == "ns"]
        if marks:  # an empty minima file simply renders without markers
            ax.plot([m[0] for m in marks], [m[1] for m in marks], "v",
                    color=color, ms=5)

    scale = (zoom_lo, zoom_hi)
    if unit == "ns":
        ratio = full["t_ns"][-1] / full["t_over_Gamma"][-1]
        scale = (zoom_lo * ratio, zoom_hi * ratio)
    ax.set_xlim(*scale)
    ax.set_xlabel(label)
    ax.set_ylabel("beat intensity  (norm.)")
    ax.legend(frameon=False, fontsize=7, loc="lower left")
    inset.set_xlabel(label, fontsize=6)
    inset.tick_params(labelsize=6)
    axspan = inset.axvspan(*scale, color="0.85", zorder=0)
    axspan.set_alpha(0.8)
    fig.subplots_adjust(left=0.12, right=0.96, top=0.95, bottom=0.12)
    _finish(fig, outpath, tight=False)


def fig4(indir, outpath, unit):
    panels = [("coherence_abs", "k_diff_real_sq", r"$|\langle\bar\sigma^-\rangle|$"),
              ("phase", "k_diff_imag_sq", r"$\phi$"),
              ("population", "k_diff_real_sq", r"$\langle\sigma^{ee}\rangle$")]
    fig, axes = plt.subplots(3, 1, figsize=(6.0, 7.0), sharex=True)
    for ax, (obs, k_col, label) in zip(axes, panels):
        matches = sorted(indir.glob(f"deviation_{obs}.*.csv"))
        if not matches:
            raise RenderError(f"no deviation_{obs} CSV in {indir}")
        _, cols = read_csv(matches[0])
        require_columns(matches[0].name, cols,
                        ["chain_length", "delta_o", "k_diff_real_sq", "k_diff_imag_sq"])
        ax.semilogy(cols["chain_length"], [max(v, 1e-300) for v in cols["delta_o"]],
                    "k.", ms=2.5, label=rf"$\Delta O$, $O = ${label}")
        twin = ax.twinx()
        color = "tab:red" if k_col == "k_diff_imag_sq" else "tab:blue"
        twin.semilogy(cols["chain_length"], [max(v, 1e-300) for v in cols[k_col]],
                      "--", color=color, lw=1.0,
                      label=r"$|K_\infty - K_N|^2$ (" + k_col[7:11] + ")")
        ax.legend(frameon=False, fontsize=7, loc="upper right")
        twin.legend(frameon=False, fontsize=7, loc="lower left")
        ax.set_ylabel(r"$\Delta O$")
    axes[-1].set_xlabel("chain length $N$")
    _finish(fig, outpath)


def fig5(indir, outpath, unit):
    files = sorted(indir.glob("phase_study_*.csv"))
    if not files:
        raise RenderError(f"no phase_study_*.csv in {indir}")
    groups = {}
    for f in files:
        n = parse_trajectory_name(f.name)["chain"] or int(
            re.search(r"_N(\d+)_", f.name).group(1))
        groups.setdefault(n, []).append(f)
    fig, axes = plt.subplots(1, len(groups), figsize=(5.5 * len(groups), 3.8),
                             squeeze=False)
    palette = plt.get_cmap("viridis")
    for ax, (n, members) in zip(axes[0], sorted(groups.items())):
        areas = sorted(AREA_RE.search(f.name).group(1) for f in members)
        for i, f in enumerate(sorted(members)):
            _, cols = read_csv(f)
            require_columns(f.name, cols,
                            ["t_over_Gamma", "phase_finite_rad", "phase_reduced_rad"])
            area_pi = _unslug(AREA_RE.search(f.name).group(1))
            color = palette(i / max(len(members) - 1, 1))
            ax.plot(cols["t_over_Gamma"], cols["phase_finite_rad"], "--",
                    color=color, lw=1.3, label="finite, " + _area_label(area_pi))
            ax.plot(cols["t_over_Gamma"], cols["phase_reduced_rad"], ":",
                    color=color, lw=1.3, label="reduced, " + _area_label(area_pi))
        ax.set_title(f"$N = {n}$", fontsize=9)
        ax.set_xlabel(GAMMA_LABEL)
        ax.legend(frameon=False, fontsize=6)
    axes[0][0].set_ylabel(r"dipole phase $\phi$  (rad)")
    _finish(fig, outpath)


def _finish(fig, outpath, tight=True):
    if tight:  # manually placed insets are incompatible with tight_layout
        fig.tight_layout()
    fig.savefig(outpath, metadata={"Date": None} if outpath.suffix == ".svg" else None)
    plt.close(fig)


RENDERERS = {"fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--figure", required=True, choices=FIGURES)
    parser.add_argument("--in", dest="indir", required=True, help="CSV artifact directory")
    parser.add_argument("--out", dest="outdir", required=True, help="figure directory")
    parser.add_argument("--time-unit", choices=("gamma", "ns"), default="gamma",
                        help="time axis in 1/Gamma (default) or ns")
    parser.add_argument("--format", choices=("svg", "png"), default="svg")
    args = parser.parse_args(argv)

    indir = Path(args.indir)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    suffix = "" if args.time_unit == "gamma" else "_ns"
    outpath = outdir / f"{args.figure}{suffix}.{args.format}"
    try:
        RENDERERS[args.figure](indir, outpath, args.time_unit)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"render error: missing input {exc.filename}", file=sys.stderr)
        return 1
    print(outpath)
    return 0


if __name__ == "__main__":
    sys.exit(main())
