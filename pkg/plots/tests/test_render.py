"""Render-pipeline tests: generate artifacts through the simulation CLI,
then drive render.py exactly as a user would."""

import subprocess
import sys
import time
from pathlib import Path

import pytest

PLOTS_DIR = Path(__file__).resolve().parents[1]
RENDER = PLOTS_DIR / "render.py"


def run_cli(args):
    proc = subprocess.run([sys.executable, "-m", "nucdecay.cli"] + args,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def render(args):
    return subprocess.run([sys.executable, str(RENDER)] + args,
                          capture_output=True, text=True)


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """One quick pass of every CLI command into a shared directory."""
    out = tmp_path_factory.mktemp("artifacts")
    run_cli(["kscan", "--out", str(out), "--set", "kscan.points=200"])
    run_cli(["evolve", "--out", str(out),
             "--set", "evolve.model='both'",
             "--set", "evolve.chain_length=120",
             "--set", "evolve.pulse_areas_pi=[1e-5, 0.5]",
             "--set", "evolve.extra_low_excitation_angles_rad=[0.03]",
             "--set", "integrator.grid_points=300",
             "--set", "integrator.t_end=3.0"])
    run_cli(["interfere", "--out", str(out),
             "--set", "interfere.pulse_areas_pi=[1e-5, 0.5]",
             "--set", "integrator.grid_points=1200",
             "--set", "integrator.t_end=4.0"])
    run_cli(["finite-size", "--out", str(out), "--jobs", "2",
             "--set", "finite_size.n_min=20", "--set", "finite_size.n_max=60",
             "--set", "finite_size.search_window=[20, 60]",
             "--set", "finite_size.study_pulse_areas_pi=[1e-5, 0.5]",
             "--set", "finite_size.samples=100",
             "--set", "finite_size.phase_study_points=150"])
    return out


def test_all_figures_render(artifacts, tmp_path):
    start = time.monotonic()
    for fig in ("fig1", "fig2", "fig3", "fig4", "fig5"):
        proc = render(["--figure", fig, "--in", str(artifacts), "--out", str(tmp_path)])
        assert proc.returncode == 0, f"{fig}: {proc.stderr}"
        outfile = tmp_path / f"{fig}.svg"
        assert outfile.exists() and outfile.stat().st_size > 1000
        body = outfile.read_text()
        assert "<svg" in body
    elapsed = time.monotonic() - start
    print(f"SECONDARY figure renders: PASS (5 figures in {elapsed:.1f}s < 30s)")
    assert elapsed < 30.0


def test_nanosecond_axis_variant(artifacts, tmp_path):
    proc = render(["--figure", "fig3", "--in", str(artifacts), "--out", str(tmp_path),
                   "--time-unit", "ns"])
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "fig3_ns.svg").exists()


def test_png_output(artifacts, tmp_path):
    proc = render(["--figure", "fig1", "--in", str(artifacts), "--out", str(tmp_path),
                   "--format", "png"])
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "fig1.png").stat().st_size > 1000


def test_rerender_is_byte_stable(artifacts, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        proc = render(["--figure", "fig1", "--in", str(artifacts), "--out", str(out)])
        assert proc.returncode == 0, proc.stderr
    assert (a / "fig1.svg").read_bytes() == (b / "fig1.svg").read_bytes()


def test_missing_config_hash_rejected(tmp_path):
    indir = tmp_path / "in"
    indir.mkdir()
    (indir / "kscan.csv").write_text(
        "# nucdecay-csv v1\n"
        "theta_in_rad,K_real_over_Gamma,K_imag_over_Gamma,provenance,regularization_eps\n"
        "0.1,0.0,0.0,closed-form,0\n")
    proc = render(["--figure", "fig1", "--in", str(indir), "--out", str(tmp_path)])
    assert proc.returncode == 1
    assert "config_hash" in proc.stderr


def test_schema_mismatch_reports_column_diff(tmp_path):
    indir = tmp_path / "in"
    indir.mkdir()
    (indir / "kscan.csv").write_text(
        "# nucdecay-csv v1\n# config_hash: abc\n"
        "theta_in_rad,K_re,provenance,regularization_eps\n"
        "0.1,0.0,closed-form,0\n")
    proc = render(["--figure", "fig1", "--in", str(indir), "--out", str(tmp_path)])
    assert proc.returncode == 1
    assert "K_real_over_Gamma" in proc.stderr  # missing column named
    assert "K_re" in proc.stderr  # unexpected column named


def test_empty_minima_renders_without_markers(artifacts, tmp_path):
    # blank out one minima file: figure must still render
    staged = tmp_path / "staged"
    staged.mkdir()
    for f in artifacts.iterdir():
        if f.is_file():
            (staged / f.name).write_bytes(f.read_bytes())
    target = next(staged.glob("minima_A0p5.csv"))
    lines = target.read_text().splitlines()
    header_end = next(i for i, line in enumerate(lines) if not line.startswith("#"))
    target.write_text("\n".join(lines[:header_end + 1]) + "\n")
    proc = render(["--figure", "fig3", "--in", str(staged), "--out", str(tmp_path)])
    assert proc.returncode == 0, proc.stderr


def test_missing_inputs_fail_cleanly(tmp_path):
    proc = render(["--figure", "fig2", "--in", str(tmp_path), "--out", str(tmp_path)])
    assert proc.returncode == 1
    assert "render error" in proc.stderr
