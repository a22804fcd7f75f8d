"""Command-line interface: subcommands, CSV schema, exit codes, determinism."""

import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

EXPECTED_HEADER = (
    "tau,x,y,phi_pancharatnam,phi_dynamical,phi_geometric,phi_eq5,"
    "rho11,rho22,rho33,norm_error"
)

QUICK = [
    "--alpha", "1.5", "--theta", "0.6", "--tau-max", "3.0", "--steps", "40",
    "--dt", "0.005",
]


def run_cli(*args, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    cmd = [sys.executable, "-m", "cascade_qed", *args]
    return subprocess.run(cmd, capture_output=True, text=True, env=env)


def test_help():
    cp = run_cli("--help")
    assert cp.returncode == 0, cp.stderr
    for sub in ("run", "preset", "compare", "list-presets"):
        assert sub in cp.stdout


def test_list_presets_frozen_parameters():
    cp = run_cli("list-presets")
    assert cp.returncode == 0, cp.stderr
    lines = cp.stdout.strip().splitlines()
    names = {ln.split()[0] for ln in lines}
    assert names == {
        "fig1a", "fig1b", "fig2a", "fig2b", "fig3a", "fig3b",
        "fig4a", "fig4b", "fig4c", "fig5a", "fig5b",
    }
    fig1a = next(ln for ln in lines if ln.startswith("fig1a"))
    params = json.loads(fig1a.split(None, 1)[1])
    assert params == {
        "alpha": 5.0, "delta": 0.0, "motion": "moving", "p": 1, "r": 0.0,
        "steps": 2000, "tau_max": 8.0 * math.pi, "theta": 0.0,
    }
    fig4a = [ln for ln in lines if ln.startswith("fig4a")]
    assert len(fig4a) == 2
    assert all(json.loads(ln.split(None, 2)[2])["motion"] == "neglected" for ln in fig4a)
    assert {json.loads(ln.split(None, 2)[2])["r"] for ln in fig4a} == {0.0, 1.0}


class TestRun:
    def test_numeric_run_schema(self, tmp_path: Path):
        out = tmp_path / "run.csv"
        cp = run_cli("run", *QUICK, "--engine", "numeric", "--out", str(out))
        assert cp.returncode == 0, cp.stderr
        lines = out.read_text().splitlines()
        assert lines[0] == EXPECTED_HEADER
        assert len(lines) == 41
        first = lines[1].split(",")
        assert len(first) == 11
        assert float(first[0]) == 0.0
        # 17 significant digits survive round-tripping
        assert float(first[1]) == pytest.approx(1.0, abs=1e-12)
        meta = json.loads((tmp_path / "run.csv.meta.json").read_text())
        assert meta["parameters"]["alpha"] == 1.5
        assert meta["truncation"]["n_max"] >= 2
        assert meta["integrator"]["substeps_total"] > 0
        assert "wall_time_s" in meta

    def test_seventeen_digit_roundtrip(self, tmp_path: Path):
        out = tmp_path / "run.csv"
        run_cli("run", *QUICK, "--engine", "numeric", "--out", str(out))
        row = out.read_text().splitlines()[7].split(",")
        x = float(row[1])
        assert format(x, ".17g") == row[1]

    def test_analytic_run_empty_population_fields(self, tmp_path: Path):
        out = tmp_path / "ana.csv"
        cp = run_cli("run", *QUICK, "--engine", "analytic", "--out", str(out))
        assert cp.returncode == 0, cp.stderr
        row = out.read_text().splitlines()[3].split(",")
        assert row[7] == "" and row[8] == "" and row[9] == "" and row[10] == ""
        assert row[1] != ""

    def test_both_engine_writes_three_files(self, tmp_path: Path):
        out = tmp_path / "b.csv"
        cp = run_cli("run", *QUICK, "--engine", "both", "--out", str(out))
        assert cp.returncode == 0, cp.stderr
        assert (tmp_path / "b.numeric.csv").exists()
        assert (tmp_path / "b.analytic.csv").exists()
        cmp_lines = (tmp_path / "b.compare.csv").read_text().splitlines()
        assert cmp_lines[0] == "tau,dev_x,dev_y"
        # at alpha = 1.5 the closed form visibly omits the middle-level
        # vacuum rung: dev_x is bounded by sin^2(theta) c_0^2, dev_y is
        # integrator noise only
        dev_x = max(abs(float(r.split(",")[1])) for r in cmp_lines[1:])
        dev_y = max(abs(float(r.split(",")[2])) for r in cmp_lines[1:])
        edge_bound = math.sin(0.6) ** 2 * math.exp(-1.5**2)
        assert 1e-4 < dev_x <= edge_bound * 1.01
        assert dev_y < 1e-4  # integrator noise at the coarse quick-run step

    def test_emit_unwrapped_appends_columns(self, tmp_path: Path):
        out = tmp_path / "u.csv"
        cp = run_cli("run", *QUICK, "--engine", "numeric", "--out", str(out),
                     "--emit-unwrapped")
        assert cp.returncode == 0, cp.stderr
        header = out.read_text().splitlines()[0]
        assert header == (
            EXPECTED_HEADER + ",phi_pancharatnam_unwrapped,phi_geometric_unwrapped"
        )

    def test_missing_out_is_config_error(self):
        cp = run_cli("run", *QUICK, "--engine", "numeric")
        assert cp.returncode == 2
        assert "out" in cp.stderr

    def test_analytic_with_detuning_is_config_error(self, tmp_path: Path):
        cp = run_cli(
            "run", *QUICK, "--engine", "analytic", "--delta", "20",
            "--out", str(tmp_path / "x.csv"),
        )
        assert cp.returncode == 2
        assert "analytic" in cp.stderr

    def test_invalid_alpha_is_config_error(self, tmp_path: Path):
        cp = run_cli("run", "--alpha", "-3", "--out", str(tmp_path / "x.csv"))
        assert cp.returncode == 2

    def test_negative_r_parses(self, tmp_path: Path):
        out = tmp_path / "odd.csv"
        cp = run_cli("run", *QUICK, "--r", "-1", "--engine", "numeric",
                     "--out", str(out))
        assert cp.returncode == 0, cp.stderr
        meta = json.loads((tmp_path / "odd.csv.meta.json").read_text())
        assert meta["parameters"]["r"] == -1.0


class TestConfigFile:
    def test_config_file_loaded(self, tmp_path: Path):
        cfg = dict(alpha=1.5, theta=0.6, tau_max=3.0, steps=25, dt=0.005,
                   engine="numeric", out=str(tmp_path / "cfg.csv"))
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        cp = run_cli("run", "--config", str(cfg_path))
        assert cp.returncode == 0, cp.stderr
        assert len((tmp_path / "cfg.csv").read_text().splitlines()) == 26

    def test_flags_override_config_file(self, tmp_path: Path):
        cfg = dict(alpha=1.5, theta=0.6, tau_max=3.0, steps=25, dt=0.005,
                   engine="numeric", out=str(tmp_path / "a.csv"))
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        override = tmp_path / "b.csv"
        cp = run_cli("run", "--config", str(cfg_path), "--steps", "12",
                     "--out", str(override))
        assert cp.returncode == 0, cp.stderr
        assert len(override.read_text().splitlines()) == 13
        meta = json.loads((tmp_path / "b.csv.meta.json").read_text())
        assert meta["parameters"]["steps"] == 12
        assert meta["parameters"]["alpha"] == 1.5

    def test_unknown_config_key_rejected(self, tmp_path: Path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"alpha": 1.0, "bogus": 1}))
        cp = run_cli("run", "--config", str(cfg_path), "--out", str(tmp_path / "x.csv"))
        assert cp.returncode == 2
        assert "bogus" in cp.stderr

    def test_missing_config_file_rejected(self, tmp_path: Path):
        cp = run_cli("run", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "x.csv"))
        assert cp.returncode == 2


class TestCompare:
    def test_within_tolerance(self):
        # large alpha: the omitted vacuum rung is ~e^-25 and both engines
        # agree to integrator accuracy
        cp = run_cli(
            "compare", "--alpha", "5.0", "--theta", "0.785398163",
            "--tau-max", "6.283185307", "--steps", "200", "--tolerance", "1e-6",
        )
        assert cp.returncode == 0, cp.stderr
        report = json.loads(cp.stdout)
        assert report["within_tolerance"] is True
        assert report["max_abs_dev"] < 1e-6

    def test_tolerance_breach_exits_3(self):
        cp = run_cli(
            "compare", "--alpha", "2.0", "--theta", "0.785398163",
            "--tau-max", "6.283185307", "--steps", "100", "--tolerance", "1e-6",
        )
        assert cp.returncode == 3
        assert "tolerance" in cp.stderr

    def test_detuned_compare_is_config_error(self):
        cp = run_cli("compare", "--delta", "5", "--steps", "50")
        assert cp.returncode == 2


class TestDeterminism:
    def test_small_run_matches_golden_file(self, tmp_path: Path):
        out = tmp_path / "small.csv"
        cp = run_cli(
            "run", "--alpha", "2", "--theta", "0.6", "--r", "1", "--p", "2",
            "--tau-max", "3.0", "--steps", "12", "--dt", "0.01",
            "--engine", "numeric", "--out", str(out),
        )
        assert cp.returncode == 0, cp.stderr
        golden = Path(__file__).parent / "golden" / "run_small.csv"
        assert out.read_bytes() == golden.read_bytes()

    def test_byte_identical_across_thread_counts(self, tmp_path: Path):
        outs = []
        for tag, threads in (("a", "1"), ("b", "4")):
            out = tmp_path / f"{tag}.csv"
            cp = run_cli(
                "run", *QUICK, "--engine", "numeric", "--out", str(out),
                env_extra={"OMP_NUM_THREADS": threads,
                           "OPENBLAS_NUM_THREADS": threads},
            )
            assert cp.returncode == 0, cp.stderr
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
