import csv
import subprocess
import sys

import numpy as np
import pytest

from specfield import cli, parse_config
from specfield.cli import console_main

SMALL_GRID = """\
frequency_grid.j_lo = -12
frequency_grid.j_hi = 12
frequency_grid.nodes_per_annulus = 16
spatial_grid.resolution = 6
"""

CHECK_MAIN = """\
command = density-check
seed = 17
density.family = power-law
density.hurst = 0.5
""" + SMALL_GRID

CHECK_PAIR = """\
command = density-check
seed = 17
density.x.family = power-law
density.x.hurst = 0.5
density.y.family = perturbed
density.y.base.family = power-law
density.y.base.hurst = 0.5
density.y.modulation.offset = 2.0
density.y.modulation.amplitude = 1.0
density.y.modulation.scale = 3.0
""" + SMALL_GRID

SIMULATE = """\
command = simulate
seed = 23
replicas = 3
density.family = power-law
density.hurst = 0.5
""" + SMALL_GRID

ANDERSON_ZERO_SHIFT = """\
command = verify-anderson
anderson.kind = shift
shift.kind = zero
seed = 21
density.family = power-law
density.hurst = 0.5
mc.radii = 0.3, 0.6
mc.replicas = 120
""" + SMALL_GRID

COUPLING_SELF = """\
command = verify-coupling
seed = 29
density.x.family = power-law
density.x.hurst = 0.5
density.y.family = power-law
density.y.hurst = 0.5
constant = 1.0
mc.replicas = 150
""" + SMALL_GRID

COMPARISON_SELF = """\
command = verify-comparison
seed = 31
density.x.family = power-law
density.x.hurst = 0.5
density.y.family = power-law
density.y.hurst = 0.5
constant = 1.0
mc.radii = 0.3, 0.6, 1.0
mc.replicas = 120
""" + SMALL_GRID


def run_cli(tmp_path, text, name="run", extra=()):
    config = tmp_path / f"{name}.cfg"
    config.write_text(text)
    outdir = tmp_path / f"{name}-out"
    code = console_main(["--config", str(config), "--output", str(outdir),
                         *extra])
    return code, outdir


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def summary_dict(outdir):
    out = {}
    for line in (outdir / "summary.txt").read_text().splitlines():
        key, _, value = line.partition(" = ")
        out[key] = value
    return out


class TestDensityCheck:
    def test_single_density(self, tmp_path):
        code, outdir = run_cli(tmp_path, CHECK_MAIN)
        assert code == 0
        assert (outdir / "metadata.txt").exists()
        assert (outdir / "admissibility_main.csv").exists()
        summary = summary_dict(outdir)
        assert summary["admissibility.main"] == "admissible"
        assert summary["exit_status"] == "0"
        # one contribution row per annulus
        assert len(read_csv(outdir / "admissibility_main.csv")) == 25

    def test_pair_reports_min_constant(self, tmp_path):
        code, outdir = run_cli(tmp_path, CHECK_PAIR)
        assert code == 0
        summary = summary_dict(outdir)
        assert summary["domination"] == "holds"
        # f_y = ((2 + sin|xi|)/3) f_x, so the smallest C with f_x <= C f_y is
        # max 3/(2 + sin) = 3, approached where the modulation bottoms out
        assert 2.9 < float(summary["min_constant"]) <= 3.0 + 1e-6
        # the certificate records the raw ratio max f_x/f_y it certified
        assert summary["max_ratio"] == summary["min_constant"]

    def test_inconclusive_tail_exits_underpowered(self, tmp_path):
        code, outdir = run_cli(tmp_path,
                               CHECK_MAIN.replace("hurst = 0.5", "hurst = 0.03"))
        assert code == 2
        summary = summary_dict(outdir)
        assert summary["admissibility.main"] == "inconclusive"
        assert summary["exit_status"] == "2"

    def test_metadata_carries_the_resolved_config(self, tmp_path):
        _, outdir = run_cli(tmp_path, CHECK_MAIN)
        metadata = (outdir / "metadata.txt").read_text()
        assert "config_hash = " in metadata
        assert "frequency_grid.j_lo = -12\n" in metadata
        assert parse_config(CHECK_MAIN).echo in metadata


class TestSimulate:
    def test_writes_one_csv_per_replica(self, tmp_path):
        code, outdir = run_cli(tmp_path, SIMULATE)
        assert code == 0
        names = sorted(p.name for p in (outdir / "samples").iterdir())
        assert names == ["metadata.txt", "sample_00000.csv", "sample_00001.csv",
                         "sample_00002.csv"]
        rows = read_csv(outdir / "samples" / "sample_00000.csv")
        assert len(rows) == 6
        assert rows[0]["x"] == "0.0" and rows[0]["value"] == "0.0"

    def test_rerun_is_byte_identical(self, tmp_path):
        _, first = run_cli(tmp_path, SIMULATE, name="a")
        _, second = run_cli(tmp_path, SIMULATE, name="b")
        assert tree_bytes(first) == tree_bytes(second)

    def test_exact_method(self, tmp_path):
        code, outdir = run_cli(tmp_path,
                               SIMULATE.replace("replicas = 3",
                                                "replicas = 2\nmethod = exact"))
        assert code == 0
        rows = read_csv(outdir / "samples" / "sample_00001.csv")
        assert rows[0]["value"] == "0.0"
        assert any(float(r["value"]) != 0.0 for r in rows)


class TestCovariance:
    def test_points_against_closed_form(self, tmp_path):
        text = ("command = covariance\nseed = 2\n"
                "density.family = power-law\ndensity.hurst = 0.5\n"
                "points = 0.25, 0.5, 1.0\n") + SMALL_GRID
        code, outdir = run_cli(tmp_path, text)
        assert code == 0
        points = read_csv(outdir / "points.csv")
        assert [p["x"] for p in points] == ["0.25", "0.5", "1.0"]
        entries = {(int(r["i"]), int(r["j"])): float(r["value"])
                   for r in read_csv(outdir / "covariance.csv")}
        # H = 1/2 closed form: K(x, x') = min(x, x') on the positive half-line
        for (i, j), value in entries.items():
            expected = min(0.25 * 2 ** i, 0.25 * 2 ** j)
            assert value == pytest.approx(expected, rel=0.02)


class TestVerifyCommands:
    def test_zero_shift_is_exactly_paired(self, tmp_path):
        code, outdir = run_cli(tmp_path, ANDERSON_ZERO_SHIFT)
        assert code == 0
        rows = read_csv(outdir / "report.csv")
        assert len(rows) == 2
        for row in rows:
            assert row["p_lhs"] == row["p_rhs"]
            assert row["verdict"] == "consistent"
        assert summary_dict(outdir)["worst_verdict"] == "consistent"

    def test_anderson_sum_with_zero_summand(self, tmp_path):
        text = ("command = verify-anderson\nanderson.kind = sum\nseed = 21\n"
                "density.x.family = power-law\ndensity.x.hurst = 0.5\n"
                "density.y.family = zero\n"
                "mc.radii = 0.3, 0.6\nmc.replicas = 120\n") + SMALL_GRID
        code, outdir = run_cli(tmp_path, text)
        assert code == 0
        for row in read_csv(outdir / "report.csv"):
            assert row["p_lhs"] == row["p_rhs"]

    def test_coupling_self_domination(self, tmp_path):
        code, outdir = run_cli(tmp_path, COUPLING_SELF)
        assert code == 0
        summary = summary_dict(outdir)
        assert summary["cross_orthogonality"] == "0.0"
        assert summary["covariance_match_passed"] == "true"
        rows = read_csv(outdir / "coupling.csv")
        assert len(rows) == 36
        assert all(r["cross"] == "0.0" for r in rows)

    def test_comparison_self_domination(self, tmp_path):
        code, outdir = run_cli(tmp_path, COMPARISON_SELF)
        assert code == 0
        for row in read_csv(outdir / "report.csv"):
            assert row["p_lhs"] == row["p_rhs"]
            assert row["verdict"] == "consistent"

    def test_comparison_auto_constant_and_radii(self, tmp_path):
        text = ("command = verify-comparison\nseed = 37\n"
                "density.x.family = power-law\ndensity.x.hurst = 0.5\n"
                "density.y.family = perturbed\n"
                "density.y.base.family = power-law\n"
                "density.y.base.hurst = 0.5\n"
                "density.y.modulation.offset = 2.0\n"
                "density.y.modulation.amplitude = 1.0\n"
                "constant = auto\nmc.radii = auto\nmc.replicas = 120\n"
                "mc.pilot_replicas = 100\n") + SMALL_GRID
        code, outdir = run_cli(tmp_path, text)
        summary = summary_dict(outdir)
        assert code in (0, 2)
        assert summary["worst_verdict"] in ("consistent", "underpowered")
        # auto C for f_x <= C f_y with f_y >= f_x: the ratio 1/(2 + sin)
        # approaches 1 at the modulation's troughs
        assert 0.99 < float(summary["constant"]) <= 1.0 + 1e-6
        radii = [float(v) for k, v in summary.items() if k.startswith("radius.")]
        assert len(radii) == 5
        assert radii == sorted(radii)

    def test_estimate_hurst_small_run(self, tmp_path):
        text = ("command = estimate-hurst\nseed = 41\n"
                "density.family = power-law\ndensity.hurst = 0.5\n"
                "spatial_grid.resolution = 256\nmc.replicas = 100\n"
                "frequency_grid.j_lo = -12\nfrequency_grid.j_hi = 12\n"
                "frequency_grid.nodes_per_annulus = 16\n")
        code, outdir = run_cli(tmp_path, text)
        assert code == 0
        summary = summary_dict(outdir)
        assert abs(float(summary["estimate"]) - 0.5) < 0.05
        assert len(read_csv(outdir / "variation.csv")) == 4


class TestDeterminism:
    def test_threads_do_not_change_any_byte(self, tmp_path):
        _, one = run_cli(tmp_path, COUPLING_SELF, name="t1",
                         extra=["--threads", "1"])
        _, three = run_cli(tmp_path, COUPLING_SELF, name="t3",
                           extra=["--threads", "3"])
        assert tree_bytes(one) == tree_bytes(three)


class TestErrorPaths:
    def test_missing_config_file(self, tmp_path, capsys):
        code = console_main(["--config", str(tmp_path / "nope.cfg")])
        assert code == 3
        assert "cannot read config" in capsys.readouterr().err

    def test_invalid_config_reports_lines(self, tmp_path, capsys):
        config = tmp_path / "bad.cfg"
        config.write_text("command = density-check\n"
                          "density.family = power-law\n"
                          "density.hurst = 1.2\n")
        code = console_main(["--config", str(config)])
        assert code == 3
        err = capsys.readouterr().err
        assert "error: line 3: H must lie in (0,1), got 1.2" in err
        assert "master seed is mandatory" in err

    def test_zero_threads(self, tmp_path, capsys):
        config = tmp_path / "ok.cfg"
        config.write_text(CHECK_MAIN)
        code = console_main(["--config", str(config), "--threads", "0"])
        assert code == 3
        assert "--threads must be at least 1" in capsys.readouterr().err

    def test_failed_domination_is_a_runtime_error(self, tmp_path, capsys):
        code, _ = run_cli(tmp_path,
                          COUPLING_SELF.replace("constant = 1.0",
                                                "constant = 0.5"))
        assert code == 3
        assert "domination" in capsys.readouterr().err

    def test_output_falls_back_to_the_config_key(self, tmp_path):
        outdir = tmp_path / "from-config"
        config = tmp_path / "with-output.cfg"
        config.write_text(CHECK_MAIN + f"output = {outdir}\n")
        code = console_main(["--config", str(config)])
        assert code == 0
        assert (outdir / "summary.txt").exists()


class TestExitPlumbing:
    @pytest.mark.parametrize("stub_code", [cli.EXIT_VIOLATED,
                                           cli.EXIT_UNDERPOWERED])
    def test_runner_code_lands_in_summary_and_return(self, tmp_path,
                                                     monkeypatch, stub_code):
        def stub(cfg, outdir, threads, verbose):
            return stub_code, ["stub = yes"]
        monkeypatch.setitem(cli._RUNNERS, "density-check", stub)
        code = cli.run(parse_config(CHECK_MAIN), tmp_path / "out")
        assert code == stub_code
        summary = summary_dict(tmp_path / "out")
        assert summary["exit_status"] == str(stub_code)
        assert summary["stub"] == "yes"

    def test_runner_exception_becomes_exit_3(self, tmp_path, monkeypatch,
                                             capsys):
        def stub(cfg, outdir, threads, verbose):
            raise RuntimeError("synthetic failure")
        monkeypatch.setitem(cli._RUNNERS, "density-check", stub)
        code = cli.run(parse_config(CHECK_MAIN), tmp_path / "out")
        assert code == 3
        assert "synthetic failure" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text(CHECK_MAIN)
    result = subprocess.run(
        [sys.executable, "-m", "specfield", "--config", str(config),
         "--output", str(tmp_path / "out")],
        capture_output=True, text=True)
    assert result.returncode == 0
    assert (tmp_path / "out" / "summary.txt").exists()
