"""CLI harness tests: subcommand output, config merging, reproducibility."""

import csv
import io
import math
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import pytest

from qstrength import bca, cli
from qstrength.qnormal import f_qn


def run_cli(argv):
    out = io.StringIO()
    err = io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli.main(argv)
    return code, out.getvalue(), err.getvalue()


def read_csv(path: Path):
    """Split a CSV file into ('#' metadata lines, header row, data rows)."""
    meta, rows = [], []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                meta.append(line.rstrip("\n"))
            else:
                rows.append(line)
    parsed = list(csv.reader(rows))
    return meta, parsed[0], parsed[1:]


# ---------------------------------------------------------------------------
# tables / params / qnormal / npc


class TestTables:
    def test_both_tables_written(self, tmp_path):
        code, _, _ = run_cli(["tables", "--out", str(tmp_path)])
        assert code == 0
        meta1, head1, rows1 = read_csv(tmp_path / "table1.csv")
        assert any(line.startswith("# qstrength") for line in meta1)
        assert len(rows1) == 16
        by_key = {(int(r[0]), int(r[1]), int(r[3])): r for r in rows1}
        row = by_key[(20, 8, 2)]
        idx = head1.index("q_v_3dp")
        assert row[idx] == "0.417"
        _, head2, rows2 = read_csv(tmp_path / "table2.csv")
        assert len(rows2) == 9

    def test_single_table_to_stdout(self):
        code, out, _ = run_cli(["tables", "1"])
        assert code == 0
        assert "q_hv" in out
        assert out.count("\n") > 16

    def test_table2_only(self, tmp_path):
        code, _, _ = run_cli(["tables", "2", "--out", str(tmp_path)])
        assert code == 0
        assert not (tmp_path / "table1.csv").exists()
        assert (tmp_path / "table2.csv").exists()


class TestParams:
    def test_xi_sq_target_resolves_coupling(self, tmp_path):
        code, _, _ = run_cli(
            ["params", "--N", "12", "--m", "6", "--t", "1", "--k", "2",
             "--xi-sq", "0.5", "--out", str(tmp_path)]
        )
        assert code == 0
        _, _, rows = read_csv(tmp_path / "params.csv")
        kv = {r[0]: r[1] for r in rows}
        assert float(kv["lambda_finite_n"]) == pytest.approx(math.sqrt(0.1), rel=1e-6)
        assert float(kv["xi_sq_finite"]) == pytest.approx(0.5, rel=1e-6)
        assert float(kv["dim"]) == 924
        assert float(kv["q_hv_finite"]) == pytest.approx(
            bca.q_hv_finite(12, 6, 1, 2), rel=1e-5
        )

    def test_predictions_table_alongside(self, tmp_path):
        code, _, _ = run_cli(
            ["params", "--N", "12", "--m", "6", "--t", "1", "--k", "2",
             "--xi-sq", "0.5", "--out", str(tmp_path)]
        )
        assert code == 0
        _, head, rows = read_csv(tmp_path / "predictions.csv")
        assert head[0] == "e_hat"
        e = [float(r[0]) for r in rows]
        g1 = [float(r[head.index("gamma1")]) for r in rows]
        assert e == sorted(e)
        # skewness flips sign against the launch energy
        for ei, gi in zip(e, g1):
            if ei != 0.0:
                assert gi * ei < 0

    def test_explicit_lambda_accepted(self):
        code, out, _ = run_cli(
            ["params", "--N", "12", "--m", "6", "--t", "1", "--k", "2", "--lambda", "0.2"]
        )
        assert code == 0
        assert "lambda,0.2" in out

    def test_missing_coupling_is_an_error(self):
        with pytest.raises(SystemExit):
            run_cli(["params", "--N", "12", "--m", "6", "--t", "1", "--k", "2"])


class TestQnormal:
    def test_semicircle_peak_value(self, tmp_path):
        target = tmp_path / "qn.csv"
        code, _, _ = run_cli(
            ["qnormal", "--q", "0", "--grid=-2:2:5", "--out", str(target)]
        )
        assert code == 0
        _, head, rows = read_csv(target)
        assert head == ["x", "f_qn"]
        assert len(rows) == 5
        mid = rows[2]
        assert float(mid[0]) == 0.0
        assert float(mid[1]) == pytest.approx(1 / math.pi, rel=1e-6)

    def test_conditional_density_needs_both_flags(self):
        with pytest.raises(SystemExit):
            run_cli(["qnormal", "--q", "0.5", "--y", "1.0"])

    def test_conditional_density_grid(self):
        code, out, _ = run_cli(
            ["qnormal", "--q=0.5", "--y=-1.0", "--xi=0.7071", "--grid=-3:3:7"]
        )
        assert code == 0
        lines = [l for l in out.splitlines() if l and not l.startswith("#")]
        assert lines[0] == "x,f_cqn"
        assert len(lines) == 8


class TestNpcCurve:
    def test_curve_is_symmetric_and_bounded(self, tmp_path):
        target = tmp_path / "npc.csv"
        code, _, _ = run_cli(
            ["npc", "--N", "12", "--m", "6", "--t", "1", "--k", "2",
             "--xi-sq", "0.5", "--grid=-2:2:9", "--out", str(target)]
        )
        assert code == 0
        _, head, rows = read_csv(target)
        vals = {float(r[0]): float(r[head.index("npc")]) for r in rows}
        assert vals[0.0] == max(vals.values())
        assert vals[-1.0] == pytest.approx(vals[1.0], rel=1e-4)
        assert all(0 < v < 924 for v in vals.values())


# ---------------------------------------------------------------------------
# simulate

def sim_args(**overrides):
    """Small smoke config as an argv list; flags use the key=value form."""
    values = {
        "N": 8, "m": 4, "t": 1, "k": 2, "xi-sq": 0.5, "members": 4, "seed": 7,
        "windows": "-1,0,1", "window-width": 0.4, "grid": "-3.2:3.2:32",
    }
    values.update(overrides)
    return ["simulate"] + [f"--{key}={val}" for key, val in values.items()]


SIM_ARGS = sim_args()


def sim_outputs(tmp_path: Path):
    return sorted(p.name for p in tmp_path.iterdir())


class TestSimulate:
    def test_report_files_written(self, tmp_path):
        code, _, _ = run_cli(SIM_ARGS + ["--out", str(tmp_path)])
        assert code == 0
        assert sim_outputs(tmp_path) == [
            "moments.csv", "npc.csv", "params.csv", "strength_functions.csv",
        ]
        meta, head, rows = read_csv(tmp_path / "strength_functions.csv")
        assert head[:2] == ["window_center", "e0_mean"]
        assert any("config" in line for line in meta)

    def test_moments_flag_adds_bivariate_report(self, tmp_path):
        code, _, _ = run_cli(SIM_ARGS + ["--moments", "--out", str(tmp_path)])
        assert code == 0
        assert "bivariate.csv" in sim_outputs(tmp_path)
        assert "moments.csv" in sim_outputs(tmp_path)

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(SIM_ARGS + ["--workers", "1", "--out", str(a)])[0] == 0
        assert run_cli(SIM_ARGS + ["--workers", "2", "--out", str(b)])[0] == 0
        for name in sim_outputs(a):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(SIM_ARGS + ["--out", str(a)])
        run_cli(SIM_ARGS + ["--out", str(b)])
        for name in sim_outputs(a):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_different_seed_changes_results(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(SIM_ARGS + ["--out", str(a)])
        run_cli(sim_args(seed=8) + ["--out", str(b)])
        assert (a / "strength_functions.csv").read_bytes() != (
            b / "strength_functions.csv"
        ).read_bytes()

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# small smoke configuration\n"
            "N = 8\nm = 4\nt = 1\nk = 2\nxi_sq = 0.5\n"
            "members = 4\nseed = 7\nwindows = -1,0,1\nwindow_width = 0.4\n"
            "grid = -3.2:3.2:32\n"
        )
        a, b = tmp_path / "a", tmp_path / "b"
        code, _, _ = run_cli(["simulate", "--config", str(cfg), "--out", str(a)])
        assert code == 0
        run_cli(SIM_ARGS + ["--out", str(b)])
        assert (a / "strength_functions.csv").read_bytes() == (
            b / "strength_functions.csv"
        ).read_bytes()
        # a flag overrides the same key from the file
        c = tmp_path / "c"
        run_cli(["simulate", "--config", str(cfg), "--seed", "8", "--out", str(c)])
        assert (a / "strength_functions.csv").read_bytes() != (
            c / "strength_functions.csv"
        ).read_bytes()

    def test_check_mode_uncoupled_run_passes(self, tmp_path, capsys):
        code, out, _ = run_cli(
            ["simulate", "--N", "8", "--m", "4", "--t", "1", "--k", "2",
             "--lambda", "0", "--members", "2", "--seed", "3",
             "--out", str(tmp_path), "--check"]
        )
        assert code == 0
        assert "members-completed: 2/2" in out
        assert "uncoupled-npc-unity" in out
        assert "FAIL" not in out

    def test_check_mode_fails_on_noisy_tiny_run(self, tmp_path):
        # two members cannot satisfy the statistical gates: exit code reports it
        code, out, _ = run_cli(
            ["simulate", "--N", "8", "--m", "4", "--t", "1", "--k", "2",
             "--xi-sq", "0.5", "--members", "2", "--seed", "3",
             "--out", str(tmp_path), "--check"]
        )
        assert code == 1
        assert "FAIL" in out

    def test_params_csv_matches_resolved_coupling(self, tmp_path):
        run_cli(SIM_ARGS + ["--out", str(tmp_path)])
        _, _, rows = read_csv(tmp_path / "params.csv")
        kv = {r[0]: r[1] for r in rows}
        lam = bca.lam_for_xi_sq(8, 4, 1, 2, 0.5)
        assert float(kv["lambda_finite_n"]) == pytest.approx(lam, rel=1e-5)

    def test_emitted_density_parses_to_finite_floats(self, tmp_path):
        run_cli(SIM_ARGS + ["--out", str(tmp_path)])
        _, head, rows = read_csv(tmp_path / "strength_functions.csv")
        fi = head.index("f_empirical")
        vals = [float(r[fi]) for r in rows]
        assert all(math.isfinite(v) for v in vals)
        assert any(v > 0 for v in vals)
