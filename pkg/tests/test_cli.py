import csv

import pytest

from csmsm.cli import main
from csmsm.spatial import GridState, fractions_from_cells


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_stats(path):
    with open(path / "stats.csv") as fh:
        return list(csv.DictReader(fh))


class TestMatch:
    @pytest.mark.parametrize(
        "a, b, total",
        [
            ("CSMSM:MASTER", "CSMSM:SLAVE", "total 231 16"),
            ("CSMSM:MASTER", "TFT", "total 56 51"),
            ("ALLC", "ALLD", "total 0 250"),
        ],
    )
    def test_totals(self, capsys, a, b, total):
        code, out, _ = run_cli(capsys, "match", a, b, "--rounds", 50)
        assert code == 0
        assert total in out.splitlines()

    def test_closed_form_line(self, capsys):
        _, out, _ = run_cli(capsys, "match", "CSMSM:SLAVE", "ALLD", "--rounds", 50)
        assert out.splitlines()[-1] == "closed_form 49 54"
        _, out, _ = run_cli(capsys, "match", "GRIM", "ALLD", "--rounds", 50)
        assert "closed_form" not in out

    def test_transcript_rows(self, capsys):
        _, out, _ = run_cli(capsys, "match", "CSMSM:MASTER", "TFT", "--rounds", 3)
        lines = out.splitlines()
        assert lines[1] == "round move_a move_b cum_a cum_b"
        assert lines[2:5] == ["1 C C 3 3", "2 D C 8 3", "3 D D 9 4"]

    def test_bad_token(self, capsys):
        code, _, err = run_cli(capsys, "match", "WSLS", "TFT")
        assert code == 1 and "valid tokens" in err

    def test_role_on_non_csmsm(self, capsys):
        assert run_cli(capsys, "match", "TFT:SLAVE", "TFT")[0] == 1

    def test_bad_payoffs(self, capsys):
        code, _, err = run_cli(capsys, "match", "TFT", "TFT", "--payoffs", "3,3,1,0")
        assert code == 1 and "T > R" in err

    def test_random_seeded(self, capsys):
        a = run_cli(capsys, "match", "RANDOM", "TFT", "--seed", 4)[1]
        b = run_cli(capsys, "match", "RANDOM", "TFT", "--seed", 4)[1]
        assert a == b


class TestAnalyze:
    def test_text(self, capsys):
        code, out, _ = run_cli(capsys, "analyze", "--rounds", 50)
        assert code == 0
        assert "302/85 ≈ 3.553" in out
        assert "17/2 ≈ 8.500" in out

    def test_csv(self, capsys):
        _, out, _ = run_cli(capsys, "analyze", "--format", "csv", "--l", 4)
        rows = dict(line.split(",", 1) for line in out.strip().splitlines())
        assert rows["eq2_l_star"] == "302/85"
        assert rows["eq6_n_star"] == "17/2"
        assert rows["verdict_border"] == "grow"

    def test_singular(self, capsys):
        code, _, err = run_cli(capsys, "analyze", "--rounds", 9, "--payoffs", "4,3,1,0")
        assert code == 1 and "denominator" in err

    def test_out_of_range_l(self, capsys):
        assert run_cli(capsys, "analyze", "--l", 6)[0] == 1


class TestRun:
    def test_zero_generations(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "run", "--width", 10, "--height", 10, "--generations", 0, "--out", tmp_path)
        assert code == 0
        rows = read_stats(tmp_path)
        assert len(rows) == 1 and rows[0]["generation"] == "0"
        assert "final_generation=0" in out

    def test_homogeneous_constant(self, capsys, tmp_path):
        run_cli(capsys, "run", "--width", 6, "--height", 6, "--mix", "TFT:1.0", "--generations", 4, "--out", tmp_path)
        rows = read_stats(tmp_path)
        assert [r["generation"] for r in rows] == ["0", "1", "2", "3", "4"]
        assert all(r["TFT_frac"] == "1.000000" for r in rows)
        assert all(r["TFT_avg_payoff_per_move"] == "3.000000" for r in rows[:-1])
        assert rows[-1]["TFT_avg_payoff_per_move"] == ""
        assert (tmp_path / "summary.txt").read_text().startswith("fixation_generation=0 fixation_kind=TFT")

    def test_snapshots_match_csv(self, capsys, tmp_path):
        run_cli(capsys, "run", "--width", 15, "--height", 12, "--generations", 6, "--snapshot-every", 3,
                "--mix", "CSMSM:0.4,TFT:0.3,ALLD:0.3", "--seed", 3, "--out", tmp_path)
        rows = {int(r["generation"]): r for r in read_stats(tmp_path)}
        snaps = sorted((tmp_path / "snapshots").iterdir())
        assert [s.name for s in snaps] == ["gen_000000.txt", "gen_000003.txt", "gen_000006.txt"]
        for s in snaps:
            g = GridState.from_text(s.read_text())
            assert g.cells.shape == (12, 15)
            fr = fractions_from_cells(g.cells)
            row = rows[int(s.stem[4:])]
            for key, val in fr.items():
                col = f"{key}_frac"
                assert row[col] == f"{val:.6f}"

    def test_config_file_overridden_by_flags(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("# demo\nwidth = 5\nheight=5\ngenerations=3\nmix=TFT:1.0\nseed=2\n")
        out = tmp_path / "o"
        run_cli(capsys, "run", "--config", cfg, "--generations", 1, "--out", out)
        rows = read_stats(out)
        assert len(rows) == 2

    def test_bad_config_key(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("colour = blue\n")
        code, _, err = run_cli(capsys, "run", "--config", cfg, "--out", tmp_path)
        assert code == 1 and "colour" in err

    def test_missing_config_is_io_error(self, capsys, tmp_path):
        assert run_cli(capsys, "run", "--config", tmp_path / "nope.txt")[0] == 2

    def test_unwritable_output_is_io_error(self, capsys, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code = run_cli(capsys, "run", "--width", 4, "--height", 4, "--generations", 0, "--out", blocker / "sub")[0]
        assert code == 2

    @pytest.mark.parametrize(
        "flags",
        [
            ("--width", 2),
            ("--p-slave", 1.5),
            ("--mix", "TFT:0.6"),
            ("--rounds", 0),
            ("--workers", 0),
            ("--generations", -1),
        ],
    )
    def test_usage_errors(self, capsys, tmp_path, flags):
        assert run_cli(capsys, "run", *flags, "--out", tmp_path)[0] == 1

    def test_workers_byte_identical(self, capsys, tmp_path):
        common = ["run", "--width", 20, "--height", 20, "--mix", "CSMSM:0.3,RANDOM:0.3,ADAPTIVE:0.4",
                  "--generations", 4, "--snapshot-every", 2, "--seed", 11, "--rounds", 20]
        run_cli(capsys, *common, "--workers", 1, "--out", tmp_path / "a")
        run_cli(capsys, *common, "--workers", 4, "--out", tmp_path / "b")
        for rel in ("stats.csv", "snapshots/gen_000002.txt", "snapshots/gen_000004.txt"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


class TestScenario:
    def test_fig3(self, capsys, tmp_path):
        desc = tmp_path / "s.txt"
        desc.write_text(
            "grid 9 9\nbackground TFT\ncluster 3 3 3 3\nfreeze_roles on\n"
            + "".join(f"role {x} {y} SLAVE\n" for x, y in [(3, 3), (5, 3), (3, 4), (5, 4), (3, 5), (4, 5), (5, 5)])
        )
        code, out, _ = run_cli(capsys, "scenario", desc, "--out", tmp_path / "o")
        assert code == 0
        assert "converted_to_csmsm_gen1=3 lost_csmsm_gen1=0" in out
        payoffs = (tmp_path / "o" / "payoffs_gen0.txt").read_text().splitlines()
        assert "M:1238" in payoffs[3].replace(" ", "")

    @pytest.mark.parametrize("rounds, converted", [(50, 10), (8, 0)])
    def test_two_masters_in_alld(self, capsys, tmp_path, rounds, converted):
        desc = tmp_path / "s.txt"
        desc.write_text("grid 9 9\nbackground ALLD\ncluster 4 4 2 1\nfreeze_roles on\n")
        code, out, _ = run_cli(capsys, "scenario", desc, "--rounds", rounds, "--out", tmp_path / "o")
        assert code == 0
        assert f"converted_to_csmsm_gen1={converted} " in out
        if rounds == 50:
            payoffs = (tmp_path / "o" / "payoffs_gen0.txt").read_text().splitlines()
            assert payoffs[4].replace(" ", "").count("M:489") == 2

    def test_malformed_line(self, capsys, tmp_path):
        desc = tmp_path / "s.txt"
        desc.write_text("grid 9 9\n\ncluster 3 x 3 3\n")
        code, _, err = run_cli(capsys, "scenario", desc, "--out", tmp_path)
        assert code == 1 and "line 3" in err

    def test_missing_descriptor(self, capsys, tmp_path):
        assert run_cli(capsys, "scenario", tmp_path / "missing.txt")[0] == 2


def test_no_subcommand_is_usage_error(capsys):
    assert run_cli(capsys)[0] == 1


def test_module_entry(tmp_path):
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "csmsm", "match", "TFT", "TFT", "--rounds", "7"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "total 21 21" in res.stdout
