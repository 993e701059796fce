import csv
import logging
import math
from pathlib import Path

import numpy as np
import pytest

from timedd import ConfigError
from timedd.cli import configure_logging, main
from timedd.config import parse_config
from timedd.reports import CsvTable, fmt

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
[problem]
nu = 0.1
[algorithms]
select = {algs}
[spectrum]
n = 6
[sweep]
d_min = 1e-2
d_max = 1e2
d_count = {count}
thetas = {thetas}
[solver]
nt = 100
k_max = 40
initial_guess = random
"""


def write_cfg(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def small(tmp_path, algs="DN1, ND2", count=20, thetas="1"):
    return write_cfg(tmp_path, SMALL.format(algs=algs, count=count, thetas=thetas))


def read_csv(path):
    with open(path) as fh:
        return [row for row in csv.reader(fh) if row and not row[0].startswith("#")]


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config("[problem]\nnu = 0.5\n")
        assert cfg.params.nu == 0.5 and cfg.params.alpha == 0.5
        assert len(cfg.algorithms) == 6
        assert cfg.spectrum.source == "laplacian" and cfg.solver.nt == 1000
        assert cfg.thetas == (1.0,)

    def test_alpha_defaults_to_mid_horizon(self):
        assert parse_config("[problem]\nnu = 1\nT = 4\n").params.alpha == 2.0

    @pytest.mark.parametrize("text, fld", [
        ("[problem]\nnu = 1\nmu = 2\n", "problem.mu"),
        ("[problem]\nnu = 1\n[extra]\nx = 1\n", "extra"),
        ("[problem]\ngamma = 1\n", "problem.nu"),
        ("[problem]\nnu = abc\n", "problem.nu"),
        ("[problem]\nnu = 1\n[solver]\nnt = 10.5\n", "solver.nt"),
        ("[problem]\nnu = 1\n[solver]\nscheme = rk4\n", "solver.scheme"),
        ("[problem]\nnu = 1\n[solver]\nerror_equations = maybe\n", "solver.error_equations"),
        ("[problem]\nnu = 1\n[sweep]\nthetas = 1, x\n", "sweep.thetas"),
        ("[problem]\nnu = 1\n[sweep]\nthetas = 3\n", "sweep.thetas"),
        ("[problem]\nnu = 1\n[algorithms]\nselect = DN9\n", "algorithms.select"),
        ("[problem]\nnu = 1\n[spectrum]\nsource = matrix\n", "spectrum.matrix_file"),
        ("[problem]\nnu = 1\n[spectrum]\nsource = eigenvalues\neigenvalues = 1, -2\n", "spectrum.eigenvalues"),
        ("[problem]\nnu = -1\n", "problem.nu"),
        ("[problem]\nnu = 1\nalpha = 2\n", "problem.alpha"),
    ])
    def test_errors_name_the_field(self, text, fld):
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.field == fld

    def test_thetas_and_eigenvalues(self):
        cfg = parse_config("[problem]\nnu = 1\n[sweep]\nthetas = 1, opt, 0.5, 1\n"
                           "[spectrum]\nsource = eigenvalues\neigenvalues = 3 1 2\n")
        assert cfg.thetas == (1.0, "opt", 0.5)
        np.testing.assert_allclose(cfg.spectrum.build().eigenvalues, [1, 2, 3])

    def test_matrix_path_is_relative_to_config(self, tmp_path):
        cfg = parse_config("[problem]\nnu = 1\n[spectrum]\nsource = matrix\nmatrix_file = a.txt\n",
                           source_path=tmp_path / "run.ini")
        assert cfg.spectrum.matrix_file == tmp_path / "a.txt"

    def test_shipped_configs_parse(self):
        for path in sorted(CONFIGS.glob("*.ini")):
            parse_config(path.read_text(), path)


class TestFormatting:
    def test_cells(self):
        assert fmt(0.1) == "0.1" and fmt(3) == "3" and fmt(None) == "n/a"
        assert fmt(math.nan) == "div" and fmt(math.inf) == "inf" and fmt(True) == "true"

    def test_round_trip(self):
        x = 1 / 3
        assert float(fmt(x)) == x

    def test_footer(self):
        t = CsvTable(("a",), ((1,),), ("note",))
        assert t.to_text() == "a\n1\n# note\n"


class TestCli:
    def test_unknown_key_exit_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "[problem]\nnu = 1\nbogus = 2\n")
        assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "problem.bogus" in capsys.readouterr().err

    def test_missing_config_exit_2(self, tmp_path):
        assert main(["analyze", "--config", str(tmp_path / "none.ini")]) == 2

    def test_bad_jobs(self, tmp_path):
        assert main(["analyze", "--config", str(small(tmp_path)), "--jobs", "0"]) == 2

    def test_corrupted_matrix_exit_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("3\n1 2\n")
        cfg = write_cfg(tmp_path, "[problem]\nnu = 1\n[spectrum]\nsource = matrix\nmatrix_file = bad.txt\n"
                                  "[solver]\nnt = 20\n")
        assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
        assert str(bad) in capsys.readouterr().err

    def test_analyze_outputs(self, tmp_path):
        out = tmp_path / "o"
        assert main(["analyze", "--config", str(small(tmp_path)), "--out", str(out), "--jobs", "1"]) == 0
        rows = read_csv(out / "analyze.csv")
        assert rows[0] == ["theta", "d", "DN1", "ND2"]
        assert len(rows) == 1 + 20 + 2
        assert rows[-2][1] == "0.0" and rows[-1][1] == "inf"
        assert rows[-2][2] == "1.0"
        for name in ("analyze.gp", "analyze.png", "RESULTS.md"):
            assert (out / name).stat().st_size > 0

    def test_single_point_grid(self, tmp_path):
        out = tmp_path / "o"
        assert main(["analyze", "--config", str(small(tmp_path, count=1, thetas="1, 0.5")), "--out", str(out)]) == 0
        rows = read_csv(out / "analyze.csv")
        assert len(rows) == 1 + 2 * (1 + 2)
        assert [r[1] for r in rows[1:4]] == ["0.01", "0.0", "inf"]

    def test_csv_is_reproducible(self, tmp_path):
        cfg = small(tmp_path, thetas="1, opt")
        for cmd, name in (("analyze", "analyze.csv"), ("solve", "solve_summary.csv")):
            texts = []
            for run in ("a", "b"):
                out = tmp_path / run
                assert main([cmd, "--config", str(cfg), "--out", str(out), "--seed", "7"]) == 0
                texts.append((out / name).read_bytes())
            assert texts[0] == texts[1]

    def test_theta_opt_marks_category_one(self, tmp_path):
        out = tmp_path / "o"
        assert main(["theta-opt", "--config", str(small(tmp_path, algs="DN1, DN2")), "--out", str(out)]) == 0
        rows = {r[0]: r for r in read_csv(out / "theta_opt.csv")}
        assert rows["DN1"][1] == "n/a" and rows["DN1"][5] == "n/a"
        assert rows["DN2"][5] == "proven"
        assert abs(float(rows["DN2"][1]) - float(rows["DN2"][2])) < 1e-2
        assert (out / "theta_opt_curves.csv").exists()

    def test_solve_dn2_diverges(self, tmp_path):
        out = tmp_path / "o"
        cfg = write_cfg(tmp_path, (CONFIGS / "dn2_symmetric.ini").read_text().replace("nt = 400", "nt = 100"))
        assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
        rows = {r[0]: r for r in read_csv(out / "solve_summary.csv")}
        assert rows["DN2"][1] == "diverged"
        assert (out / "solve_DN2_iterations.csv").exists() and (out / "solve_DN2_trajectory.csv").exists()

    def test_solve_dn1_converges(self, tmp_path):
        out = tmp_path / "o"
        assert main(["solve", "--config", str(small(tmp_path, algs="DN1")), "--out", str(out)]) == 0
        row = read_csv(out / "solve_summary.csv")[1]
        assert row[1] == "converged"
        assert float(row[3]) == pytest.approx(float(row[4]), rel=0.05)

    def test_verify_symmetric_dn2(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["verify", "--config", str(CONFIGS / "dn2_symmetric.ini"), "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "FAIL" not in text and "checks passed" in text
        assert (out / "verify.txt").read_text().strip().splitlines()[-1] == text.strip().splitlines()[-1]


class TestLogging:
    @pytest.fixture(autouse=True)
    def restore_root_logger(self):
        root = logging.getLogger()
        handlers, level = root.handlers[:], root.level
        yield
        root.handlers[:] = handlers
        root.setLevel(level)

    @pytest.mark.parametrize("name, level", [("error", logging.ERROR), ("INFO", logging.INFO),
                                             ("debug", logging.DEBUG), ("warning", logging.WARNING)])
    def test_levels(self, name, level):
        configure_logging({"TDD_LOG": name})
        assert logging.getLogger().level == level

    def test_default_and_unknown(self, capsys):
        configure_logging({})
        assert logging.getLogger().level == logging.WARNING
        configure_logging({"TDD_LOG": "loud"})
        assert logging.getLogger().level == logging.WARNING
        assert "loud" in capsys.readouterr().err
