import subprocess
import sys

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from bamg.cli import (EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, RunConfig, main, merge_config,
                      read_config_file, run, table_sweep)


def _csv(path):
    return path.read_text().splitlines()


class TestSolve:
    def test_uniform_33_pgmres(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["solve", "--problem", "uniform", "--n", "33", "--mode", "pgmres",
                     "--setup-cycles", "1", "--out", str(out)])
        assert code == EXIT_OK
        text = capsys.readouterr().out
        assert "pgmres iterations" in text and "operator complexity" in text
        hist = _csv(out / "krylov_history.csv")
        assert hist[0] == "iteration,preconditioned_residual,true_residual"
        assert 1 <= len(hist) - 2 <= 16
        assert float(hist[-1].split(",")[2]) <= 1e-8
        for name in ("report.txt", "state.csv", "mle_history.csv", "levels.csv",
                     "multiplicity.csv"):
            assert (out / name).exists()
        assert _csv(out / "levels.csv")[0] == "level,n,nnz,grid"

    def test_tandem_17_mle(self):
        rep = run(RunConfig(problem="tandem", n=17, mode="mle"))
        assert rep.converged and rep.phases["mle"] <= 16
        assert rep.residual <= 1e-8

    def test_byte_identical_outputs(self, tmp_path):
        for d in ("a", "b"):
            assert main(["solve", "--problem", "planar", "--n", "256", "--seed", "3",
                         "--out", str(tmp_path / d)]) == EXIT_OK
        for name in ("state.csv", "mle_history.csv", "krylov_history.csv", "levels.csv",
                     "multiplicity.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_not_converged_exit_code(self):
        assert main(["solve", "--problem", "uniform", "--n", "17", "--max-iters", "1",
                     "--tol", "1e-14"]) == EXIT_NOT_CONVERGED

    @pytest.mark.parametrize("argv", [
        ["solve", "--n", "17"],
        ["solve", "--problem", "uniform"],
        ["solve", "--problem", "uniform", "--n", "17", "--tau", "3"],
        ["solve", "--problem", "uniform", "--n", "17", "--input", "x.mtx"],
        ["solve", "--input", "/nonexistent.mtx"],
        ["solve", "--problem", "cube", "--n", "17"],
        ["frobnicate"],
    ])
    def test_errors_exit_one(self, argv, capsys):
        try:
            code = main(argv)
        except SystemExit as stop:
            code = stop.code
        assert code == EXIT_ERROR
        assert "error" in capsys.readouterr().err

    @pytest.mark.parametrize("mode", ["power", "richardson"])
    def test_baselines(self, mode, tmp_path):
        rep = run(RunConfig(problem="planar", n=100, seed=1, mode=mode, tol=1e-9))
        assert rep.converged and rep.phases[mode] > 1
        assert rep.operator_complexity is None


class TestConfig:
    def test_file_format(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nproblem = tandem\nn=17\nmax-iters = 7  # trailing\n"
                       "strip_self_transitions = yes\nmax_levels = none\n")
        vals = read_config_file(cfg)
        assert vals == {"problem": "tandem", "n": 17, "max_iters": 7,
                        "strip_self_transitions": True, "max_levels": None}

    def test_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("problem = tandem\nn = 17\ntol = 1e-6\n")
        merged = merge_config({"n": 9}, cfg)
        assert (merged.problem, merged.n, merged.tol, merged.mode) == ("tandem", 9, 1e-6, "pgmres")

    def test_cli_overrides_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("problem = uniform\nn = 17\nmode = mle\n")
        assert main(["solve", "--config", str(cfg), "--mode", "pgmres"]) == EXIT_OK
        assert "mode: pgmres" in capsys.readouterr().out

    @pytest.mark.parametrize("body", ["colour = red\n", "n 17\n", "strip_self_transitions = maybe\n",
                                      "n = seventeen\n"])
    def test_bad_file(self, tmp_path, body):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(body)
        with pytest.raises(ValueError, match="bad.cfg:1"):
            read_config_file(cfg)


class TestSweep:
    def test_table(self):
        text, csv = table_sweep("uniform", [9, 17], RunConfig(problem="uniform", n=9))
        rows = csv.splitlines()
        assert rows[0] == "N,MLE,pGMRES,pArnoldi"
        assert [r.split(",")[0] for r in rows[1:]] == ["9", "17"]
        assert all(c.isdigit() for r in rows[1:] for c in r.split(",")[1:])
        assert text.splitlines()[0].split() == ["N", "MLE", "pGMRES", "pArnoldi"]

    def test_failed_cell_continues(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        # N = 1 cannot be generated; the N = 9 row must still be filled
        code = main(["sweep", "--problem", "tandem", "--sizes", "1", "9", "--out", str(out)])
        rows = _csv(out)
        assert rows[1] == "1,failed,failed,failed"
        assert rows[2].startswith("9,") and "failed" not in rows[2]
        assert code == EXIT_ERROR


class TestDense:
    def test_spectrum_csv(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["spectrum", "--problem", "tandem", "--n", "9", "--operator", "A",
                     "--operator", "cb", "--out", str(out)]) == EXIT_OK
        rows = _csv(out)
        assert rows[0] == "label,index,real,imag"
        labels = [r.split(",")[0] for r in rows[1:]]
        assert labels.count("A") == 81 and labels.count("cb") == 81

    def test_fov_stdout(self, capsys):
        assert main(["fov", "--problem", "uniform", "--n", "5", "--angles", "8"]) == EXIT_OK
        rows = capsys.readouterr().out.splitlines()
        assert rows[0] == "label,index,real,imag" and len(rows) == 9

    def test_limit(self, capsys):
        assert main(["spectrum", "--problem", "uniform", "--n", "9", "--limit", "50"]) == EXIT_ERROR
        assert "n <= 50" in capsys.readouterr().err


class TestFiles:
    def test_gen_and_round_trip(self, tmp_path):
        mtx = tmp_path / "u17.mtx"
        assert main(["gen", "--problem", "uniform", "--n", "17", "--out", str(mtx)]) == EXIT_OK
        assert main(["validate", "--input", str(mtx)]) == EXIT_OK
        gen = run(RunConfig(problem="uniform", n=17))
        loaded = run(RunConfig(input=str(mtx)))
        assert gen.phases == loaded.phases
        assert gen.krylov_history == loaded.krylov_history
        np.testing.assert_array_equal(gen.x, loaded.x)

    def test_gen_planar_points(self, tmp_path):
        pts = tmp_path / "p.csv"
        assert main(["gen", "--problem", "planar", "--n", "50", "--seed", "2",
                     "--out", str(tmp_path / "p.mtx"), "--points", str(pts)]) == EXIT_OK
        assert len(_csv(pts)) == 51

    def test_points_only_for_planar(self, tmp_path):
        assert main(["gen", "--problem", "uniform", "--n", "5", "--out", str(tmp_path / "u.mtx"),
                     "--points", str(tmp_path / "p.csv")]) == EXIT_ERROR

    def test_invalid_chain(self, tmp_path, capsys):
        bad = tmp_path / "bad.mtx"
        scipy.io.mmwrite(str(bad), sp.coo_matrix(np.array([[0.0, 0.5], [1.0, 0.0]])))
        assert main(["validate", "--input", str(bad)]) == EXIT_ERROR
        assert main(["solve", "--input", str(bad)]) == EXIT_ERROR
        assert "not a valid chain" in capsys.readouterr().err

    def test_strip_self_transitions(self, tmp_path):
        lazy = tmp_path / "lazy.mtx"
        A = np.array([[0.5, 0.5, 0.0], [0.5, 0.0, 1.0], [0.0, 0.5, 0.0]])
        scipy.io.mmwrite(str(lazy), sp.coo_matrix(A))
        assert main(["validate", "--input", str(lazy)]) == EXIT_ERROR
        assert main(["validate", "--input", str(lazy), "--strip-self-transitions"]) == EXIT_OK


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "bamg.cli", "solve", "--problem", "uniform",
                          "--n", "9"], capture_output=True, text=True)
    assert out.returncode == EXIT_OK
    assert "converged" in out.stdout
