import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from algebraic_schwarz import cli, io
from algebraic_schwarz.partition import Partition
from algebraic_schwarz.precond import setup_preconditioner

from conftest import dense


def test_matrix_market_round_trip(tmp_path):
    A = cli.load_problem("laplacian", nx=4, ny=3).A
    io.write_matrix_market(tmp_path / "A.mtx", A)
    text = (tmp_path / "A.mtx").read_text().splitlines()
    assert text[0].startswith("%%MatrixMarket matrix coordinate real symmetric")
    B = io.read_matrix_market(tmp_path / "A.mtx")
    assert (A != B).nnz == 0
    # lower triangle with 1-based indices
    body = [l for l in text if not l.startswith("%")]
    assert body[0].split() == ["12", "12", str((A.nnz + 12) // 2)]
    rows = np.array([l.split()[:2] for l in body[1:]], dtype=int)
    assert rows.min() == 1 and np.all(rows[:, 0] >= rows[:, 1])


def test_vector_round_trip(tmp_path):
    x = np.random.default_rng(0).standard_normal(17)
    io.write_vector(tmp_path / "x.txt", x)
    assert np.array_equal(io.read_vector(tmp_path / "x.txt"), x)


def test_json_cleaning(tmp_path):
    io.write_json(tmp_path / "r.json", {"a": np.int64(3), "b": np.array([1.5, np.nan]), "c": float("inf")})
    data = io.read_json(tmp_path / "r.json")
    assert data == {"schema": io.REPORT_SCHEMA, "a": 3, "b": [1.5, None], "c": "inf"}


def test_generate_testcase1(tmp_path):
    assert cli.main(["generate", "--problem", "testcase1", "--out", str(tmp_path)]) == 0
    A = io.read_matrix_market(tmp_path / "A.mtx")
    assert A.shape == (6496, 6496)
    assert io.read_vector(tmp_path / "b.txt").size == 6496
    cfg = io.read_json(tmp_path / "config.json")
    assert cfg["n"] == 6496 and cfg["schema"] == 1


def test_generate_is_deterministic(tmp_path):
    args = ["generate", "--problem", "laplacian", "--nx", "10", "--ny", "10", "--rhs-kind", "manufactured",
            "--seed", "5"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    for f in ("A.mtx", "b.txt", "x_star.txt", "config.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert io.read_matrix_market(tmp_path / "a" / "A.mtx").shape == (100, 100)


def test_partition_command(tmp_path, capsys):
    assert cli.main(["partition", "--problem", "testcase2-regular", "--nx", "8", "--ny", "8",
                     "--N", "4", "--out", str(tmp_path)]) == 0
    P = io.read_partition(tmp_path / "partition.txt")
    assert P.N == 4 and P.n == 2 * 9 * 8
    assert "sum n_s - n" in capsys.readouterr().out


def _solve(tmp_path, *extra):
    return cli.main(["solve", "--problem", "testcase1", "--nx", "16", "--ny", "4", "--N", "3",
                     "--rhs-kind", "manufactured", "--out", str(tmp_path), *extra])


def test_solve_report_schema_and_history(tmp_path):
    assert _solve(tmp_path) == 0
    rep = io.read_json(tmp_path / "report.json")
    assert rep["schema"] == 1 and rep["N"] == 3 and rep["tau"] == 10.0
    row = rep["rows"][0]
    for key in ("iterations", "converged", "lambda_min", "lambda_max", "kappa", "coarse_dim", "n_minus",
                "n_plus", "bound", "ritz_in_bound", "final_rel_residual"):
        assert key in row
    assert row["converged"] and row["ritz_in_bound"]
    hist = (tmp_path / "history.csv").read_text().splitlines()
    assert hist[0] == "iter,rel_residual,anorm_error" and len(hist) == row["iterations"] + 2


def test_solve_is_deterministic(tmp_path):
    assert _solve(tmp_path / "a") == 0
    assert _solve(tmp_path / "b") == 0
    a, b = (io.read_json(tmp_path / d / "report.json") for d in ("a", "b"))
    a.pop("timings"), b.pop("timings")
    assert a == b


def test_single_subdomain_solve(tmp_path):
    assert cli.main(["solve", "--problem", "laplacian", "--N", "1", "--out", str(tmp_path)]) == 0
    row = io.read_json(tmp_path / "report.json")["rows"][0]
    assert row["iterations"] <= 3


def test_exit_code_config_errors(tmp_path):
    assert _solve(tmp_path, "--tau", "0.5") == cli.EXIT_CONFIG
    bad = tmp_path / "bad.txt"
    bad.write_text("2 5\n0 1 0\n")
    assert cli.main(["solve", "--problem", "laplacian", "--partition", str(bad)]) == cli.EXIT_CONFIG
    assert cli.main(["solve", "--matrix", str(tmp_path / "missing.mtx")]) == cli.EXIT_CONFIG


def test_overlapping_partition_without_coverage_is_rejected(tmp_path):
    prob = cli.load_problem("laplacian", nx=4, ny=4)
    P = Partition(16, (np.arange(9), np.arange(8, 16)))
    io.write_partition(tmp_path / "p.txt", P)
    code = cli.main(["solve", "--problem", "laplacian", "--nx", "4", "--ny", "4",
                     "--partition", str(tmp_path / "p.txt"), "--out", str(tmp_path)])
    assert prob.A.shape[0] == 16 and code == cli.EXIT_CONFIG


def test_disjoint_partition_file_gets_overlap(tmp_path):
    P = Partition(16, (np.arange(8), np.arange(8, 16)))
    io.write_partition(tmp_path / "p.txt", P)
    assert cli.main(["solve", "--problem", "laplacian", "--nx", "4", "--ny", "4",
                     "--partition", str(tmp_path / "p.txt"), "--out", str(tmp_path)]) == 0


def test_exit_code_nonconvergence(tmp_path):
    assert _solve(tmp_path, "--maxit", "1") == cli.EXIT_NOCONV


def test_exit_code_setup_failure(tmp_path):
    A = sp.csr_matrix(np.diag([1.0, -2.0, 3.0, 4.0]) + np.diag([0.5] * 3, 1) + np.diag([0.5] * 3, -1))
    io.write_matrix_market(tmp_path / "A.mtx", A)
    code = cli.main(["solve", "--matrix", str(tmp_path / "A.mtx"), "--N", "1", "--method", "onelevel",
                     "--out", str(tmp_path)])
    assert code == cli.EXIT_SETUP


def test_exit_code_bound_violation(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "ritz_within", lambda *a, **k: False)
    code = cli.main(["spectrum", "--problem", "laplacian", "--N", "2", "--out", str(tmp_path)])
    assert code == cli.EXIT_BOUND


def test_spectrum_single_subdomain(tmp_path):
    assert cli.main(["spectrum", "--problem", "laplacian", "--N", "1", "--out", str(tmp_path)]) == 0
    res = io.read_json(tmp_path / "spectrum.json")
    assert abs(res["lambda_min"] - 1) <= 1e-10 and abs(res["lambda_max"] - 1) <= 1e-10


def test_spectrum_matches_dense(tmp_path):
    args = ["spectrum", "--problem", "testcase1", "--nx", "12", "--ny", "3", "--N", "3", "--tol", "1e-14",
            "--out", str(tmp_path)]
    assert cli.main(args) == 0
    res = io.read_json(tmp_path / "spectrum.json")
    prob = cli.load_problem("testcase1", nx=12, ny=3)
    n = prob.A.shape[0]
    assert n <= 200
    P = cli.make_partition(prob, 3)
    S = setup_preconditioner(prob.A, P, tau=10.0)
    L = np.linalg.cholesky(prob.A.toarray())
    ev = np.linalg.eigvalsh(L.T @ dense(S.H.apply, n) @ L)
    assert abs(res["lambda_min"] - ev[0]) <= 1e-6 * ev[0]
    assert abs(res["lambda_max"] - ev[-1]) <= 1e-6 * ev[-1]
    assert res["within_bound"]


def test_bench_table(tmp_path, capsys):
    code = cli.main(["bench", "--problem", "testcase1", "--nx", "16", "--ny", "4", "--N", "3",
                     "--methods", "onelevel", "hplus-only", "new", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    for label in cli.METHOD_LABELS.values():
        assert label in out
    rep = io.read_json(tmp_path / "bench.json")
    assert [r["method"] for r in rep["rows"]] == ["onelevel", "hplus-only", "new"]
    for m in ("onelevel", "hplus-only", "new"):
        assert (tmp_path / f"history_{m}.csv").exists()


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "algebraic_schwarz.cli", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for cmd in ("generate", "partition", "solve", "spectrum", "bench"):
        assert cmd in out


def test_ritz_within():
    assert cli.ritz_within([0.5, 1.0], 0.5, 1.0)
    assert cli.ritz_within([0.5 * (1 - 1e-7)], 0.5, 1.0)
    assert not cli.ritz_within([0.49], 0.5, 1.0)
    assert cli.ritz_within([], 0.5, 1.0)


def test_unknown_problem():
    with pytest.raises(cli.ConfigError):
        cli.load_problem("nope")


def test_asymmetric_matrix_file_is_a_config_error(tmp_path):
    import scipy.io
    scipy.io.mmwrite(str(tmp_path / "G.mtx"), sp.csr_matrix(np.array([[2.0, 1.0], [0.0, 2.0]])))
    assert cli.main(["solve", "--matrix", str(tmp_path / "G.mtx"), "--N", "1"]) == cli.EXIT_CONFIG
