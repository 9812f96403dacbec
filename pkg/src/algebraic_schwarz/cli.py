"""Command-line driver: generate problems, partition, solve, estimate spectra, compare methods.

Exit codes: 0 success, 2 configuration error, 3 setup failure,
4 non-convergence, 5 spectral bound violated.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .krylov import one_level_as, pcg, write_history
from .linalg import DefinitenessError, SingularMatrixError
from .partition import (PartitionError, ensure_minimal_overlap, has_minimal_overlap, partition_graph,
                        regular_partition)
from .precond import DENSE_CUTOFF, SetupError, setup_preconditioner
from .problems import GeneratedProblem, laplacian_2d, testcase1, testcase2

log = logging.getLogger("algebraic_schwarz")

EXIT_OK, EXIT_CONFIG, EXIT_SETUP, EXIT_NOCONV, EXIT_BOUND = 0, 2, 3, 4, 5

METHOD_LABELS = {
    "onelevel": "One-level AS",
    "hplus-only": "H_plus only",
    "new": "New method",
}

PROBLEM_DEFAULT_N = {"testcase1": 4, "testcase2-regular": 16, "testcase2-graph": 16, "laplacian": 4}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# orchestration helpers (also used by the test suite)
# ---------------------------------------------------------------------------

def load_problem(problem=None, matrix=None, rhs=None, rhs_kind="body", seed=0, nx=None, ny=None):
    if matrix is not None:
        try:
            A = io.read_matrix_market(matrix)
        except ValueError as exc:
            raise ConfigError(f"cannot read {matrix}: {exc}") from exc
        if rhs is not None:
            b = io.read_vector(rhs)
            if b.size != A.shape[0]:
                raise ConfigError(f"rhs has {b.size} entries, matrix has {A.shape[0]} rows")
            x_star = None
        else:
            x_star = np.random.default_rng(seed).standard_normal(A.shape[0])
            b = A @ x_star
        return GeneratedProblem(A=A, b=b, x_star=x_star, name=str(matrix))
    kw = {}
    if nx is not None:
        kw["nx"] = nx
    if ny is not None:
        kw["ny"] = ny
    if problem == "testcase1":
        return testcase1(rhs=rhs_kind, seed=seed, **kw)
    if problem in ("testcase2", "testcase2-regular", "testcase2-graph"):
        return testcase2(rhs=rhs_kind, seed=seed, **kw)
    if problem == "laplacian":
        return laplacian_2d(kw.get("nx", 10), kw.get("ny", 10),
                            rhs="manufactured" if rhs_kind == "manufactured" else "ones", seed=seed)
    raise ConfigError(f"unknown problem {problem!r}")


def make_partition(prob, N, mode="graph", seed=0):
    if N < 1:
        raise ConfigError("N must be at least 1")
    if mode == "regular":
        if prob.node_ij is None or prob.grid_dims is None:
            raise ConfigError("regular partitions need a structured problem")
        return regular_partition(prob.node_ij, prob.grid_dims, N, prob.A)
    if mode != "graph":
        raise ConfigError(f"unknown partition mode {mode!r}")
    return ensure_minimal_overlap(prob.A, partition_graph(prob.A, N, seed=seed))


def run_method(prob, P, method, tau=10.0, tol=1e-8, maxit=None, dense_cutoff=DENSE_CUTOFF,
               threads=1, setup=None):
    """Solve ``prob`` with one preconditioner; returns (row dict, SolveReport, x, setup)."""
    t0 = time.perf_counter()
    if method == "onelevel":
        H = one_level_as(prob.A, P)
        setup_obj = None
        row = {"coarse_dim": 0, "n_minus": 0}
    elif method in ("new", "hplus-only"):
        setup_obj = setup or setup_preconditioner(prob.A, P, tau=tau, dense_cutoff=dense_cutoff,
                                                  correction=(method == "new"), threads=threads)
        H = setup_obj.H if method == "new" else setup_obj.H_plus
        lo, hi = setup_obj.bounds()
        row = {"coarse_dim": setup_obj.coarse_dim,
               "n_minus": setup_obj.n_minus if method == "new" else 0,
               "n_plus": setup_obj.n_plus,
               "bound": [lo, hi] if method == "new" else None}
    else:
        raise ConfigError(f"unknown method {method!r}")
    t_setup = time.perf_counter() - t0
    t0 = time.perf_counter()
    x, rep = pcg(prob.A, prob.b, H, tol=tol, maxit=maxit, x_star=prob.x_star)
    t_solve = time.perf_counter() - t0
    row.update(method=method, label=METHOD_LABELS[method], iterations=rep.iterations,
               converged=rep.converged, lambda_min=rep.lambda_min, lambda_max=rep.lambda_max,
               kappa=rep.kappa, final_rel_residual=rep.rel_residuals[-1])
    if row.get("bound"):
        row["ritz_in_bound"] = ritz_within(rep.ritz, *row["bound"])
    row["timings"] = {"setup": t_setup, "solve": t_solve}
    return row, rep, x, setup_obj


def ritz_within(ritz, lo, hi, rel=1e-6):
    ritz = np.asarray(ritz)
    if ritz.size == 0:
        return True
    return bool(np.all(ritz >= lo * (1 - rel)) and np.all(ritz <= hi * (1 + rel)))


def _fmt(v, digits=3):
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return "-"
    if isinstance(v, float):
        return f"{v:.{digits}g}" if 1e-2 <= abs(v) < 1e4 else f"{v:.2e}"
    return str(v)


def format_table(rows):
    head = ["", "lambda_min", "lambda_max", "kappa", "It", "#V0", "n_-"]
    lines = []
    for r in rows:
        it = str(r["iterations"]) if r["converged"] else f">{r['iterations']}"
        lines.append([r["label"], _fmt(r["lambda_min"]), _fmt(r["lambda_max"]), _fmt(r["kappa"]),
                      it, str(r["coarse_dim"]), str(r["n_minus"])])
    widths = [max(len(x[i]) for x in [head] + lines) for i in range(len(head))]
    out = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
    out.append("-" * len(out[0]))
    out += ["  ".join(c.ljust(w) for c, w in zip(x, widths)) for x in lines]
    return "\n".join(out)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _problem_args(p, with_partition=True):
    p.add_argument("--problem", default="testcase1",
                   choices=["testcase1", "testcase2-regular", "testcase2-graph", "laplacian"])
    p.add_argument("--matrix", help="Matrix Market file; overrides --problem")
    p.add_argument("--rhs", help="right-hand side vector file (with --matrix)")
    p.add_argument("--rhs-kind", default="body", choices=["body", "manufactured"],
                   help="generated right-hand side: unit body force or A x* for random x*")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    if with_partition:
        p.add_argument("--N", type=int, help="number of subdomains")
        p.add_argument("--partition", help="partition file; overrides --N")
        p.add_argument("--partition-mode", choices=["graph", "regular"],
                       help="default: regular for testcase2-regular, graph otherwise")


def _solver_args(p):
    p.add_argument("--tau", type=float, default=10.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--maxit", type=int)
    p.add_argument("--dense-cutoff", type=int, default=DENSE_CUTOFF)
    p.add_argument("--threads", type=int, default=1)


def _setup_problem(args):
    prob = load_problem(None if args.matrix else args.problem, args.matrix, args.rhs,
                        args.rhs_kind, args.seed, args.nx, args.ny)
    if getattr(args, "partition", None):
        P = io.read_partition(args.partition)
        if P.n != prob.A.shape[0]:
            raise ConfigError("partition size does not match the matrix")
        if not has_minimal_overlap(prob.A, P):
            P = ensure_minimal_overlap(prob.A, P) if P.is_disjoint() else None
            if P is None:
                raise ConfigError("partition file lacks minimal overlap")
        return prob, P
    N = args.N or PROBLEM_DEFAULT_N.get(args.problem, 4)
    mode = args.partition_mode or ("regular" if args.problem == "testcase2-regular" and not args.matrix
                                   else "graph")
    return prob, make_partition(prob, N, mode, args.seed)


def cmd_generate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prob = load_problem(args.problem, None, None, args.rhs_kind, args.seed, args.nx, args.ny)
    io.write_matrix_market(out / "A.mtx", prob.A)
    io.write_vector(out / "b.txt", prob.b)
    if prob.x_star is not None:
        io.write_vector(out / "x_star.txt", prob.x_star)
    if prob.node_ij is not None:
        geo = np.column_stack([prob.dof_map, prob.node_ij, prob.coords])
        np.savetxt(out / "geometry.txt", geo, fmt=["%d", "%d", "%d", "%.17g", "%.17g"],
                   header="dof ix iy x y")
    cfg = {"problem": args.problem, "n": prob.A.shape[0], "nnz": int(prob.A.nnz),
           "rhs_kind": args.rhs_kind, "seed": args.seed, "grid_dims": prob.grid_dims}
    io.write_json(out / "config.json", cfg)
    print(f"wrote {prob.name}: n = {prob.A.shape[0]}, nnz = {prob.A.nnz} -> {out}")
    return EXIT_OK


def cmd_partition(args):
    prob, P = _setup_problem(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_partition(out / "partition.txt", P)
    print(f"N = {P.N}, n = {P.n}, sizes = {P.sizes.tolist()}, sum n_s - n = {P.overlap_excess}")
    return EXIT_OK


def cmd_solve(args):
    prob, P = _setup_problem(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    row, rep, x, _ = run_method(prob, P, args.method, tau=args.tau, tol=args.tol, maxit=args.maxit,
                                dense_cutoff=args.dense_cutoff, threads=args.threads)
    report = {"problem": prob.name, "n": prob.A.shape[0], "N": P.N, "tau": args.tau,
              "tol": args.tol, "rows": [row], "timings": row.pop("timings")}
    io.write_json(out / "report.json", report)
    write_history(rep, out / "history.csv")
    print(format_table([row]))
    return EXIT_OK if rep.converged else EXIT_NOCONV


def cmd_spectrum(args):
    prob, P = _setup_problem(args)
    S = setup_preconditioner(prob.A, P, tau=args.tau, dense_cutoff=args.dense_cutoff,
                             threads=args.threads)
    rng = np.random.default_rng(args.seed)
    b = rng.standard_normal(prob.A.shape[0])
    _, rep = pcg(prob.A, b, S.H, tol=args.tol, maxit=args.maxit)
    lo, hi = S.bounds()
    ok = ritz_within(rep.ritz, lo, hi)
    result = {"lambda_min": rep.lambda_min, "lambda_max": rep.lambda_max, "kappa": rep.kappa,
              "iterations": rep.iterations, "n_plus": S.n_plus, "bound": [lo, hi],
              "within_bound": ok, "coarse_dim": S.coarse_dim, "n_minus": S.n_minus}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "spectrum.json", result)
    print(f"Ritz extremes of H(tau)A: [{rep.lambda_min:.6g}, {rep.lambda_max:.6g}], "
          f"kappa = {rep.kappa:.4g} after {rep.iterations} iterations")
    print(f"theoretical interval (N_plus = {S.n_plus}): [{lo:.6g}, {hi:.6g}]")
    if not ok:
        print("ERROR: Ritz values outside the theoretical interval", file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


def cmd_bench(args):
    prob, P = _setup_problem(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, timings = [], {}
    for method in args.methods:
        row, rep, _, s = run_method(prob, P, method, tau=args.tau, tol=args.tol, maxit=args.maxit,
                                    dense_cutoff=args.dense_cutoff, threads=args.threads)
        timings[method] = row.pop("timings")
        rows.append(row)
        write_history(rep, out / f"history_{method}.csv")
    report = {"problem": prob.name, "n": prob.A.shape[0], "N": P.N, "tau": args.tau, "tol": args.tol,
              "overlap_excess": P.overlap_excess, "rows": rows, "timings": timings}
    io.write_json(out / "bench.json", report)
    print(format_table(rows))
    bad = [r["label"] for r in rows if r.get("ritz_in_bound") is False]
    if bad:
        print(f"ERROR: Ritz values outside the theoretical interval for {bad}", file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="algebraic-schwarz", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a test matrix, rhs and geometry")
    p.add_argument("--problem", default="testcase1", choices=["testcase1", "testcase2", "laplacian"])
    p.add_argument("--rhs-kind", default="body", choices=["body", "manufactured"])
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("partition", help="build a minimal-overlap partition")
    _problem_args(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("solve", help="run PCG with one preconditioner")
    _problem_args(p)
    _solver_args(p)
    p.add_argument("--method", default="new", choices=list(METHOD_LABELS))
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("spectrum", help="Ritz estimates of the spectrum of H(tau)A")
    _problem_args(p)
    _solver_args(p)
    p.set_defaults(func=cmd_spectrum, tol=1e-10)

    p = sub.add_parser("bench", help="compare methods in a table")
    _problem_args(p)
    _solver_args(p)
    p.add_argument("--methods", nargs="+", default=["onelevel", "new"], choices=list(METHOD_LABELS))
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "tau", 2.0) <= 1:
        print("error: --tau must exceed 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, PartitionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SetupError, DefinitenessError, SingularMatrixError) as exc:
        print(f"setup failed: {exc}", file=sys.stderr)
        return EXIT_SETUP


if __name__ == "__main__":
    sys.exit(main())
