"""Command-line frontend.

Subcommands
-----------
solve       Relax and round a tensor file; modes ``complex``, ``real``,
            ``hermitian`` and ``nc``.
pca         R1- or L1-PCA of a CSV point file (one point per row).
procrustes  Generalized Procrustes on a JSON list of ``d x n`` matrices,
            one point per column.
decompose   Greedy unitary-product decomposition of a tensor file.
verify      Re-ingest an output file and check every matrix in it.

Exit status is 0 on success, 2 on bad input and 3 when a solver fails or a
verification check does not hold. ``NCGK_THREADS`` sets the number of
rounding worker threads. Results do not depend on it.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import sdp
from .apps import (HERMITIAN_ROUTE_MAX_SIDE, PointCloud, ProcrustesInstance, block_embedding, is_stiefel, l1_pca,
                   l1_pca_form, procrustes, procrustes_form, r1_pca, r1_pca_form)
from .decompose import decompose
from .errors import ConvergenceError, DomainError, IngestError, ResourceError, ShapeError
from .io import (decomposition_to_obj, dumps, load_json, matrix_from_obj, matrix_to_obj, read_matrices, read_tensor,
                 tensor_from_obj)
from .round_complex import SecantSampler, round_complex_derandomized, round_complex_values
from .round_real import (PipelineConfig, RealRoundingConfig, approximate_opt_real, round_hermitian_values,
                         round_real_direct_values)
from .tensor import evaluate_matrices, is_contraction, is_hermitian_matrix, is_orthogonal, is_unitary

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3
FEASIBILITY_TOL = 1e-8
DEFAULT_HERMITIAN_EPS = 0.05
DEFAULT_DERANDOMIZE_EPS = 0.2


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _workers() -> int:
    raw = os.environ.get("NCGK_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise _Failure(EXIT_INPUT, f"NCGK_THREADS must be an integer, got {raw!r}") from None


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _Failure(EXIT_INPUT, f"cannot read {path}: {exc.strerror}") from None


def _emit(obj, out: Optional[str]):
    text = dumps(obj)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv(path: str, header: Sequence[str], rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format(x, ".17g") if isinstance(x, float) else x for x in r])
    Path(path).write_text(buf.getvalue())


def _trial_rows(values):
    best = -np.inf
    for i, v in enumerate(values):
        best = max(best, float(v))
        yield i, float(v), best


def _ratio(value: float, upper: float):
    return value / upper if upper > 0 else None


def _tolerances(args) -> dict:
    return {} if args.tol is None else {"feas_tol": args.tol, "gap_tol": args.tol}


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args) -> int:
    M = read_tensor(_read(args.tensor))
    workers = _workers()
    tol = _tolerances(args)
    feas_tol = tol.get("feas_tol", sdp.DEFAULT_FEAS_TOL)
    gap_tol = tol.get("gap_tol", sdp.DEFAULT_GAP_TOL)
    curve = None
    extra = {}
    if args.derandomize and args.mode not in ("complex", "nc"):
        raise _Failure(EXIT_INPUT, "--derandomize applies to the complex and nc modes only")

    if args.mode in ("complex", "nc"):
        relax = "unitary-complex" if args.mode == "complex" else "nc-norm"
        sol = sdp.solve_relaxation(M, relax, feas_tol=feas_tol, gap_tol=gap_tol)
        if args.derandomize:
            eps = args.eps if args.eps is not None else DEFAULT_DERANDOMIZE_EPS
            pair = round_complex_derandomized(M, sol.X, sol.Y, eps)
            extra["eps"] = eps
        else:
            curve, pair = round_complex_values(M, sol.X, sol.Y, args.trials, SecantSampler(args.seed), workers)
        upper, A, B, value = sol.upper_bound, pair.A, pair.B, pair.value
    elif args.mode == "hermitian":
        eps = args.eps if args.eps is not None else DEFAULT_HERMITIAN_EPS
        sol = sdp.solve_relaxation(M, "unitary-complex", feas_tol=feas_tol, gap_tol=gap_tol)
        curve, pair = round_hermitian_values(M, sol.X, sol.Y, eps, args.trials, SecantSampler(args.seed))
        upper, A, B, value = sol.upper_bound, pair.A, pair.B, pair.value
        extra["eps"] = eps
    else:
        config = RealRoundingConfig(trials=args.trials, seed=args.seed, workers=workers,
                                    eta=tol.get("feas_tol", sdp.DEFAULT_FEAS_TOL), **tol)
        pair = approximate_opt_real(M, config)
        upper, A, B, value = pair.upper_bound, pair.A, pair.B, pair.value
        extra["route"] = pair.info.get("route")
        if args.emit_csv:
            sol = sdp.solve_relaxation(M, "unitary-real", feas_tol=config.eta, gap_tol=config.gap_tol)
            curve, _ = round_real_direct_values(M, sol.X, sol.Y, args.trials, SecantSampler(args.seed))

    # a feasible value is a valid lower bound on the relaxation, so the bound never drops below it
    upper = max(float(upper), float(value))
    out = {"upper_bound": upper, "value": float(value), "A": matrix_to_obj(A), "B": matrix_to_obj(B),
           "ratio": _ratio(value, upper), "mode": args.mode,
           "seed": None if args.derandomize else args.seed,
           "trials": None if args.derandomize else args.trials, **extra}
    _emit(out, args.out)
    if args.emit_csv and curve is not None:
        _write_csv(args.emit_csv, ["trial", "value", "best_so_far"], _trial_rows(curve))
    return EXIT_OK


# ---------------------------------------------------------------------------
# applications


def _app_config(args, form) -> RealRoundingConfig:
    t = block_embedding(form).t
    routes = ("hermitian", "direct") if t <= HERMITIAN_ROUTE_MAX_SIDE else ("direct",)
    return RealRoundingConfig(trials=args.trials, seed=args.seed, workers=_workers(), routes=routes)


def cmd_pca(args) -> int:
    points = PointCloud.from_csv(_read(args.points))
    if not 1 <= args.k <= points.dim:
        raise _Failure(EXIT_INPUT, f"--k must lie in [1, {points.dim}]")
    run, form = (r1_pca, r1_pca_form) if args.variant == "r1" else (l1_pca, l1_pca_form)
    res = run(points, args.k, _app_config(args, form(points, args.k)))
    out = {"variant": args.variant, "k": args.k, "value": res.value, "surrogate": res.surrogate,
           "upper_bound": res.info["upper_bound"], "Y": matrix_to_obj(res.Y), "seed": args.seed,
           "trials": args.trials}
    _emit(out, args.out)
    if args.emit_csv:
        _write_csv(args.emit_csv, ["quantity", "value"],
                   [("value", res.value), ("surrogate", res.surrogate), ("upper_bound", res.info["upper_bound"]),
                    ("ratio", res.surrogate / res.info["upper_bound"] if res.info["upper_bound"] > 0 else "")])
    return EXIT_OK


def cmd_procrustes(args) -> int:
    mats = read_matrices(_read(args.matrices))
    try:
        inst = ProcrustesInstance(tuple(mats))
    except (DomainError, ShapeError) as exc:
        raise IngestError(str(exc)) from None
    res = procrustes(inst, _app_config(args, procrustes_form(inst)))
    out = {"value": res.value, "surrogate": res.surrogate, "upper_bound": res.info["upper_bound"],
           "rotations": [matrix_to_obj(U) for U in res.rotations], "seed": args.seed, "trials": args.trials}
    _emit(out, args.out)
    if args.emit_csv:
        _write_csv(args.emit_csv, ["quantity", "value"],
                   [("value", res.value), ("surrogate", res.surrogate), ("upper_bound", res.info["upper_bound"])])
    return EXIT_OK


def cmd_decompose(args) -> int:
    M = read_tensor(_read(args.tensor))
    if not 0 < args.eps <= 0.5:
        raise _Failure(EXIT_INPUT, "--eps must lie in (0, 1/2]")
    config = PipelineConfig(trials=args.trials, seed=args.seed, workers=_workers())
    dec = decompose(M, args.eps, config)
    out = {"T": dec.T, "eps": args.eps, "lower_bound": dec.lower_bound, **decomposition_to_obj(dec),
           "seed": args.seed}
    _emit(out, args.out)
    if args.emit_csv:
        rows = [(t, float(ub), float(v), float(e))
                for t, ((ub, v), e) in enumerate(zip(dec.certificates, dec.energies))]
        _write_csv(args.emit_csv, ["step", "upper_bound", "value", "energy"], rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _check(name: str, ok: bool, checks: dict):
    checks[name] = bool(ok)


def cmd_verify(args) -> int:
    obj = load_json(_read(args.result))
    if not isinstance(obj, dict):
        raise IngestError("result must be a JSON object")
    tol = args.tol
    checks: dict = {}
    if "A" in obj and "B" in obj and "mode" in obj:
        A = matrix_from_obj(obj["A"], "A")
        B = matrix_from_obj(obj["B"], "B")
        mode = obj["mode"]
        if mode in ("complex", "nc"):
            pred = lambda X: is_unitary(X, tol)
        elif mode == "real":
            pred = lambda X: not np.iscomplexobj(X) and is_orthogonal(X, tol)
        elif mode == "hermitian":
            pred = lambda X: is_hermitian_matrix(X, tol) and is_contraction(X, tol)
        else:
            raise IngestError(f"unknown mode {mode!r}")
        _check("A_feasible", pred(A), checks)
        _check("B_feasible", pred(B), checks)
        if args.tensor:
            M = read_tensor(_read(args.tensor))
            if A.shape != (M.n, M.n) or B.shape != (M.n, M.n):
                raise IngestError("matrix shapes do not match the tensor")
            v = abs(evaluate_matrices(M, A, B))
            _check("value_matches", abs(v - float(obj["value"])) <= 1e-9 * max(1.0, v), checks)
            _check("value_below_upper_bound", v <= float(obj["upper_bound"]) + 1e-6 * max(1.0, v), checks)
    elif "rotations" in obj:
        for i, U in enumerate(obj["rotations"]):
            _check(f"rotation_{i}_orthogonal", is_orthogonal(matrix_from_obj(U, f"rotation {i}"), tol), checks)
    elif "Y" in obj:
        _check("Y_orthonormal_rows", is_stiefel(matrix_from_obj(obj["Y"], "Y"), tol), checks)
    elif "terms" in obj and "residual" in obj:
        for i, term in enumerate(obj["terms"]):
            _check(f"term_{i}_A_unitary", is_unitary(matrix_from_obj(term["A"], f"term {i} A"), tol), checks)
            _check(f"term_{i}_B_unitary", is_unitary(matrix_from_obj(term["B"], f"term {i} B"), tol), checks)
        if args.tensor:
            M = read_tensor(_read(args.tensor))
            R = tensor_from_obj(obj["residual"]).dense().copy()
            for term in obj["terms"]:
                a = complex(*term["alpha"])
                R += a * np.einsum("ij,kl->ijkl", matrix_from_obj(term["A"]), matrix_from_obj(term["B"]))
            _check("reconstruction", np.max(np.abs(R - M.dense()), initial=0.0) <= 1e-8, checks)
    else:
        raise IngestError("unrecognized result file")
    ok = all(checks.values())
    _emit({"ok": ok, "checks": checks}, None)
    return EXIT_OK if ok else EXIT_SOLVER


# ---------------------------------------------------------------------------
# entry point


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit nonnegative integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncgk", description="Bilinear optimization over unitary and orthogonal pairs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(q, out=True):
        q.add_argument("--seed", type=_seed, default=0)
        q.add_argument("--trials", type=_positive_int, default=64)
        if out:
            q.add_argument("--out", help="write JSON here instead of stdout")
            q.add_argument("--emit-csv", metavar="FILE", help="also write a plot-ready CSV")

    q = sub.add_parser("solve", help="relax and round a tensor")
    q.add_argument("--tensor", required=True)
    q.add_argument("--mode", choices=("complex", "real", "hermitian", "nc"), default="complex")
    q.add_argument("--tol", type=float, help="relaxation feasibility and gap tolerance")
    q.add_argument("--eps", type=float, help="accuracy of the Hermitian or derandomized rounding")
    q.add_argument("--derandomize", action="store_true")
    common(q)
    q.set_defaults(func=cmd_solve)

    q = sub.add_parser("pca", help="R1- or L1-PCA of a point cloud")
    q.add_argument("--points", required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--variant", choices=("r1", "l1"), default="r1")
    common(q)
    q.set_defaults(func=cmd_pca)

    q = sub.add_parser("procrustes", help="generalized orthogonal Procrustes")
    q.add_argument("--matrices", required=True)
    common(q)
    q.set_defaults(func=cmd_procrustes)

    q = sub.add_parser("decompose", help="unitary-product decomposition")
    q.add_argument("--tensor", required=True)
    q.add_argument("--eps", type=float, required=True)
    common(q)
    q.set_defaults(func=cmd_decompose)

    q = sub.add_parser("verify", help="check the matrices in an output file")
    q.add_argument("--result", required=True)
    q.add_argument("--tensor", help="tensor file to recompute values against")
    q.add_argument("--tol", type=float, default=FEASIBILITY_TOL)
    q.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Failure as exc:
        print(f"ncgk: {exc}", file=sys.stderr)
        return exc.code
    except (IngestError, DomainError, ShapeError) as exc:
        print(f"ncgk: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, ResourceError) as exc:
        print(f"ncgk: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
