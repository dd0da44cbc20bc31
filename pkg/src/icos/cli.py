"""Command-line front end: ``icos <subcommand> [flags]``.

Exit codes: 0 success (``check``: member), 1 nonmember or failed bench row,
2 undecided, 3 driver/solver failure, 64 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .apps import (DriverError, Graph, MomentData, boyle3, convex_regress, example61_covariance,
                   icosahedron_complement, min_form_on_sphere, options_bound, sparse_pca,
                   stable_set_bound)
from .gram import is_member
from .improve import SdpData, SdpInfeasible, SdpUnbounded, cholesky_iterate, colgen_lp, colgen_socp
from .poly import PolySyntaxError, from_json as poly_from_json, parse, random_form, to_json, to_text
from .rng import SplitMix64

EXIT_OK, EXIT_NO, EXIT_UNKNOWN, EXIT_FAIL, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    """Bad flags or unreadable input; maps to exit code 64."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


# output ---------------------------------------------------------------------

def _cell(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, np.floating):
        return _jsonable(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def render(rows: list[dict], fmt: str) -> str:
    """Format result rows as an aligned table, CSV, or JSON."""
    if fmt == "json":
        return json.dumps(_jsonable(rows), indent=2) + "\n"
    cols = list(rows[0]) if rows else []
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r[c]) for c in cols])
        return buf.getvalue()
    cells = [[_cell(r[c]) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"


def _emit(args, rows):
    sys.stdout.write(render(rows, args.format))


def _export_path(args, suffix: str = "") -> str | None:
    if not args.export:
        return None
    if not suffix:
        return args.export
    p = Path(args.export)
    return str(p.with_name(f"{p.stem}-{suffix}{p.suffix}"))


# input ----------------------------------------------------------------------

def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def load_polynomial(path: str):
    text = _read(path)
    try:
        if text.lstrip().startswith("{"):
            return poly_from_json(text)
        return parse(text)
    except PolySyntaxError as exc:
        raise UsageError(f"{path}: {exc}") from None
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def load_matrix(path: str) -> np.ndarray:
    """Dense matrix from CSV (comma separated, no header) or a JSON list of rows."""
    text = _read(path)
    try:
        if text.lstrip().startswith(("[", "{")):
            doc = json.loads(text)
            A = np.array(doc["matrix"] if isinstance(doc, dict) else doc, dtype=float)
        else:
            A = np.array([[float(v) for v in line.split(",")] for line in text.splitlines() if line.strip()])
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: not a numeric matrix ({exc})") from None
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise UsageError(f"{path}: expected a square matrix, got shape {A.shape}")
    return A


# subcommands ----------------------------------------------------------------

def cmd_check(args) -> int:
    p = load_polynomial(args.file)
    res = is_member(p, args.cone, args.r, tol=args.tol, cone_tol=args.cone_tol, export=args.export)
    row = {"file": args.file, "cone": args.cone, "r": args.r, "verdict": res.status,
           "certificate": ""}
    if res.member:
        cert_path = args.cert or str(Path(args.file).with_suffix("")) + f".{args.cone}{args.r}.cert.json"
        Path(cert_path).write_text(res.certificate.to_json())
        row["certificate"] = cert_path
    _emit(args, [row])
    return {True: EXIT_OK, False: EXIT_NO, None: EXIT_UNKNOWN}[res.member]


def cmd_minform(args) -> int:
    if args.file:
        p = load_polynomial(args.file)
        if args.n is not None and p.nvars != args.n:
            raise UsageError(f"{args.file} has {p.nvars} variables but --n {args.n} was given")
        if args.deg is not None and p.degree != args.deg:
            raise UsageError(f"{args.file} has degree {p.degree} but --deg {args.deg} was given")
        source = args.file
    else:
        if args.n is None or args.deg is None:
            raise UsageError("minform needs --file or both --n and --deg")
        p = random_form(args.n, args.deg, SplitMix64(args.seed))
        source = f"random(seed={args.seed})"
    gamma = min_form_on_sphere(p, args.cone, args.r, export=args.export)
    _emit(args, [{"source": source, "n": p.nvars, "deg": p.degree, "cone": args.cone,
                  "r": args.r, "bound": gamma}])
    return EXIT_OK


def cmd_stableset(args) -> int:
    if args.icosahedron_complement:
        g, name = icosahedron_complement(), "icosahedron-complement"
    else:
        try:
            g = Graph.from_text(_read(args.graph))
        except ValueError as exc:
            raise UsageError(f"{args.graph}: {exc}") from None
        name = args.graph
    rows = []
    for r in args.r:
        exp = _export_path(args, f"r{r}" if len(args.r) > 1 else "")
        rows.append({"graph": name, "n": g.n, "method": args.method, "r": r,
                     "bound": stable_set_bound(g, args.method, r, export=exp)})
    _emit(args, rows)
    return EXIT_OK


def cmd_options(args) -> int:
    if args.moments:
        try:
            data = MomentData.from_json(_read(args.moments))
        except (ValueError, KeyError) as exc:
            raise UsageError(f"{args.moments}: {exc}") from None
    else:
        data = boyle3()
    strikes = args.strike or ([data.strike] if data.strike is not None else None)
    if not strikes:
        raise UsageError("no strike price: pass --strike or include 'strike' in the moments file")
    rows = []
    for K in strikes:
        exp = _export_path(args, f"K{K:g}" if len(strikes) > 1 else "")
        rows.append({"strike": K, "method": args.method,
                     "bound": options_bound(data, K, args.method, export=exp)})
    _emit(args, rows)
    return EXIT_OK


def cmd_spca(args) -> int:
    A = example61_covariance() if args.cov is None else load_matrix(args.cov)
    res = sparse_pca(A, args.k, args.method, ncomp=args.components, export=args.export)
    rows = []
    for i, c in enumerate(res.components, 1):
        row = {"component": i, "objective": c.objective, "rank_one": c.rank_one,
               "explained_variance_pct": 100 * c.explained_variance,
               "support": " ".join(str(j + 1) for j in np.flatnonzero(c.loading))}
        row.update({f"x{j + 1}": float(v) for j, v in enumerate(c.loading)})
        rows.append(row)
    if rows:
        _emit(args, rows)
    for err in res.errors:
        print(f"icos spca: {err}", file=sys.stderr)
    return EXIT_FAIL if res.errors else EXIT_OK


def cmd_regress(args) -> int:
    text = _read(args.data)
    try:
        rows = [[float(v) for v in line.split(",")] for line in text.splitlines()
                if line.strip() and not line.lstrip().startswith("#")]
        D = np.array(rows)
    except ValueError:
        # allow a single header line
        lines = [ln for ln in text.splitlines() if ln.strip()][1:]
        try:
            D = np.array([[float(v) for v in ln.split(",")] for ln in lines])
        except ValueError as exc:
            raise UsageError(f"{args.data}: {exc}") from None
    if D.ndim != 2 or D.shape[1] < 2:
        raise UsageError(f"{args.data}: need rows 'x1,...,xn,y'")
    X, y = D[:, :-1], D[:, -1]
    f = convex_regress(X, y, args.deg, args.cone, export=args.export)
    fit = np.array([f(row) for row in X])
    _emit(args, [{"n": X.shape[1], "deg": args.deg, "cone": args.cone, "points": len(y),
                  "l1_error": float(np.abs(fit - y).sum()), "polynomial": to_text(f),
                  "polynomial_json": to_json(f)}])
    return EXIT_OK


def cmd_improve(args) -> int:
    if args.sdp:
        try:
            sdp = SdpData.from_json(json.loads(_read(args.sdp)))
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"{args.sdp}: {exc}") from None
    else:
        from .improve import random_section
        sdp, _ = random_section(args.n, SplitMix64(args.seed))
    if args.export:
        from .improve import solve_ddp
        solve_ddp(sdp, "sdd" if args.method == "colgen-socp" else args.cone, export=args.export)
    if args.method == "cholesky":
        tr = cholesky_iterate(sdp, args.cone, args.iters)
    elif args.method == "colgen-lp":
        tr = colgen_lp(sdp, args.iters)
    else:
        tr = colgen_socp(sdp, args.iters)
    _emit(args, [{"iteration": k, "value": v, "status": s}
                 for k, (v, s) in enumerate(zip(tr.values, tr.statuses))])
    return EXIT_OK


# bench ----------------------------------------------------------------------

def _workers() -> int:
    cap = os.environ.get("ICOS_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            raise UsageError(f"ICOS_THREADS must be an integer, got {cap!r}") from None
    return n


def _fmt6(v) -> str:
    if v is None:
        return "error"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return f"{v:.6f}"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_bench(args) -> int:
    from . import acceptance as acc

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    stable_rows = list(acc.STABLESET_ROWS) + (list(acc.STABLESET_EXTENDED) if args.extended else [])

    def guarded(fn, *a):
        try:
            return fn(*a), ""
        except Exception as exc:  # recorded per row
            return None, f"{type(exc).__name__}: {exc}"

    tasks = [("stable", row, acc.stableset_value, row) for row in stable_rows]
    tasks += [("options", K, acc.options_values, (K,)) for K in acc.STRIKES]
    tasks += [("spca", m, acc.spca_values, (m,)) for m in ("dd_dual", "sdd_dual")]
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        futs = [pool.submit(guarded, fn, *a) for _, _, fn, a in tasks]
        results = [f.result() for f in futs]
        # criteria that do not reuse table rows run in the same pool
        crit_futs = {i: pool.submit(guarded, acc.CRITERIA[i]) for i in (1, 2, 3)}
        # randomized sweeps: --seed shifts every instance stream
        crit_futs.update({i: pool.submit(guarded, lambda i=i: acc.CRITERIA[i](seed=i + args.seed))
                          for i in (7, 8, 9, 10)})
        crit = {i: f.result() for i, f in crit_futs.items()}
    by_kind: dict = {"stable": {}, "options": {}, "spca": {}}
    errors: dict = {"stable": {}, "options": {}, "spca": {}}
    for (kind, key, _, _), (val, err) in zip(tasks, results):
        by_kind[kind][key] = val
        if err:
            errors[kind][key] = err

    _write_csv(out / "stableset.csv", ["method", "r", "bound", "error"],
               [[m, r, _fmt6(by_kind["stable"][(m, r)]), errors["stable"].get((m, r), "")]
                for m, r in stable_rows])
    _write_csv(out / "options.csv", ["strike", "ddp", "sddp", "error"],
               [[f"{K:g}", _fmt6(v[0] if v else None), _fmt6(v[1] if v else None),
                 errors["options"].get(K, "")]
                for K, v in by_kind["options"].items()])
    spca_rows = []
    for m, res in by_kind["spca"].items():
        if res is None:
            spca_rows.append([m, "", "error", "error"] + [""] * 10 + [errors["spca"][m]])
            continue
        for i, c in enumerate(res.components, 1):
            spca_rows.append([m, i, _fmt6(c.objective), f"{100 * c.explained_variance:.2f}"]
                             + [f"{v:.4f}" for v in c.loading] + [";".join(res.errors)])
    _write_csv(out / "spca.csv", ["method", "component", "objective", "explained_variance_pct"]
               + [f"x{j}" for j in range(1, 11)] + ["error"], spca_rows)

    manifest = []
    row_fail = any(errors[k] for k in errors)
    for i in acc.IDS:
        if i in crit:
            res, err = crit[i]
        elif any(errors[{4: "stable", 5: "options", 6: "spca"}[i]].values()):
            res, err = None, "table row failed"
        elif i == 4:
            base = {k: v for k, v in by_kind["stable"].items() if k in acc.STABLESET_ROWS}
            ext = {k: v for k, v in by_kind["stable"].items() if k in acc.STABLESET_EXTENDED}
            res, err = guarded(acc.criterion_4, base, ext or None)
        elif i == 5:
            res, err = guarded(acc.criterion_5, by_kind["options"])
        else:
            res, err = guarded(acc.criterion_6, by_kind["spca"])
        passed = bool(res and res.passed)
        manifest.append([i, "pass" if passed else "fail", res.detail if res else err])
        print(f"criterion {i:2d}: {'PASS' if passed else 'FAIL'}", file=sys.stderr)
    _write_csv(out / "manifest.csv", ["criterion", "result", "detail"], manifest)
    print(f"bench finished in {time.perf_counter() - t0:.1f} s; results in {out}", file=sys.stderr)
    ok = all(r[1] == "pass" for r in manifest) and not row_fail
    return EXIT_OK if ok else EXIT_NO


# parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="icos", description="dsos/sdsos optimization via linear and second-order cone programs")
    ap.add_argument("--version", action="version", version=f"icos {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="log solver progress")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("table", "csv", "json"), default="table")
    common.add_argument("--seed", type=_seed, default=0, help="SplitMix64 seed (default 0)")
    common.add_argument("--export", metavar="PATH", help="write the compiled conic problem as JSON")

    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", parents=[common], help="decide r-dsos / r-sdsos membership")
    p.add_argument("file", help="polynomial file (text grammar or JSON)")
    p.add_argument("--cone", choices=("dsos", "sdsos"), default="dsos")
    p.add_argument("--r", type=_nonneg_int, default=0)
    p.add_argument("--tol", type=_positive_float, default=1e-6, help="coefficient residual tolerance")
    p.add_argument("--cone-tol", type=_positive_float, default=1e-8, help="cone predicate tolerance")
    p.add_argument("--cert", metavar="PATH", help="certificate output path")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("minform", parents=[common], help="lower-bound a form on the unit sphere")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--deg", type=_positive_int)
    p.add_argument("--file")
    p.add_argument("--cone", choices=("dsos", "sdsos"), default="dsos")
    p.add_argument("--r", type=_nonneg_int, default=0)
    p.set_defaults(func=cmd_minform)

    p = sub.add_parser("stableset", parents=[common], help="upper-bound the stability number")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--graph", help="graph file: n, then 1-indexed edges")
    g.add_argument("--icosahedron-complement", action="store_true")
    p.add_argument("--method", choices=("rdsos", "rsdsos", "polya"), default="rdsos")
    p.add_argument("--r", type=_nonneg_int, nargs="+", default=[0])
    p.set_defaults(func=cmd_stableset)

    p = sub.add_parser("options", parents=[common], help="moment bound on a max-call price")
    p.add_argument("--moments", help="JSON with mu, sigma and optional strike (default: 3-asset set)")
    p.add_argument("--strike", type=_positive_float, nargs="+")
    p.add_argument("--method", choices=("ddp", "sddp"), default="sddp")
    p.set_defaults(func=cmd_options)

    p = sub.add_parser("spca", parents=[common], help="sparse principal components")
    p.add_argument("--cov", help="covariance matrix (CSV or JSON); default: 10-variable factor example")
    p.add_argument("--k", type=_positive_float, default=4.0)
    p.add_argument("--method", choices=("dd_dual", "sdd_dual"), default="dd_dual")
    p.add_argument("--components", type=_positive_int, default=2)
    p.set_defaults(func=cmd_spca)

    p = sub.add_parser("regress", parents=[common], help="convex polynomial L1 regression")
    p.add_argument("--data", required=True, help="CSV rows x1,...,xn,y")
    p.add_argument("--deg", type=_positive_int, required=True)
    p.add_argument("--cone", choices=("dsos", "sdsos"), default="dsos")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("improve", parents=[common], help="iterative SDP inner approximation")
    p.add_argument("--sdp", help="SDP JSON (C and constraints); default: random section")
    p.add_argument("--n", type=_positive_int, default=4, help="size of the random section")
    p.add_argument("--method", choices=("cholesky", "colgen-lp", "colgen-socp"), default="cholesky")
    p.add_argument("--cone", choices=("dd", "sdd"), default="dd", help="cone for --method cholesky")
    p.add_argument("--iters", type=_positive_int, default=5)
    p.set_defaults(func=cmd_improve)

    p = sub.add_parser("bench", help="run the acceptance sweep and write CSV tables")
    p.add_argument("--seed", type=_seed, default=0, help="offset for the randomized sweeps (default 0)")
    p.add_argument("--suite", choices=("paper-tables",), default="paper-tables")
    p.add_argument("--out", default="bench-out")
    p.add_argument("--extended", action="store_true", help="include the slow r=2 stable-set rows")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2) if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"icos {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DriverError, SdpInfeasible, SdpUnbounded, RuntimeError, ValueError) as exc:
        print(f"icos {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
