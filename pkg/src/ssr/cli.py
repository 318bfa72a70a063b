"""``ssr`` command line: grid, recover, norm and bench subcommands.

Exit codes: 0 success, 1 usage error, 2 computation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger("ssr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _exponent(text: str) -> float:
    from .besov import _exponent as parse

    try:
        v = parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, inf], got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, help="output file (default: standard output)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="ssr", description="Sparse-grid sampling recovery with B-spline quasi-interpolants.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("grid", parents=[common], help="list the sparse grid nodes")
    g.add_argument("--dim", type=_positive_int, required=True)
    g.add_argument("--level", type=_nonneg_int, required=True)
    g.add_argument("--order", type=int, choices=(1, 2), default=2, help="1: nodes 0..2^k-1, 2: nodes 0..2^k")

    r = sub.add_parser("recover", parents=[common], help="evaluate R_m(f) at query points")
    r.add_argument("--dim", type=_positive_int, required=True)
    r.add_argument("--order", type=_positive_int, default=2)
    r.add_argument("--level", type=_nonneg_int, required=True)
    r.add_argument("--func", required=True, help="registered function name or sampled-data CSV")
    r.add_argument("--points", type=Path, help="CSV of query points (default: the grid nodes)")
    r.add_argument("--mask", type=Path, help="JSON mask {order, mu, weights}")
    r.add_argument("--emit-psi", type=Path, help="write the sampling-form weights as JSON")

    n = sub.add_parser("norm", parents=[common], help="discrete Besov quasi-norms of f")
    n.add_argument("--alpha", type=float, required=True)
    n.add_argument("--p", type=_exponent, required=True)
    n.add_argument("--theta", type=_exponent, required=True)
    n.add_argument("--order", type=_positive_int, default=2)
    n.add_argument("--dim", type=_positive_int, required=True)
    n.add_argument("--level", type=_nonneg_int, required=True)
    n.add_argument("--func", required=True)
    n.add_argument("--mask", type=Path)
    n.add_argument("--b3-variant", choices=("mixed", "scalar"), default="mixed")

    b = sub.add_parser("bench", parents=[common], help="run an error-rate sweep")
    b.add_argument("--config", type=Path, help="JSON sweep config (default: built-in suite)")
    b.add_argument("--out-dir", type=Path, required=True)
    return p


# --- helpers ------------------------------------------------------------------


def _emit(args, rows: list[dict], payload=None) -> None:
    if args.format == "json":
        text = json.dumps(payload if payload is not None else rows, indent=1) + "\n"
    else:
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        text = buf.getvalue()
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def _load_mask(args):
    from .quasi_interpolant import Mask

    if getattr(args, "mask", None) is None:
        return None
    try:
        mask = Mask.load(args.mask)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read mask {args.mask}: {exc}") from None
    if mask.order != args.order:
        raise UsageError(f"mask order {mask.order} does not match --order {args.order}")
    return mask


def _function_and_cache(args):
    """A registered function, or sampled data loaded into a preset cache."""
    from .functions import make_function
    from .recovery import load_samples

    path = Path(args.func)
    if path.suffix == ".csv" or path.exists():
        if not path.exists():
            raise UsageError(f"sampled-data file {path} not found")
        return None, load_samples(path, args.dim, args.level)
    try:
        return make_function(args.func, args.dim, m=args.level, seed=args.seed), None
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_points(path: Path, d: int) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError:
                if lineno == 1:
                    continue
                raise UsageError(f"{path}:{lineno}: non-numeric field") from None
            if len(vals) != d:
                raise UsageError(f"{path}:{lineno}: expected {d} coordinates, got {len(vals)}")
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, d)


# --- subcommands --------------------------------------------------------------


def cmd_grid(args) -> int:
    from .sparse_grid import grid_points

    rows = []
    d = args.dim
    for k, s in grid_points(d, args.level, args.order):
        row = {f"k_{i + 1}": k[i] for i in range(d)}
        row.update({f"s_{i + 1}": s[i] for i in range(d)})
        row.update({f"x_{i + 1}": repr(s[i] / 2 ** k[i]) for i in range(d)})
        rows.append(row)
    payload = [{"k": [r[f"k_{i + 1}"] for i in range(d)], "s": [r[f"s_{i + 1}"] for i in range(d)],
                "x": [float(r[f"x_{i + 1}"]) for i in range(d)]} for r in rows]
    _emit(args, rows, payload)
    return 0


def cmd_recover(args) -> int:
    from .recovery import Recovery, build_coefficients, build_psi_weights, grid_point_set
    from .sparse_grid import EvalCache

    mask = _load_mask(args)
    f, cache = _function_and_cache(args)
    if cache is None:
        cache = EvalCache()
    table = build_coefficients(f, args.dim, args.order, mask, args.level, cache)
    rec = Recovery(table)
    if args.points:
        pts = _read_points(args.points, args.dim)
    else:
        pts = np.array(sorted(p.to_float() for p in grid_point_set(args.dim, args.level)), dtype=float).reshape(-1, args.dim)
    values = rec.evaluate(pts) if len(pts) else np.zeros(0)
    if args.emit_psi:
        build_psi_weights(args.dim, args.order, mask, args.level).dump(args.emit_psi)
    rows = [{**{f"x_{i + 1}": repr(float(x[i])) for i in range(args.dim)}, "value": repr(float(v))} for x, v in zip(pts, values)]
    payload = {"dim": args.dim, "order": args.order, "level": args.level,
               "points": pts.tolist(), "values": [float(v) for v in values]}
    _emit(args, rows, payload)
    log.info("samples: %d distinct, cache hit rate %.3f", len(cache), cache.hit_rate)
    return 0


def cmd_norm(args) -> int:
    from .besov import BesovParams, b2_ladder, b3_ladder
    from .recovery import build_coefficients

    try:
        params = BesovParams(args.alpha, args.p, args.theta, d=args.dim, order=args.order)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    mask = _load_mask(args)
    f, cache = _function_and_cache(args)
    table = build_coefficients(f, args.dim, args.order, mask, args.level, cache)
    b3 = b3_ladder(table.blocks, params, args.b3_variant)
    b2 = b2_ladder(table, params)
    per_level = [{"k": list(k), "b3_term": b3.terms[k], "b2_term": b2.terms[k]} for k in sorted(b3.terms)]
    payload = {"b3": b3.total, "b2": b2.total, "b3_variant": args.b3_variant, "per_level": per_level}
    if args.b3_variant == "scalar":
        payload["b3_mixed"] = b3_ladder(table.blocks, params, "mixed").total
    rows = [{"k": " ".join(map(str, e["k"])), "b3_term": repr(e["b3_term"]), "b2_term": repr(e["b2_term"])} for e in per_level]
    if args.format == "csv":
        rows.append({"k": "total", "b3_term": repr(b3.total), "b2_term": repr(b2.total)})
    _emit(args, rows, payload)
    return 0


def cmd_bench(args) -> int:
    from .bench import BenchConfig, run_suite

    try:
        cfg = BenchConfig.load(args.config) if args.config else BenchConfig()
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"bad config: {exc}") from None
    if args.config is None or "seed" not in json.loads(args.config.read_text()):
        cfg.seed = args.seed
    report = run_suite(cfg)
    report.write(args.out_dir)
    failed = [r for r in report.rows if r["status"] != "ok"]
    for r in failed:
        print(f"row {r['function']} d={r['d']} r={r['r']} m={r['m']}: {r['status']}", file=sys.stderr)
    summary = [{"function": f["function"], "d": f["d"], "r": f["r"], "q": f["q"], "slope": f.get("slope")} for f in report.fits]
    _emit(args, summary)
    return 0


COMMANDS = {"grid": cmd_grid, "recover": cmd_recover, "norm": cmd_norm, "bench": cmd_bench}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ssr {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"ssr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
