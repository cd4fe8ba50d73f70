"""Command-line driver.

Subcommands write JSON/CSV artifacts (and figures where useful) under an
output directory given by ``--out``, the ``GRAPHWIENER_OUT`` environment
variable, or ``./graphwiener_out``. Exit status is 0 when every check
passes, 1 when a check fails or a precondition is violated, and 2 for
usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .beurling import BeurlingParams, beurling_norm
from .graph import GraphSizeError, build_from_spec, fit_growth
from .inversion import example43_sweep
from .matrices import matrix_from_spec
from .opnorm import beta
from .report import PreconditionError, clean
from .suite import RunConfig, run_suite
from .weights import ap_bound, polynomial_weight, trivial_weight

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_OUT = "graphwiener_out"
SLOPE_TOL = 0.15


class UsageError(Exception):
    pass


def parse_spec(text: str) -> dict:
    """Parse ``'{"kind": "cycle", "n": 12}'`` or the short form ``cycle:n=12``."""
    text = text.strip()
    if text.startswith("{"):
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad JSON spec: {exc}") from None
        if not isinstance(spec, dict):
            raise UsageError("spec must be a JSON object")
        return spec
    kind, _, rest = text.partition(":")
    if not kind:
        raise UsageError(f"bad spec {text!r}")
    spec = {"kind": kind}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq or not key:
            raise UsageError(f"bad spec field {item!r}; expected key=value")
        try:
            spec[key] = json.loads(val)
        except json.JSONDecodeError:
            spec[key] = val
    return spec


def parse_r(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    r = float(text)
    if r < 1:
        raise argparse.ArgumentTypeError("r must be at least 1")
    return r


def parse_floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def parse_params(text: str) -> list:
    """``"1:2,2:2"`` -> ``[(1.0, 2.0), (2.0, 2.0)]``."""
    out = []
    for item in filter(None, text.split(",")):
        r, sep, a = item.partition(":")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected r:alpha pairs, got {item!r}")
        out.append((parse_r(r), float(a)))
    return out


def out_dir(args) -> Path:
    path = Path(args.out or os.environ.get("GRAPHWIENER_OUT") or DEFAULT_OUT)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def _graph(args):
    try:
        return build_from_spec(parse_spec(args.graph))
    except (ValueError, GraphSizeError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _weight(g, theta: float, base=None):
    if theta == 0:
        return trivial_weight(g)
    try:
        return polynomial_weight(g, base, theta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _matrix(args, g):
    try:
        return matrix_from_spec(parse_spec(args.matrix), g)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad matrix spec: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_graph(args) -> int:
    g = _graph(args)
    stats = fit_growth(g, args.density_cap)
    out = out_dir(args)
    name = g.label()
    (out / f"{name}.graph.json").write_text(g.to_json() + "\n")
    write_json(out / f"{name}.stats.json", {"graph": name, "n": g.n, "hash": g.hash, **stats.to_dict()})
    print(f"{name}: n={g.n} diam={g.diam} D(mu)={stats.doubling_constant:g} "
          f"d={stats.dimension:g} D={stats.density:.4g} strong d={stats.strong_dimension:g}")
    return EXIT_OK


def cmd_weight(args) -> int:
    g = _graph(args)
    w = _weight(g, args.theta, args.base)
    out = out_dir(args)
    rows = {}
    for p in args.p:
        rep = ap_bound(w, p)
        rows[f"{p:g}"] = {"bound": rep.bound, "witness_ball": list(rep.witness_ball)}
        print(f"{w.label()} on {g.label()}: A_{p:g} <= {rep.bound:.6g}")
    write_json(out / f"{g.label()}.{w.label()}.weight.json", {"weight": w.to_dict(), "ap": rows})
    return EXIT_OK


def cmd_norm(args) -> int:
    from .plotting import plot_profile

    g = _graph(args)
    A = _matrix(args, g)
    stats = fit_growth(g)
    prm = BeurlingParams(args.r, args.alpha, stats.dimension)
    val = beurling_norm(A, prm)
    out = out_dir(args)
    stem = f"{g.label()}.{A.label}"
    (out / f"{stem}.profile.csv").write_text(A.profile_csv())
    write_json(out / f"{stem}.norm.json", {"graph": g.label(), "matrix": A.label, "params": prm.to_dict(),
                                           "norm": val})
    plot_profile({A.label: A.profile}, out / f"{stem}.profile.png")
    print(f"|{A.label}|_({prm.label()}) = {val:.10g}")
    return EXIT_OK


def cmd_stability(args) -> int:
    g = _graph(args)
    A = _matrix(args, g)
    w = _weight(g, args.theta, args.base)
    est = beta(A, args.p, w, seed=args.seed)
    out = out_dir(args)
    write_json(out / f"{g.label()}.{A.label}.{w.label()}.p{args.p:g}.stability.json",
               {"graph": g.label(), "matrix": A.label, "weight": w.label(), "seed": args.seed,
                **est.to_dict()})
    print(f"beta_{args.p:g},{w.label()}({A.label}) in [{est.lower:.10g}, {est.upper:.10g}] ({est.method})")
    return EXIT_OK


def load_config(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    if args.seed is not None:
        data["seed"] = args.seed
    if args.graph:
        data["graphs"] = [parse_spec(s) for s in args.graph]
    if args.quick:
        data.setdefault("graphs", [{"kind": "path", "n": 33}, {"kind": "cycle", "n": 128}])
        data.setdefault("matrices", [{"kind": "identity"}, {"kind": "kappa", "kappa": 0.5}])
    try:
        return RunConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None


def cmd_verify(args) -> int:
    from .plotting import plot_summary

    cfg = load_config(args)
    out = out_dir(args)
    progress = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    try:
        res = run_suite(cfg, progress=progress)
    except (ValueError, GraphSizeError) as exc:
        raise UsageError(str(exc)) from None
    cfg_dict = cfg.to_dict()
    cfg_dict.pop("output", None)
    write_json(out / "config.json", cfg_dict)
    (out / "reports.jsonl").write_text(res.jsonl())
    (out / "summary.csv").write_text(res.summary_csv())
    (out / "excluded.csv").write_text(res.excluded_csv())
    write_json(out / "growth.json", res.stats)
    plot_summary(res.summary_rows(), out / "figures" / "summary.png")
    n_fail = len(res.failures)
    print(f"{len(res.reports)} reports, {n_fail} failing, {len(res.excluded)} excluded combinations; "
          f"written to {out}")
    return EXIT_OK if n_fail == 0 else EXIT_FAIL


def cmd_example43(args) -> int:
    from .plotting import plot_slopes

    if any(not 0 < k < 1 for k in args.kappas):
        raise UsageError("kappa values must lie strictly between 0 and 1")
    if len(args.kappas) < 2:
        raise UsageError("need at least two kappa values")
    out = out_dir(args)
    try:
        reports = example43_sweep(args.kappas, args.params, args.p, args.theta, args.n, seed=args.seed)
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        write_json(out / "example43.error.json", {"error": str(exc), "minimal_n": exc.minimal})
        return EXIT_FAIL
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ok = True
    summary = []
    for rep in reports:
        r = "inf" if math.isinf(rep.r) else f"{rep.r:g}"
        stem = f"example43_r{r}_a{rep.alpha:g}"
        (out / f"{stem}.csv").write_text(rep.to_csv())
        plot_slopes(rep, out / "figures" / f"{stem}.png")
        errs = rep.slope_errors()
        main = {k: errs[k] for k in ("norm_Ainv_beurling", "opnorm_Ainv_pw")}
        bounded = rep.bounded_factor <= 2 ** (rep.alpha + 1)
        passed = all(e <= SLOPE_TOL for e in main.values()) and bounded
        ok &= passed
        summary.append({**rep.to_dict(), "slope_errors": errs, "pass": passed, "seed": args.seed})
        print(f"r={r} alpha={rep.alpha:g}: inverse slope {rep.slopes['norm_Ainv_beurling']:.4f} "
              f"(expected {rep.targets['norm_Ainv_beurling']:g}), operator slope "
              f"{rep.slopes['opnorm_Ainv_pw']:.4f} (expected 1), |A| factor {rep.bounded_factor:.3g}"
              f" -> {'pass' if passed else 'FAIL'}")
    write_json(out / "example43.json", summary)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphwiener", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default: $GRAPHWIENER_OUT or ./graphwiener_out)")
    common.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph", parents=[common], help="build a graph and fit its growth statistics")
    g.add_argument("graph", help="graph spec, e.g. cycle:n=12 or lattice:d=2,side=8")
    g.add_argument("--density-cap", type=float, default=16.0)
    g.set_defaults(func=cmd_graph)

    w = sub.add_parser("weight", parents=[common], help="A_p bounds of a polynomial weight")
    w.add_argument("graph")
    w.add_argument("--theta", type=float, default=0.0)
    w.add_argument("--base", type=int, default=None, help="base vertex (default: a graph center)")
    w.add_argument("--p", type=parse_floats, default=[1.0, 1.5, 2.0])
    w.set_defaults(func=cmd_weight)

    n = sub.add_parser("norm", parents=[common], help="Beurling norm and decay profile of a matrix")
    n.add_argument("graph")
    n.add_argument("matrix", help="matrix spec, e.g. kappa:kappa=0.8 or identity")
    n.add_argument("--r", type=parse_r, default=1.0)
    n.add_argument("--alpha", type=float, default=2.0)
    n.set_defaults(func=cmd_norm)

    s = sub.add_parser("stability", parents=[common], help="weighted lower stability bound")
    s.add_argument("graph")
    s.add_argument("matrix")
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--theta", type=float, default=0.0)
    s.add_argument("--base", type=int, default=None)
    s.set_defaults(func=cmd_stability)

    v = sub.add_parser("verify", help="run the inequality suite and write a report bundle")
    v.add_argument("--config", help="JSON file with RunConfig fields")
    v.add_argument("--out")
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--graph", action="append", help="replace the graph list (repeatable)")
    v.add_argument("--quick", action="store_true", help="small default instance set")
    v.add_argument("--quiet", action="store_true")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("example43", parents=[common], help="inverse-norm growth of the bidiagonal family")
    e.add_argument("--kappas", type=parse_floats, default=[0.80, 0.85, 0.90, 0.93, 0.95])
    e.add_argument("--n", type=int, default=4096)
    e.add_argument("--params", type=parse_params, default=[(1.0, 2.0), (2.0, 2.0)])
    e.add_argument("--p", type=float, default=2.0)
    e.add_argument("--theta", type=float, default=0.3)
    e.set_defaults(func=cmd_example43)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
