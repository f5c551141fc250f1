"""Command-line entry point.

Exit codes: 0 all checks pass, 1 a check reports a violation, 2 config or
precondition error, 3 the exponent condition fails (``check-liouville`` only).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .config import RunConfig
from .errors import ToolkitError
from .liouville import TH_PARABOLIC, hyp_condition
from .runner import EXIT_CONDITION_FAILS, EXIT_ERROR, EXIT_PASS, RunReport, _finite, run

ESTIMATE_CHECKS = ("ws", "eq19", "eq22", "eq23", "eq25", "eq27", "th45")


def _common(p: argparse.ArgumentParser, config_required: bool = True):
    p.add_argument("--config", required=config_required, help="YAML run config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--samples", type=int, help="override the per-integral sample budget")
    p.add_argument("--jobs", type=int, default=1, help="checks run concurrently")
    p.add_argument("--out", help="directory for report files (stdout when omitted)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="carnot-liouville",
                                 description="Liouville conditions and estimate checks on Carnot groups")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check-liouville", help="evaluate the exponent condition")
    for k in ("Q", "a", "b"):
        c.add_argument(f"--{k}", required=True)
    c.add_argument("--p")
    c.add_argument("--q")
    c.add_argument("--p1", help="first exponent of two general operators")
    c.add_argument("--p2", help="second exponent of two general operators")
    c.add_argument("--format", choices=("json", "csv"), default="json")

    for name, hlp in (("run", "run every check in a config"),
                      ("verify-estimates", "run the estimate checks of a config"),
                      ("harnack-scan", "weak Harnack ratio scan"),
                      ("density-scan", "sublevel density scan")):
        _common(sub.add_parser(name, help=hlp))

    f = sub.add_parser("find-counterexample", help="search an explicit solution pair")
    _common(f, config_required=False)
    for k in ("Q", "p", "q", "a", "b"):
        f.add_argument(f"--{k}", type=float)
    f.add_argument("--certify-points", type=int, default=10_000)
    f.add_argument("--weak-samples", type=int, default=0,
                   help="draws for the weak-form spot check (0 skips it)")
    return ap


def _liouville(args) -> int:
    general = args.p1 is not None or args.p2 is not None
    p = args.p1 if args.p1 is not None else args.p
    q = args.p2 if args.p2 is not None else args.q
    if p is None or q is None:
        print("error: need --p and --q (or --p1 and --p2)", file=sys.stderr)
        return EXIT_ERROR
    v = hyp_condition(args.Q, p, q, args.a, args.b, general=general)
    d = _finite(v.to_dict())
    if args.format == "csv":
        print("condition_holds,applicable_theorem,margin,conclusion")
        print(f"{v.condition_holds},{v.applicable_theorem},{v.margin!r},{v.conclusion}")
    else:
        print(json.dumps(d, indent=2))
    if v.applicable_theorem == TH_PARABOLIC or v.condition_holds:
        return EXIT_PASS
    return EXIT_CONDITION_FAILS


def _restrict(cfg: RunConfig, checks) -> RunConfig:
    cfg.checks = tuple(checks)
    cfg.raw["checks"] = list(checks)
    return cfg


def _config_for(args) -> RunConfig:
    over = dict(seed=args.seed, samples=args.samples, out_dir=args.out, fmt=args.format)
    if args.command == "find-counterexample" and args.config is None:
        missing = [k for k in ("Q", "p", "q", "a", "b") if getattr(args, k) is None]
        if missing:
            raise ToolkitError(f"need --config or all of --Q --p --q --a --b (missing {missing})")
        raw = {"name": "find_counterexample", "seed": 0 if args.seed is None else args.seed,
               "checks": ["sharpness"],
               "sharpness": {k: getattr(args, k) for k in ("Q", "p", "q", "a", "b")}}
        raw["sharpness"].update(certify_points=args.certify_points, weak_samples=args.weak_samples)
        return RunConfig.from_mapping(raw, **over)
    cfg = RunConfig.load(args.config, **over)
    if args.command == "verify-estimates":
        keep = [c for c in cfg.checks if c in ESTIMATE_CHECKS] or list(ESTIMATE_CHECKS)
        return _restrict(cfg, keep)
    if args.command == "harnack-scan":
        return _restrict(cfg, ["wh"])
    if args.command == "density-scan":
        return _restrict(cfg, ["density"])
    if args.command == "find-counterexample":
        return _restrict(cfg, ["sharpness"])
    return cfg


def _emit(rep: RunReport, cfg: Optional[RunConfig], fmt: str):
    if cfg is not None and cfg.out_dir:
        for path in rep.write(cfg.out_dir, cfg.formats, stem=cfg.name):
            print(path)
        return
    sys.stdout.write(rep.to_csv() if fmt == "csv" else rep.to_json())


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check-liouville":
            return _liouville(args)
        cfg = _config_for(args)
        cfg.validate()
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    rep = run(cfg, jobs=args.jobs)
    for e in rep.errors:
        print(f"error: {e}", file=sys.stderr)
    for r in rep.results:
        if r.verdict == "error":
            print(f"error in {r.check_id}: {r.payload['error']}", file=sys.stderr)
    _emit(rep, cfg, args.format)
    return rep.exit_status


if __name__ == "__main__":
    sys.exit(main())
