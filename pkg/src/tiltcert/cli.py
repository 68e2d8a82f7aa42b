"""Command-line entry point: ``tiltcert {certify,bounds,counterexample,lemmas}``.

Every run writes ``manifest.json`` and its CSV outputs to
``<out-root>/<command>/<timestamp>/``. Exit status is 0 on success, 1 on a
usage error and 2 when a certificate or check fails.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, bell, bounds, certifier, counterexample, search

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return n


def _alpha(text: str) -> float:
    try:
        return bell.check_alpha(float(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-root", default="out", help="root directory for run outputs (default: out)")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker processes (default: $TILTCERT_THREADS or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tiltcert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tiltcert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("certify", help="grid check of the operator inequality T >= 0")
    c.add_argument("--paper-grid", action="store_true",
                   help="alpha 0..1.999 step 0.001, 100 a-nodes, 200 b-nodes")
    c.add_argument("--alpha", type=_alpha, nargs="+", help="explicit alpha values")
    c.add_argument("--alpha-min", type=_alpha, default=0.0)
    c.add_argument("--alpha-max", type=float, default=None)
    c.add_argument("--alpha-step", type=float, default=0.001)
    c.add_argument("--a-points", type=_positive_int, default=100)
    c.add_argument("--b-points", type=_positive_int, default=200)
    c.add_argument("--threshold", type=float, default=-5e-9,
                   help="pass iff the global minimum eigenvalue is >= this (default -5e-9)")
    c.add_argument("--full-dump", action="store_true", help="write every grid cell, not just per-alpha minima")
    _add_common(c)

    b = sub.add_parser("bounds", help="constants, threshold and bound curves for one alpha")
    b.add_argument("--alpha", type=_alpha, required=True)
    b.add_argument("--emit-csv", metavar="PATH", help="also write the comparison table here")
    b.add_argument("--resolution", type=_positive_int, default=101)
    b.add_argument("--external", metavar="FILE", help="two-column 'beta value' points to carry along")
    _add_common(b)

    x = sub.add_parser("counterexample", help="build the counterexample state and run all its checks")
    x.add_argument("--v", type=float, default=counterexample.V_PAPER, help="centre weight (default 1/597)")
    x.add_argument("--restarts", type=_positive_int, default=200)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--max-iters", type=_positive_int, default=1000)
    x.add_argument("--tolerance", type=float, default=1e-4, help="allowed excess of the search over 1/2")
    x.add_argument("--lemma-samples", type=_positive_int, nargs=3, metavar=("TRIANGLE", "CQ", "SPECTRUM"),
                   default=(100_000, 1000, 10_000))
    _add_common(x)

    m = sub.add_parser("lemmas", help="random property checks of the three auxiliary inequalities")
    m.add_argument("--samples", type=int, default=None,
                   help="samples for every suite (default: 100000 / 1000 / 10000)")
    m.add_argument("--seed", type=int, default=0)
    _add_common(m)
    return parser


# --- helpers -------------------------------------------------------------------


def _run_dir(root: str, command: str) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    path = Path(root) / command / stamp
    path.mkdir(parents=True, exist_ok=False)
    return path


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(i) for i in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(i) for k, i in v.items()}
    return v


def _write_manifest(run_dir: Path, args, argv, started: float, results: dict) -> None:
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "command": args.command,
        "params": _jsonable(params),
        "argv": list(argv),
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "duration_s": time.time() - started,
        "results": _jsonable(results),
    }
    with open(run_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _workers(args) -> int:
    return args.threads if args.threads is not None else certifier.default_workers()


def _say(key: str, value) -> None:
    if isinstance(value, float):
        value = f"{value:.17g}"
    print(f"{key} = {value}")


# --- commands ---------------------------------------------------------------------


def _grid_spec(args) -> certifier.GridSpec:
    if args.paper_grid:
        return certifier.GridSpec.paper()
    if args.alpha:
        return certifier.GridSpec(alpha_values=tuple(args.alpha), a_points=args.a_points, b_points=args.b_points)
    hi = args.alpha_min if args.alpha_max is None else args.alpha_max
    return certifier.GridSpec(alpha_min=args.alpha_min, alpha_max=hi, alpha_step=args.alpha_step,
                              a_points=args.a_points, b_points=args.b_points)


def cmd_certify(args, run_dir: Path) -> tuple[int, dict]:
    spec = _grid_spec(args)
    report = certifier.grid_scan(spec, workers=_workers(args), full=args.full_dump)
    certifier.write_report_csv(report, run_dir / "grid.csv", spec if args.full_dump else None)
    ok = report.global_min_eigenvalue >= args.threshold
    a, aa, bb = report.argmin
    _say("cells", report.cells_evaluated)
    _say("global_min_eigenvalue", report.global_min_eigenvalue)
    _say("argmin_alpha", a)
    _say("argmin_a", aa)
    _say("argmin_b", bb)
    _say("threshold", args.threshold)
    _say("status", "PASS" if ok else "FAIL")
    results = {"global_min_eigenvalue": report.global_min_eigenvalue, "argmin": list(report.argmin),
               "cells_evaluated": report.cells_evaluated, "passed": ok}
    return (EXIT_OK if ok else EXIT_FAIL), results


def cmd_bounds(args, run_dir: Path) -> tuple[int, dict]:
    external = None
    if args.external:
        try:
            external = bounds.read_external_points(args.external)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    bf = bounds.BoundFunction.for_alpha(args.alpha)
    beta_star = bounds.threshold(bf)
    results = {"alpha": args.alpha, "s": bf.consts.s, "mu": bf.consts.mu, "beta_C": bf.beta_c,
               "beta_Q": bf.beta_q, "beta_star": beta_star, "lambda0_sq": bf.lambda0_sq}
    for k, v in results.items():
        _say(k, float(v))
    table = bounds.emit_comparison(args.alpha, args.resolution, external, bound=bf)
    targets = [run_dir / "comparison.csv"]
    if args.emit_csv:
        targets.append(Path(args.emit_csv))
    for path in targets:
        bounds.write_comparison_csv(table, path)
        if external is not None:
            bounds.write_external_csv(external, path.with_name(path.stem + "_external.csv"))
    return EXIT_OK, results


def _lemma_reports(samples, seed: int, workers: int) -> list:
    n1, n2, n3 = samples
    return [
        counterexample.check_lemma_triangle(n1, seed, workers=workers),
        counterexample.check_lemma_cq_channel(n2, seed, workers=workers),
        counterexample.check_lemma_spectrum(n3, seed, workers=workers),
    ]


def _report_lemmas(reports, run_dir: Path) -> bool:
    counterexample.write_reports_csv(reports, run_dir / "lemmas.csv")
    counterexample.write_reports_jsonl(reports, run_dir / "lemmas.jsonl")
    ok = True
    for r in reports:
        _say(f"{r.check_name}", f"samples={r.samples} worst_slack={r.worst_slack:.6e} violations={r.violations}")
        if not r.passed:
            ok = False
            counterexample.dump_sample(r.worst_sample, run_dir / f"{r.check_name}_worst.json")
    return ok


def cmd_counterexample(args, run_dir: Path) -> tuple[int, dict]:
    if not 0 < args.v < 1:
        raise UsageError(f"--v must lie in (0, 1), got {args.v}")
    state = counterexample.build_state(args.v)
    beta = counterexample.chsh_value(state, check=False)
    closed = counterexample.chsh_value_closed_form(args.v)
    beta_ok = abs(beta - closed) <= 1e-12
    _say("beta", beta)
    _say("beta_closed_form", closed)
    workers = _workers(args)
    reports = _lemma_reports(args.lemma_samples, args.seed, workers)
    lemmas_ok = _report_lemmas(reports, run_dir)
    cfg = search.SearchConfig(restarts=args.restarts, seed=args.seed, max_iters=args.max_iters, workers=workers)
    res = search.search_extraction(state.party_ordered(), counterexample.PHI_PLUS, (3, 3), cfg)
    search_ok = res.value <= 0.5 + args.tolerance
    _say("search_best", res.value)
    _say("search_restart", res.restart)
    ok = beta_ok and lemmas_ok and search_ok
    _say("status", "PASS" if ok else "FAIL")
    results = {"beta": beta, "beta_closed_form": closed, "lemmas": [r.record() for r in reports],
               "search_best": res.value, "search_restart": res.restart, "passed": ok}
    return (EXIT_OK if ok else EXIT_FAIL), results


def cmd_lemmas(args, run_dir: Path) -> tuple[int, dict]:
    if args.samples is None:
        samples = (100_000, 1000, 10_000)
    elif args.samples < 1:
        raise UsageError(f"--samples must be positive, got {args.samples}")
    else:
        samples = (args.samples,) * 3
    reports = _lemma_reports(samples, args.seed, _workers(args))
    ok = _report_lemmas(reports, run_dir)
    _say("status", "PASS" if ok else "FAIL")
    return (EXIT_OK if ok else EXIT_FAIL), {"lemmas": [r.record() for r in reports], "passed": ok}


COMMANDS = {
    "certify": cmd_certify,
    "bounds": cmd_bounds,
    "counterexample": cmd_counterexample,
    "lemmas": cmd_lemmas,
}


def _validate(args, parser) -> None:
    # cheap checks before any output directory is created
    try:
        if args.command == "certify":
            _grid_spec(args)
        elif args.command == "lemmas" and args.samples is not None and args.samples < 1:
            raise UsageError(f"--samples must be positive, got {args.samples}")
        elif args.command == "counterexample" and not 0 < args.v < 1:
            raise UsageError(f"--v must lie in (0, 1), got {args.v}")
    except (ValueError, UsageError) as exc:
        parser.error(str(exc))


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _validate(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.time()
    run_dir = _run_dir(args.out_root, args.command)
    try:
        code, results = COMMANDS[args.command](args, run_dir)
    except UsageError as exc:
        print(f"tiltcert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _write_manifest(run_dir, args, argv, started, results)
    _say("output", str(run_dir))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
