"""Command-line entry point: ``run``, ``sweep``, ``verify``, ``estimate-rho``, ``report``.

Exit codes: 0 success, 1 verification failure (or degenerate estimate),
2 usage or configuration error.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import harness
from . import objectives as obj_mod
from . import optimizers as opt
from . import oracles
from . import verify
from .errors import ConfigError, ContractViolation, DegeneratePointError
from .rng import make_rng

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _fmt(v, exact):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}" if exact else f"{float(v):.6g}"
    return str(v)


def _common(parser):
    parser.add_argument("--config", help="experiment config file (JSON or TOML)")
    parser.add_argument("--seed", type=int, help="replace the config's seed list with one seed")
    parser.add_argument("--out", help=f"output directory (default ${harness.OUT_ENV} or ./growthopt_out)")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field; repeatable")
    parser.add_argument("--checks", help="comma-separated check ids (empty string for none)")
    parser.add_argument("--exact", action="store_true",
                        help="print numbers with 17 significant digits")


def build_parser():
    parser = argparse.ArgumentParser(prog="growthopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a single-cell config and write its trace CSV")
    _common(p)
    p = sub.add_parser("sweep", help="run every grid cell and seed; write CSV/JSON outputs")
    _common(p)
    p = sub.add_parser("verify", help="run the check suite (bundled configs by default)")
    _common(p)
    p = sub.add_parser("estimate-rho", help="growth constants and implied batch floors at a point")
    _common(p)
    p.add_argument("--point", help="JSON list for the evaluation point (default: config x0)")
    p.add_argument("--p", type=float, help="moment order in (1, 2) for the heavy-tailed estimate")
    p.add_argument("--samples", type=int, default=1_000_000,
                   help="Monte Carlo draws for the p-th moment estimate")
    p = sub.add_parser("report", help="print tables from a previous sweep's output directory")
    _common(p)
    return parser


def _load(args, required=True):
    if args.config is None:
        if required:
            raise ConfigError("--config is required")
        return None
    config = harness.load_config(args.config)
    config = harness.apply_overrides(config, args.override)
    if args.seed is not None:
        config["seeds"] = [args.seed]
    if args.checks is not None:
        config["checks"] = _parse_checks(args.checks)
    return config


def _parse_checks(text):
    ids = [c.strip() for c in text.split(",") if c.strip()]
    for c in ids:
        if c not in verify.CHECK_IDS:
            raise ConfigError(f"unknown check {c!r}; choose from {', '.join(verify.CHECK_IDS)}")
    return ids


def _out_dir(args, config):
    return Path(args.out) if args.out else harness.default_output_dir(config)


def _print_summary(result, exact):
    for cell in result.cells:
        s = cell.summary
        print(f"{cell.label}: runs={s['runs']} diverged={s['diverged']} "
              f"min_grad_norm={_fmt(s['min_grad_norm']['mean'], exact)} "
              f"(se {_fmt(s['min_grad_norm']['se'], exact)}) "
              f"final_gap={_fmt(s['final_gap']['mean'], exact)} "
              f"(se {_fmt(s['final_gap']['se'], exact)})")


def cmd_run(args):
    config = _load(args)
    config["checks"] = config["checks"] if args.checks is not None else []
    problem = harness.resolve_problem(config)
    cells = harness._expand(config, problem)
    if len(cells) != 1:
        raise ConfigError(f"run needs a single-cell grid, got {len(cells)} cells (use sweep)")
    config["seeds"] = config["seeds"][:1]
    result = harness.execute(config)
    paths = harness.write_outputs(result, _out_dir(args, config))
    trace = result.cells[0].traces[0]
    for key, val in trace.summary().items():
        print(f"{key}: {_fmt(val, args.exact)}")
    print(f"trace: {paths[0]}")
    return EXIT_FAIL if result.failed else EXIT_OK


def cmd_sweep(args):
    config = _load(args)
    result = harness.execute(config)
    paths = harness.write_outputs(result, _out_dir(args, config))
    _print_summary(result, args.exact)
    reports = result.all_reports()
    if reports:
        print(verify.reports_table(reports))
    print(f"wrote {len(paths)} files to {_out_dir(args, config)}")
    return EXIT_FAIL if result.failed else EXIT_OK


def cmd_verify(args):
    paths = [args.config] if args.config else harness.bundled_configs()
    reports = []
    for path in paths:
        config = harness.apply_overrides(harness.load_config(path), args.override)
        if args.seed is not None:
            config["seeds"] = [args.seed]
        if args.checks is not None:
            config["checks"] = _parse_checks(args.checks)
        if not config["checks"]:
            continue
        result = harness.execute(config)
        for r in result.all_reports():
            r.lemma_id = f"{config['name']}:{r.lemma_id}"
            reports.append(r)
        if args.out:
            harness.write_outputs(result, Path(args.out))
    if not reports:
        print("0 checks")
        return EXIT_OK
    print(verify.reports_table(reports))
    n_fail = sum(r.status == verify.FAIL for r in reports)
    n_skip = sum(r.status == verify.SKIPPED for r in reports)
    print(f"{len(reports)} checks: {len(reports) - n_fail - n_skip} pass, "
          f"{n_fail} fail, {n_skip} skipped")
    for r in reports:
        if r.status == verify.FAIL:
            print(f"witness {r.lemma_id}: {json.dumps(verify._jsonable(r.witness), sort_keys=True)}")
    return EXIT_FAIL if n_fail else EXIT_OK


def cmd_estimate_rho(args):
    config = _load(args)
    try:
        obj = obj_mod.build_objective(config["objective"])
    except (ContractViolation, KeyError, TypeError) as exc:
        raise ConfigError(f"bad objective: {exc}") from None
    if args.point is not None:
        try:
            x = obj_mod.as_point(json.loads(args.point), obj.d)
        except (ValueError, ContractViolation) as exc:
            raise ConfigError(f"bad --point: {exc}") from None
    else:
        x = harness._start_point(obj, config)
    exact = args.exact
    seed = args.seed if args.seed is not None else config.get("seeds", [0])[0]
    try:
        rho = None
        if obj.finite_sum:
            rho = oracles.estimate_rho(obj, x).rho_hat
            print(f"rho_hat: {_fmt(rho, exact)}")
        elif args.p is None:
            raise ConfigError(f"{obj.family} has no finite-sum ratio; pass --p")
        rho_p = None
        if args.p is not None:
            stats = oracles.estimate_p_moment(obj, x, args.p, args.samples, make_rng(seed, 4))
            rho_p = stats.rho_p_hat
            print(f"rho_p_hat: {_fmt(rho_p, exact)} (p={_fmt(args.p, exact)})")
    except DegeneratePointError as exc:
        print(f"degenerate point: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None
    if rho is not None:
        for regime in opt.REGIMES:
            if regime != "heavy":
                print(f"batch_floor[{regime}]: {opt.batch_floor(regime, max(rho, 1.0))}")
    if rho_p is not None:
        _heavy_floor("batch_floor[heavy]", rho_p, args.p)
        if obj.family == obj_mod.PARETO_QUADRATIC:
            closed = obj_mod.pareto_growth_constant(obj.params["alpha"], args.p)
            print(f"rho_p_closed_form: {_fmt(closed, exact)}")
            _heavy_floor("batch_floor[heavy, closed form]", closed, args.p)
    return EXIT_OK


def _heavy_floor(label, rho, p):
    try:
        print(f"{label}: {opt.batch_floor('heavy', max(rho, 1.0), p)}")
    except ContractViolation as exc:
        print(f"{label}: {exc}")


def cmd_report(args):
    directory = _out_dir(args, None)
    summaries = sorted(directory.glob("*__summary.json"))
    if not summaries:
        raise ConfigError(f"no sweep outputs in {directory}")
    failed = False
    for path in summaries:
        data = json.loads(path.read_text(encoding="utf-8"))
        print(f"== {data['name']}")
        for cell in data["cells"]:
            s = cell["summary"]
            print(f"{cell['label']}: runs={s['runs']} diverged={s['diverged']} "
                  f"min_grad_norm={_fmt(s['min_grad_norm']['mean'], args.exact)} "
                  f"final_gap={_fmt(s['final_gap']['mean'], args.exact)}")
        rpath = path.with_name(path.name.replace("__summary.json", "__reports.json"))
        if rpath.exists():
            reports = [verify.LemmaReport(**r) for r in json.loads(rpath.read_text(encoding="utf-8"))]
            print(verify.reports_table(reports))
            failed |= any(r.status == verify.FAIL for r in reports)
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "estimate-rho": cmd_estimate_rho,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
