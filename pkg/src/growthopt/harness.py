"""Declarative experiment runner: configs, grids, seeded sweeps, outputs.

An experiment config (JSON or TOML) has the keys::

    name        label used for output file names
    objective   builder mapping accepted by objectives.build_objective
    seeds       distinct integer seeds (one run per seed and cell)
    N           iterations per run, or "complexity" (convex NSGD rule)
    x0          start point: list, "default", or "offset" with x0_offset r
                (x* plus r along the first axis)
    checks      subset of verify.CHECK_IDS
    theorems    envelope ids checked for matching cells
    constants   overrides: rho ("x0" | "sup" | number), p, L0, L1, ...
    grid        kinds, regime, eta_mult | eta, B ("floor" or ints), c, c_mult,
                lam, eps_rel, theta, noise_sigma
    mds         p, n, models, num_samples (martingale check, config level)
    envelope    statistic ("mean" | "median"), slack, se_mult
    output_dir  default output directory

``eta_mult`` scales the theorem-maximal step of the cell's rule (``eta``
gives absolute step sizes instead, shared by every kind); ``c_mult``
scales ``||grad f(x0)||``; ``eps_rel`` sets ``lam = target_lambda(eps)``
with ``eps = eps_rel * F0`` (convex) or ``eps_rel * ||grad f(x0)||``.
"""

from dataclasses import dataclass, field
import copy
import itertools
import json
import math
import os
from pathlib import Path

import numpy as np

from . import objectives as obj_mod
from . import optimizers as opt
from . import oracles
from . import verify
from .errors import ConfigError, ContractViolation, DegeneratePointError
from .rng import make_rng

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

OUT_ENV = "GROWTHOPT_OUT"
CONFIG_DIR = Path(__file__).parent / "configs"

REGIMES = ("nc", "cvx", "H", "heavy_nc", "heavy_cvx")
_RULE = {
    (opt.CLIP_SGD, "nc"): ("clip_nc", "clip_nc"),
    (opt.CLIP_SGD, "cvx"): ("clip_cvx", "clip_cvx"),
    (opt.CLIP_SGD, "H"): ("clip_H", "clip_H"),
    (opt.NSGD, "nc"): ("nsgd_nc", "nsgd_nc"),
    (opt.NSGD, "cvx"): ("nsgd_cvx", "nsgd_cvx"),
    (opt.NSGD, "H"): ("nsgd_H", "nsgd_H"),
    (opt.NSGD, "heavy_nc"): ("nsgd_nc", "heavy"),
    (opt.NSGD, "heavy_cvx"): ("nsgd_cvx", "heavy"),
}
_THEOREM_RULES = {tid: spec[1] for tid, spec in verify.THEOREMS.items()}

_TOP_KEYS = {"name", "objective", "seeds", "N", "x0", "x0_offset", "checks", "theorems",
             "constants", "grid", "mds", "envelope", "output_dir", "variance_batches"}
_GRID_KEYS = {"kinds", "regime", "eta_mult", "eta", "B", "c", "c_mult", "lam", "eps_rel", "theta",
              "noise_sigma"}


# ---------------------------------------------------------------------------
# loading


def load_config(path):
    """Read a JSON or TOML experiment config and validate it."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix == ".toml":
            data = tomllib.loads(raw.decode("utf-8"))
        else:
            data = json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    data.setdefault("name", path.stem)
    return validate_config(data)


def bundled_configs():
    """Paths of the configs shipped with the package (the default verify suite)."""
    return sorted(CONFIG_DIR.glob("*.toml")) + sorted(CONFIG_DIR.glob("*.json"))


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def validate_config(data):
    """Normalize a config mapping; raises :class:`ConfigError` on schema errors."""
    data = copy.deepcopy(dict(data))
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    data.setdefault("name", "experiment")
    data.setdefault("checks", [])
    data.setdefault("theorems", [])
    data.setdefault("constants", {})
    data.setdefault("envelope", {})
    for chk in data["checks"]:
        if chk not in verify.CHECK_IDS:
            raise ConfigError(f"unknown check {chk!r}")
    for tid in data["theorems"]:
        if tid not in verify.THEOREMS:
            raise ConfigError(f"unknown theorem id {tid!r}")
    grid = data.get("grid")
    if grid is not None:
        if "objective" not in data:
            raise ConfigError("a grid needs an objective")
        unknown = set(grid) - _GRID_KEYS
        if unknown:
            raise ConfigError(f"unknown grid keys {sorted(unknown)}")
        for key, val in list(grid.items()):
            if key == "regime":
                continue
            grid[key] = _as_list(val)
            if not grid[key]:
                raise ConfigError(f"grid list {key!r} is empty")
        if "kinds" not in grid:
            raise ConfigError("grid needs kinds")
        for kind in grid["kinds"]:
            if kind not in opt.KINDS:
                raise ConfigError(f"unknown optimizer kind {kind!r}")
        if "eta" in grid and "eta_mult" in grid:
            raise ConfigError("give either eta or eta_mult, not both")
        if grid.get("regime", "cvx") not in REGIMES:
            raise ConfigError(f"unknown regime {grid.get('regime')!r}")
        seeds = _as_list(data.get("seeds", [0]))
        if not seeds:
            raise ConfigError("seeds list is empty")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds must be pairwise distinct")
        if any(int(s) != s for s in seeds):
            raise ConfigError("seeds must be integers")
        data["seeds"] = [int(s) for s in seeds]
        N = data.get("N", 100)
        if N != "complexity" and (int(N) != N or N < 0):
            raise ConfigError("N must be a nonnegative integer or 'complexity'")
    return data


def _parse_value(text):
    try:
        return json.loads(text)
    except ValueError:
        return text


def apply_overrides(config, overrides):
    """Apply ``key=value`` overrides; keys address top-level, ``grid``,
    ``constants``, ``objective`` and ``envelope`` fields (dotted or bare)."""
    data = copy.deepcopy(config)
    for item in overrides or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        val = _parse_value(val)
        section, _, sub = key.partition(".")
        if sub:
            if section not in ("grid", "constants", "objective", "envelope", "mds"):
                raise ConfigError(f"unknown override section {section!r}")
            data.setdefault(section, {})[sub] = val
        elif key in _GRID_KEYS:
            data.setdefault("grid", {})[key] = val
        elif key in _TOP_KEYS - {"grid", "constants", "objective", "envelope", "mds"}:
            data[key] = val
        else:
            raise ConfigError(f"unknown override key {key!r}")
    return validate_config(data)


# ---------------------------------------------------------------------------
# problem constants


@dataclass
class Problem:
    """An objective with its start point and resolved constants."""

    obj: object
    x0: np.ndarray
    constants: dict
    noise: object = None

    @property
    def F0(self):
        return self.constants["F0"]


def _start_point(obj, config):
    spec = config.get("x0", "default")
    if spec == "default":
        return opt.default_start(obj)
    if spec == "offset":
        if obj.known_optimum is None:
            raise ConfigError("x0 = 'offset' needs a known optimum")
        x = obj.known_optimum.copy()
        x[0] += float(config.get("x0_offset", 1.0))
        return x
    try:
        return obj_mod.as_point(spec, obj.d)
    except ContractViolation as exc:
        raise ConfigError(f"bad x0: {exc}") from None


def resolve_problem(config):
    """Build the objective and resolve ``F0, R0, rho`` and smoothness constants."""
    try:
        obj = obj_mod.build_objective(config["objective"])
    except (ContractViolation, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad objective: {exc}") from None
    x0 = _start_point(obj, config)
    prof = obj_mod.smoothness_constants(obj)
    consts = {k: getattr(prof, k) for k in ("L0", "L1", "cL0", "cL1", "H0", "H1", "mu")}
    fstar = obj.known_fstar if obj.known_fstar is not None else 0.0
    consts["F0"] = obj_mod.eval_full(obj, x0) - fstar
    consts["grad0"] = float(np.linalg.norm(obj_mod.grad_full(obj, x0)))
    if obj.known_optimum is not None:
        consts["R0"] = float(np.linalg.norm(x0 - obj.known_optimum))
    user = dict(config.get("constants", {}))
    if "p" in user:
        consts["p"] = float(user["p"])
    noise = None
    rho_spec = user.pop("rho", None)
    if obj.finite_sum and consts["grad0"] > oracles.DEGENERATE_TOL:
        noise = oracles.estimate_rho(obj, x0)
    if rho_spec is None:
        if obj.family == obj_mod.PARETO_QUADRATIC:
            rho_spec = "pareto" if "p" in consts else None
        else:
            rho_spec = "x0"
    if rho_spec == "x0":
        consts["rho"] = noise.rho_hat if noise is not None else None
    elif rho_spec == "sup":
        consts["rho"] = obj_mod.growth_constant(obj)
    elif rho_spec == "pareto":
        consts["rho"] = obj_mod.pareto_growth_constant(obj.params["alpha"], consts["p"])
    elif rho_spec is not None:
        consts["rho"] = float(rho_spec)
    consts["rho_source"] = rho_spec
    for key, val in user.items():
        consts[key] = val
    return Problem(obj=obj, x0=x0, constants=consts, noise=noise)


def _rule_constants(consts, regime):
    """Constants for a rule; convex rules read cL*, non-convex L*."""
    return {k: v for k, v in consts.items() if v is not None and not isinstance(v, str)}


# ---------------------------------------------------------------------------
# grid


@dataclass
class Cell:
    """One grid cell: a resolved optimizer config template and its provenance."""

    label: str
    config: object
    info: dict


def _eps(consts, regime, eps_rel):
    base = consts["F0"] if regime in ("cvx", "heavy_cvx", "H") else consts["grad0"]
    return eps_rel * base


def _expand(config, problem):
    grid = config.get("grid")
    if grid is None:
        return []
    consts = problem.constants
    regime = grid.get("regime", "cvx")
    cells = []
    for kind in grid["kinds"]:
        if kind == opt.GD_WARMUP:
            for theta in grid.get("theta", [opt.DEFAULT_THETA]):
                info = {"kind": kind, "regime": "gd", "theta": theta}
                cells.append((kind, info))
            continue
        if kind == opt.SGD:
            extras = [{}]
        elif kind == opt.CLIP_SGD:
            extras = [{"c": c} for c in grid.get("c", [])]
            extras += [{"c_mult": m} for m in grid.get("c_mult", [])]
            if not extras:
                raise ConfigError("ClipSGD needs c or c_mult")
        else:
            extras = [{"lam": lam} for lam in grid.get("lam", [])]
            extras += [{"eps_rel": e} for e in grid.get("eps_rel", [])]
            if not extras:
                raise ConfigError("NSGD needs lam or eps_rel")
        steps = ([("eta", e) for e in grid["eta"]] if "eta" in grid
                 else [("eta_mult", m) for m in grid.get("eta_mult", [1.0])])
        for (skey, sval), B, extra, sigma in itertools.product(
            steps, grid.get("B", ["floor"]), extras, grid.get("noise_sigma", [0.0]),
        ):
            info = {"kind": kind, "regime": regime, skey: sval, "B": B, "noise_sigma": sigma}
            info.update(extra)
            cells.append((kind, info))
    return [_resolve_cell(config, problem, kind, info) for kind, info in cells]


def _resolve_cell(config, problem, kind, info):
    consts = problem.constants
    N_spec = config.get("N", 100)
    if kind == opt.GD_WARMUP:
        if consts.get("H0") is None or consts.get("H1") is None:
            raise ConfigError("GDWarmup needs analytic H0 and H1")
        fstar = problem.obj.known_fstar if problem.obj.known_fstar is not None else 0.0
        if N_spec == "complexity":
            raise ConfigError("N = 'complexity' is defined for convex NSGD only")
        cfg = opt.OptimizerConfig(kind, theta=info["theta"], fstar=fstar, H0=consts["H0"],
                                  H1=consts["H1"], max_iters=int(N_spec))
        label = f"{kind}_theta{info['theta']:.6g}"
        return Cell(label, cfg, dict(info, rule=None))
    regime = info["regime"]
    rc = _rule_constants(consts, regime)
    params = {}
    if kind == opt.SGD:
        rule, floor_regime = "sgd", None
    else:
        try:
            rule, floor_regime = _RULE[(kind, regime)]
        except KeyError:
            raise ConfigError(f"{kind} has no rule in regime {regime!r}") from None
    if "c" in info:
        params["c"] = float(info["c"])
    elif "c_mult" in info:
        params["c"] = info["c_mult"] * consts["grad0"]
    if "lam" in info:
        params["lam"] = float(info["lam"])
    elif "eps_rel" in info:
        eps = _eps(consts, regime, info["eps_rel"])
        reg = "cvx" if regime in ("cvx", "heavy_cvx", "H") else "nc"
        try:
            params["lam"] = opt.target_lambda(reg, eps, consts.get("R0"))
        except ContractViolation as exc:
            raise ConfigError(f"cannot resolve lambda: {exc}") from None
        info = dict(info, epsilon=eps)
    try:
        eta_max = opt.theorem_stepsize(rule, dict(rc, **params))
    except ContractViolation as exc:
        raise ConfigError(f"unresolvable constants for rule {rule}: {exc}") from None
    B = info["B"]
    if B == "floor":
        if floor_regime is None:
            B = 1
        else:
            if consts.get("rho") is None:
                raise ConfigError("batch floor needs rho")
            try:
                B = opt.batch_floor(floor_regime, consts["rho"], consts.get("p"))
            except ContractViolation as exc:
                raise ConfigError(f"cannot resolve batch floor: {exc}") from None
    elif int(B) != B or B < 1:
        raise ConfigError(f"bad batch size {B!r}")
    if N_spec == "complexity":
        if rule != "nsgd_cvx" or "epsilon" not in info:
            raise ConfigError("N = 'complexity' needs convex NSGD with eps_rel")
        N = opt.nsgd_cvx_iterations(consts["cL0"], consts["cL1"], consts["rho"], consts["R0"],
                                    consts["F0"], info["epsilon"])
    else:
        N = int(N_spec)
    if "eta" in info:
        eta = float(info["eta"])
        info = dict(info, eta_mult=eta / eta_max)
        tag = f"eta{eta:.6g}"
    else:
        eta = info["eta_mult"] * eta_max
        tag = f"eta{info['eta_mult']:g}"
    try:
        cfg = opt.OptimizerConfig(kind, eta=eta, batch_size=int(B),
                                  max_iters=N, noise_sigma=info["noise_sigma"], **params)
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None
    parts = [kind, tag, f"B{int(B)}"]
    if "c" in params:
        parts.append(f"c{params['c']:.6g}")
    if "lam" in params:
        parts.append(f"lam{params['lam']:.6g}")
    if info["noise_sigma"]:
        parts.append(f"sigma{info['noise_sigma']:g}")
    return Cell("_".join(parts), cfg, dict(info, rule=rule, eta_max=eta_max))


def expand_grid(config):
    """Cartesian expansion of the optimizer grid into configs (seed left at 0)."""
    config = validate_config(config)
    if config.get("grid") is None:
        raise ConfigError("config has no grid")
    return [cell.config for cell in _expand(config, resolve_problem(config))]


# ---------------------------------------------------------------------------
# execution


@dataclass
class CellResult:
    label: str
    config: dict
    info: dict
    seeds: list
    traces: list
    summary: dict
    reports: list = field(default_factory=list)


@dataclass
class SweepResult:
    """Per-cell summaries (seeds aggregated) plus lemma reports."""

    name: str
    cells: list
    reports: list
    constants: dict

    def all_reports(self):
        out = list(self.reports)
        for cell in self.cells:
            out.extend(cell.reports)
        return out

    @property
    def failed(self):
        return any(r.status == verify.FAIL for r in self.all_reports())


def _stats(values):
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"mean": math.nan, "se": math.nan, "median": math.nan}
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return {"mean": float(np.mean(v)), "se": se, "median": float(np.median(v))}


def summarize(traces):
    """Mean, standard error and median over seeds of the headline statistics."""
    return {
        "runs": len(traces),
        "diverged": int(sum(t.diverged for t in traces)),
        "min_grad_norm": _stats([t.min_grad_norm if t.k.size else math.nan for t in traces]),
        "final_gap": _stats([t.final_gap if t.k.size else math.nan for t in traces]),
        "iterations": [t.iterations for t in traces],
    }


def _combine(lemma_id, reports, seeds):
    """Merge per-seed reports: worst margin, first failing seed as witness."""
    live = [(s, r) for s, r in zip(seeds, reports) if r.status != verify.SKIPPED]
    if not live:
        return reports[0] if reports else verify.LemmaReport(lemma_id, verify.SKIPPED)
    margin = min(r.margin for _, r in live)
    for s, r in live:
        if r.status == verify.FAIL:
            return verify.LemmaReport(lemma_id, verify.FAIL, margin=margin, tolerance=r.tolerance,
                                      witness={"seed": s, **_as_dict(r.witness)},
                                      detail=f"{len(live)} runs")
    return verify.LemmaReport(lemma_id, verify.PASS, margin=margin, tolerance=live[0][1].tolerance,
                              detail=f"{len(live)} runs")


def _as_dict(w):
    return w if isinstance(w, dict) else {"at": w}


def _cell_checks(config, problem, cell, traces, seeds):
    checks = config["checks"]
    consts = problem.constants
    obj = problem.obj
    out = []
    prefix = cell.label + ":"
    if "monotone_distance" in checks and cell.config.stochastic:
        reps = [verify.check_monotone_distance(t) for t in traces]
        out.append(_combine(prefix + "monotone_distance", reps, seeds))
    if "step_length" in checks and cell.config.kind in (opt.CLIP_SGD, opt.NSGD):
        L1 = consts.get("L1") or 0.0
        if cell.info["regime"] in ("cvx", "heavy_cvx") and consts.get("cL1"):
            L1 = math.sqrt(consts["rho"]) * consts["cL1"]
        reps = [verify.check_step_length(t, L1=L1 or None) for t in traces]
        out.append(_combine(prefix + "step_length", reps, seeds))
    if "descent_gd" in checks and cell.config.kind == opt.GD_WARMUP:
        reps = [verify.check_descent_gd(t, consts["H0"], consts["H1"]) for t in traces[:1]]
        out.append(_combine(prefix + "descent_gd", reps, seeds[:1]))
    if "theorem_envelope" in checks:
        env = config.get("envelope", {})
        for tid in config["theorems"]:
            rule = _THEOREM_RULES[tid]
            if rule != cell.info.get("rule"):
                continue
            rep = verify.check_theorem_envelope(
                traces, tid, _rule_constants(consts, cell.info["regime"]),
                statistic=env.get("statistic", "mean"), slack=env.get("slack", verify.MC_REL),
                se_mult=env.get("se_mult", verify.MC_SE))
            rep.lemma_id = prefix + rep.lemma_id
            out.append(rep)
    if "rho_floor" in checks and obj.finite_sum and traces:
        stats = [] if problem.noise is None else [problem.noise]
        stats += verify.rho_along_trace(obj, traces[0])
        rep = verify.check_rho_floor(stats)
        rep.lemma_id = prefix + rep.lemma_id
        out.append(rep)
    if "self_bounding" in checks and traces and cell.config.stochastic:
        snaps = traces[0].snapshots
        keys = sorted(snaps)[:: max(1, len(snaps) // 20)]
        rep = verify.check_self_bounding(obj, [snaps[k] for k in keys], rng=make_rng(seeds[0], 1))
        rep.lemma_id = prefix + rep.lemma_id
        out.append(rep)
    return out


def _global_checks(config, problem):
    checks = config["checks"]
    out = []
    if "mds_bound" in checks:
        mds = config.get("mds", {})
        rng = make_rng(int(mds.get("seed", 0)), 2)
        for model in mds.get("models", list(verify.MDS_MODELS)):
            for p in _as_list(mds.get("p", [1.0, 1.2, 2.0])):
                for n in _as_list(mds.get("n", [1, 8, 64])):
                    out.append(verify.check_mds_bound(float(p), int(n), model,
                                                      int(mds.get("num_samples", 100_000)), rng))
    if problem is not None and "variance_batch" in checks and problem.obj.finite_sum:
        rng = make_rng(int(config["seeds"][0]), 3)
        out.append(verify.check_variance_batch(problem.obj, problem.x0,
                                               config.get("variance_batches", [1, 2, 8]), rng=rng))
    return out


def run_cell(problem, cell, seeds):
    """All seeded runs of one cell."""
    traces = []
    meta = {"cell": cell.label, "rule": cell.info.get("rule") or "warmup"}
    if cell.info.get("eta_mult") is not None:
        meta["eta_mult"] = cell.info["eta_mult"]
        meta["eta_max"] = cell.info["eta_max"]
    for key in ("rho", "R0", "F0", "p"):
        val = problem.constants.get(key)
        if isinstance(val, (int, float)) and val is not None:
            meta[f"const.{key}"] = float(val)
    if problem.noise is not None:
        meta.update(problem.noise.metadata())
    for seed in seeds:
        cfg = cell.config.replace(seed=seed)
        traces.append(opt.run(problem.obj, cfg, x0=problem.x0, metadata=meta))
        if not cfg.stochastic:
            # deterministic: every seed gives the same trace
            traces.extend([traces[-1]] * (len(seeds) - 1))
            break
    return traces


def execute(config, checks=None):
    """Run every cell for every seed and attach the requested checks."""
    config = validate_config(config)
    if checks is not None:
        config["checks"] = list(checks)
    problem = resolve_problem(config) if "objective" in config else None
    cells = _expand(config, problem) if problem is not None else []
    results = []
    for cell in cells:
        seeds = config["seeds"]
        traces = run_cell(problem, cell, seeds)
        res = CellResult(cell.label, cell.config.to_dict(), cell.info, list(seeds), traces,
                         summarize(traces))
        res.reports = _cell_checks(config, problem, cell, traces, seeds)
        results.append(res)
    consts = {} if problem is None else problem.constants
    return SweepResult(config["name"], results, _global_checks(config, problem), consts)


# ---------------------------------------------------------------------------
# outputs


def default_output_dir(config=None):
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if config and config.get("output_dir"):
        return Path(config["output_dir"])
    return Path("growthopt_out")


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def result_summary(result):
    """JSON-ready summary of a sweep."""
    return verify._jsonable({
        "name": result.name,
        "constants": {k: v for k, v in result.constants.items()},
        "cells": [
            {"label": c.label, "config": c.config, "info": c.info, "seeds": c.seeds,
             "summary": c.summary,
             "reports": [{"lemma_id": r.lemma_id, "status": r.status} for r in c.reports]}
            for c in result.cells
        ],
        "failed": result.failed,
    })


def write_outputs(result, directory):
    """Write per-trace CSVs, ``summary.json`` and ``reports.json``; returns paths."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output dir {directory}: {exc}") from None
    paths = []
    for cell in result.cells:
        seen = set()
        for seed, trace in zip(cell.seeds, cell.traces):
            if id(trace) in seen:
                continue
            seen.add(id(trace))
            path = directory / f"{result.name}__{cell.label}__seed{seed}.csv"
            _write(path, trace.to_csv())
            paths.append(path)
    summary = directory / f"{result.name}__summary.json"
    _write(summary, json.dumps(result_summary(result), indent=2, sort_keys=True) + "\n")
    paths.append(summary)
    reports = result.all_reports()
    if reports:
        rpath = directory / f"{result.name}__reports.json"
        _write(rpath, verify.reports_to_json(reports))
        paths.append(rpath)
    return paths


# ---------------------------------------------------------------------------
# stability sweep


def stable_step_sizes(result, gap_factor=1.0):
    """Largest step size per optimizer kind whose runs all stayed finite and
    ended with mean gap at most ``gap_factor * F0``; ``None`` if none did."""
    F0 = result.constants["F0"]
    best = {}
    for cell in result.cells:
        kind = cell.config["kind"]
        best.setdefault(kind, None)
        s = cell.summary
        if s["diverged"] == 0 and s["final_gap"]["mean"] <= gap_factor * F0:
            eta = cell.config["eta"]
            best[kind] = eta if best[kind] is None else max(best[kind], eta)
    return best
