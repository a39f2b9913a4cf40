"""Mechanical checks of inequalities, identities and convergence envelopes.

Every check is a pure function of its inputs (plus an explicit RNG for the
Monte Carlo ones) and returns a :class:`LemmaReport`. ``margin`` is the
worst observed slack, normalized so that ``margin >= -tolerance`` means the
inequality held everywhere; ``witness`` locates the worst violation.
"""

from dataclasses import dataclass, asdict, field
import json
import math

import numpy as np

from . import objectives as obj_mod
from . import oracles
from . import optimizers as opt
from .errors import DegeneratePointError

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"

EXACT_TOL = 1e-9
MC_REL = 0.05
MC_SE = 3.0
ENVELOPE_SEEDS = 20

CHECK_IDS = (
    "self_bounding",
    "monotone_distance",
    "descent_gd",
    "step_length",
    "theorem_envelope",
    "mds_bound",
    "variance_batch",
    "rho_floor",
)

# theorem id -> (statistic, step rule, batch regime)
THEOREMS = {
    "clip_nc": ("min_grad_norm", "clip_nc", "clip_nc"),
    "clip_nc_additive": ("min_grad_norm", "clip_nc", "clip_nc"),
    "nsgd_nc": ("min_grad_norm", "nsgd_nc", "nsgd_nc"),
    "nsgd_nc_heavy": ("min_grad_norm", "nsgd_nc", "heavy"),
    "clip_cvx": ("final_gap", "clip_cvx", "clip_cvx"),
    "nsgd_cvx": ("final_gap", "nsgd_cvx", "nsgd_cvx"),
    "nsgd_cvx_heavy": ("final_gap", "nsgd_cvx", "heavy"),
    "clip_H_cvx": ("final_gap", "clip_H", "clip_H"),
    "nsgd_H_cvx": ("final_gap", "nsgd_H", "nsgd_H"),
    "gd_nc": ("min_grad_norm", None, None),
    "gd_convex": ("final_gap", None, None),
}


@dataclass
class LemmaReport:
    """Outcome of one check."""

    lemma_id: str
    status: str
    margin: float = None
    tolerance: float = None
    witness: object = None
    detail: str = ""
    statistic: float = None
    bound: float = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status == FAIL and self.witness is None:
            self.witness = "unlocated"

    @property
    def passed(self):
        return self.status == PASS

    def to_dict(self):
        out = asdict(self)
        return {k: _jsonable(v) for k, v in out.items()}


@dataclass
class RateFit:
    """Two-phase rate fit of a gap series.

    ``linear_rate`` is the per-iteration contraction factor of the log-linear
    phase ``[0, phase_boundary)``; ``sublinear_exponent`` is ``b`` in
    ``F_k ~ C (k + 1)^-b`` on ``[phase_boundary, N]``. When a phase is empty
    the corresponding model is fitted on the whole series instead.
    """

    phase_boundary: int
    linear_rate: float = None
    linear_log_intercept: float = None
    sublinear_exponent: float = None
    sublinear_log_const: float = None
    residual: float = None
    method: str = "threshold"
    status: str = "ok"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def reports_to_json(reports):
    """JSON array of reports, key-sorted for byte-stable output."""
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def reports_table(reports):
    """Fixed-width human-readable table."""
    lines = [f"{'check':<34} {'status':<8} {'margin':>12}  witness / detail"]
    for r in reports:
        m = "" if r.margin is None else f"{r.margin:12.4e}"
        note = r.witness if r.status == FAIL else r.detail
        lines.append(f"{r.lemma_id:<34} {r.status:<8} {m:>12}  {note}")
    return "\n".join(lines)


def _finish(lemma_id, slacks, tol, witnesses, detail="", **kw):
    """Build a report from normalized slacks (``>= -tol`` means satisfied)."""
    slacks = np.asarray(slacks, dtype=np.float64)
    if slacks.size == 0:
        return LemmaReport(lemma_id, PASS, margin=math.inf, tolerance=tol, detail=detail or "vacuous", **kw)
    bad = ~(slacks >= -tol)
    worst = int(np.nanargmin(slacks)) if not np.all(np.isnan(slacks)) else 0
    margin = float(slacks[worst])
    if bad.any():
        first = int(np.argmax(bad))
        return LemmaReport(lemma_id, FAIL, margin=margin, tolerance=tol,
                           witness=witnesses(first), detail=detail, **kw)
    return LemmaReport(lemma_id, PASS, margin=margin, tolerance=tol, detail=detail, **kw)


# ---------------------------------------------------------------------------
# per-realization and per-iteration inequalities


def self_bounding_slack(g, x, x_star, cL0, cL1):
    """Normalized slack of ``||g||^2 <= 2 (cL0 + cL1 ||g||) <g, x - x*>`` (rows of ``g``)."""
    g = np.atleast_2d(g)
    gn = np.linalg.norm(g, axis=1)
    lhs = gn ** 2
    rhs = 2.0 * (cL0 + cL1 * gn) * (g @ (x - x_star))
    return (rhs - lhs) / np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))


def check_self_bounding(obj, points, rng=None, batch_sizes=(2, 8), batches_per_size=64,
                        constants=None, tol=EXACT_TOL):
    """Self-bounding inequality at every point for all single draws and sampled batches.

    ``constants`` (``cL0, cL1``) overrides the analytic per-realization ones.
    """
    lid = "self_bounding"
    if not (obj.interpolating and obj.finite_sum):
        return LemmaReport(lid, SKIPPED, detail="needs an interpolating finite sum")
    prof = obj_mod.smoothness_constants(obj)
    cL0, cL1 = (constants or (prof.cL0, prof.cL1))
    if cL0 is None or cL1 is None:
        return LemmaReport(lid, SKIPPED, detail="per-realization constants unavailable")
    x_star = obj.known_optimum
    slacks, where = [], []
    for j, x in enumerate(points):
        x = obj_mod.as_point(x, obj.d)
        G = obj_mod.grad_components(obj, x)
        s = self_bounding_slack(G, x, x_star, cL0, cL1)
        slacks.extend(s)
        where.extend({"point": j, "batch": 1, "draw": i} for i in range(obj.n))
        if rng is not None:
            for B in batch_sizes:
                idx = rng.integers(0, obj.n, size=(batches_per_size, B))
                s = self_bounding_slack(G[idx].mean(axis=1), x, x_star, cL0, cL1)
                slacks.extend(s)
                where.extend({"point": j, "batch": B, "draw": t} for t in range(batches_per_size))
    return _finish(lid, slacks, tol, lambda i: where[i],
                   detail=f"{len(slacks)} evaluations at {len(points)} points")


def check_monotone_distance(trace, tol=1e-12):
    """``||x^{k+1} - x*|| <= ||x^k - x*|| + tol`` at every iteration."""
    lid = "monotone_distance"
    dist = trace.dist_to_opt
    if dist.size == 0 or np.all(np.isnan(dist)):
        return LemmaReport(lid, SKIPPED, detail="optimum unknown")
    slack = dist[:-1] - dist[1:]
    return _finish(lid, slack, tol, lambda i: {"iteration": int(trace.k[i])},
                   detail=f"{slack.size} steps")


def check_descent_gd(trace, H0, H1, tol=1e-10):
    """Basic descent ``F_{k+1} <= F_k - (eta_k/2) ||grad f(x^k)||^2`` and the
    locality bound ``eta_k ||grad f(x^k)|| <= 1/sqrt(H1)`` from logged scalars.

    Descent slack is normalized by ``max(1, F_0)``; locality slack by ``1/sqrt(H1)``.
    """
    lid = "descent_gd"
    F, gn, eta = trace.gap, trace.grad_norm, trace.step_size
    if F.size < 2:
        return LemmaReport(lid, PASS, margin=math.inf, tolerance=tol, detail="no steps")
    scale = max(1.0, abs(float(F[0])))
    descent = (F[:-1] - 0.5 * eta[:-1] * gn[:-1] ** 2 - F[1:]) / scale
    slacks = list(descent)
    where = [{"iteration": int(k), "inequality": "descent"} for k in trace.k[:-1]]
    if H1 > 0:
        radius = 1.0 / math.sqrt(H1)
        loc = (radius - eta[:-1] * gn[:-1]) / radius
        slacks.extend(loc)
        where.extend({"iteration": int(k), "inequality": "locality"} for k in trace.k[:-1])
    return _finish(lid, slacks, tol, lambda i: where[i], detail=f"{F.size - 1} steps")


def check_step_length(trace, L1=None, tol=1e-12):
    """Per-step length ``<= eta * c`` (ClipSGD) or ``<= eta`` (NSGD), and
    ``<= 1/L1`` when ``L1 > 0`` is given. Slacks are relative to each cap."""
    lid = "step_length"
    kind = trace.metadata.get("kind")
    eta = trace.metadata.get("config.eta")
    if kind == opt.CLIP_SGD:
        cap = eta * trace.metadata["config.c"]
    elif kind == opt.NSGD:
        cap = eta
    else:
        return LemmaReport(lid, SKIPPED, detail=f"no step-length bound for {kind}")
    steps = trace.step_len[:-1]
    slacks = list((cap - steps) / cap)
    where = [{"iteration": int(k), "bound": "eta-cap"} for k in trace.k[:-1]]
    detail = f"cap {cap:.6g}"
    if L1:
        radius = 1.0 / L1
        slacks.extend((radius - steps) / radius)
        where.extend({"iteration": int(k), "bound": "locality"} for k in trace.k[:-1])
        detail += f", locality {radius:.6g}"
    return _finish(lid, slacks, tol, lambda i: where[i], detail=detail)


# ---------------------------------------------------------------------------
# envelopes


def envelope_bound(theorem_id, params, trace=None):
    """Right-hand side of a convergence envelope.

    ``params`` needs ``F0, eta, N`` plus ``c`` (clipping), ``lam`` (NSGD),
    ``R0`` (convex), ``sigma, B`` (generalized growth). GD envelopes read
    the gap series of ``trace`` and need ``H0, H1, theta`` (and ``R0``).
    """
    P = params
    if theorem_id not in THEOREMS:
        raise KeyError(f"unknown theorem id {theorem_id!r}")
    if theorem_id in ("gd_nc", "gd_convex"):
        return _gd_bound(theorem_id, P, trace)
    F0, eta, N = P["F0"], P["eta"], P["N"]
    if theorem_id in ("clip_nc", "clip_nc_additive"):
        c = P["c"]
        bound = math.sqrt(18.0 * F0 / (eta * N)) + 18.0 * F0 / (eta * c * N)
        if theorem_id == "clip_nc_additive":
            s, B = P["sigma"], P["B"]
            bound += 6.0 * math.sqrt(2.0) * s / math.sqrt(B) + 9.0 * s * s / (c * B)
        return bound
    if theorem_id in ("nsgd_nc", "nsgd_nc_heavy"):
        return 4.0 * F0 / (eta * N) + 6.0 * P["lam"]
    R0 = P["R0"]
    if theorem_id in ("clip_cvx", "clip_H_cvx"):
        c = P["c"]
        return max((1.0 - eta * c / (36.0 * R0)) ** (N / 2.0) * F0, 18.0 * R0 ** 2 / (N * eta))
    return (1.0 - eta / (4.0 * R0)) ** N * F0 + 6.0 * P["lam"] * R0


def _phase_index(gaps, H0, H1):
    """Smallest ``k`` in ``[0, N-1]`` with ``F_k < H0/(3 H1)``; ``N`` if none."""
    N = gaps.size - 1
    thr = math.inf if H1 == 0 else H0 / (3.0 * H1)
    hits = np.nonzero(gaps[:N] < thr)[0]
    return int(hits[0]) if hits.size else N


def _gd_bound(theorem_id, P, trace):
    F = trace.gap
    N = F.size - 1
    H0, H1, theta = P["H0"], P["H1"], P["theta"]
    F0 = float(F[0])
    M = _phase_index(F, H0, H1)
    if theorem_id == "gd_nc":
        def warm(m):
            return math.sqrt(6.0 * H1 * F0 * float(np.sum(F[:m])) / (theta * m * m))
        if M == 0:
            return math.sqrt(2.0 * H0 * F0 / (theta * N))
        if M == N:
            return warm(N)
        return min(warm(M), math.sqrt(2.0 * H0 * F0 / (theta * (N - M))))
    R = P["R0"]
    lin = (1.0 - theta / (6.0 * H1 * R * R)) ** M * F0 if H1 > 0 else math.inf
    if M == N:
        return lin
    return min(lin, 2.0 * H0 * R * R / (theta * (N - M)))


def _admissible(theorem_id, traces, constants):
    """Reason string if the configuration violates the theorem's rules, else None."""
    _, rule, regime = THEOREMS[theorem_id]
    meta = traces[0].metadata
    if rule is None:
        if meta.get("kind") != opt.GD_WARMUP:
            return "GD envelope needs a GDWarmup trace"
        return None
    consts = dict(constants)
    for key in ("c", "lam"):
        if f"config.{key}" in meta:
            consts.setdefault(key, meta[f"config.{key}"])
    try:
        eta_max = opt.theorem_stepsize(rule, consts)
    except Exception as exc:  # missing constants
        return f"step rule {rule}: {exc}"
    if meta["config.eta"] > eta_max * (1.0 + 1e-12):
        return f"eta {meta['config.eta']:.6g} exceeds rule maximum {eta_max:.6g}"
    try:
        floor = opt.batch_floor(regime, consts.get("rho", math.nan), consts.get("p"))
    except Exception as exc:
        return f"batch floor {regime}: {exc}"
    if meta["config.batch_size"] < floor:
        return f"batch {meta['config.batch_size']} below floor {floor}"
    return None


def trace_statistic(trace, which):
    """``min_{k < N} ||grad f(x^k)||`` or the final gap."""
    if which == "min_grad_norm":
        g = trace.grad_norm[:-1] if trace.grad_norm.size > 1 else trace.grad_norm
        return float(np.min(g))
    return float(trace.gap[-1])


def check_theorem_envelope(traces, theorem_id, constants, statistic="mean",
                           slack=MC_REL, se_mult=MC_SE, check_admissible=True):
    """Compare a multi-seed statistic against a theorem envelope.

    Passes iff ``stat <= bound * (1 + slack) + se_mult * SE`` where ``stat``
    is the mean (or median) over traces. Divergent traces count as failures.
    """
    lid = f"theorem_envelope:{theorem_id}"
    if theorem_id not in THEOREMS:
        return LemmaReport(lid, SKIPPED, detail=f"unknown theorem {theorem_id}")
    traces = list(traces)
    if not traces:
        return LemmaReport(lid, SKIPPED, detail="no traces")
    if check_admissible:
        reason = _admissible(theorem_id, traces, constants)
        if reason:
            return LemmaReport(lid, SKIPPED, detail=f"inadmissible: {reason}")
    which = THEOREMS[theorem_id][0]
    diverged = [i for i, t in enumerate(traces) if t.diverged]
    if diverged:
        return LemmaReport(lid, FAIL, witness={"diverged_seed_index": diverged[0]},
                           detail="divergent run under an envelope check")
    vals = np.array([trace_statistic(t, which) for t in traces])
    S = vals.size
    if statistic == "median":
        stat = float(np.median(vals))
        se = 1.2533 * float(np.std(vals, ddof=1)) / math.sqrt(S) if S > 1 else 0.0
    else:
        stat = float(np.mean(vals))
        se = float(np.std(vals, ddof=1)) / math.sqrt(S) if S > 1 else 0.0
    t0 = traces[0]
    meta = t0.metadata
    params = dict(constants)
    params.update(
        F0=max(float(t.gap[0]) for t in traces),
        N=t0.iterations,
        eta=meta.get("config.eta"),
        c=meta.get("config.c"),
        lam=meta.get("config.lam"),
        B=meta.get("config.batch_size"),
        theta=meta.get("config.theta"),
    )
    params.setdefault("sigma", meta.get("config.noise_sigma", 0.0))
    if params["N"] < 1:
        return LemmaReport(lid, SKIPPED, detail="zero-iteration run")
    bounds = [envelope_bound(theorem_id, params, t) for t in traces]
    bound = max(bounds)
    allowed = bound * (1.0 + slack) + se_mult * se
    margin = (allowed - stat) / max(bound, 1e-300)
    rep = LemmaReport(
        lid, PASS if stat <= allowed else FAIL, margin=margin, tolerance=0.0,
        statistic=stat, bound=bound,
        detail=f"{statistic} of {which} over {S} runs, SE {se:.3g}",
        extra={"se": se, "slack": slack, "se_mult": se_mult, "values": vals},
    )
    if rep.status == FAIL:
        rep.witness = {"worst_run": int(np.argmax(vals)), "statistic": stat, "allowed": allowed}
    return rep


def check_gd_halving(obj, H0, H1, mu, rounds=10, theta=opt.DEFAULT_THETA, x0=None):
    """Restarted warm-up GD halves the gap within the sufficient budget per round."""
    lid = "gd_halving"
    x = opt.default_start(obj) if x0 is None else np.asarray(x0, dtype=np.float64)
    fstar = obj.known_fstar
    slacks, where, budgets = [], [], []
    for r in range(rounds):
        F0 = obj_mod.eval_full(obj, x) - fstar
        if F0 <= 0:
            break
        N = opt.gd_halving_budget(H0, H1, F0, theta, mu)
        cfg = opt.OptimizerConfig(opt.GD_WARMUP, theta=theta, fstar=fstar, H0=H0, H1=H1, max_iters=N)
        tr = opt.run(obj, cfg, x0=x)
        slacks.append((0.5 * F0 - tr.final_gap) / F0)
        where.append({"round": r, "budget": N, "start_gap": F0, "end_gap": tr.final_gap})
        budgets.append(N)
        x = tr.x_final
    return _finish(lid, slacks, 0.0, lambda i: where[i],
                   detail=f"{len(slacks)} rounds, budgets {sorted(set(budgets))}")


# ---------------------------------------------------------------------------
# noise identities


MDS_MODELS = ("rademacher", "gaussian", "pareto")


def mds_increments(model, size, rng, alpha=None):
    """Zero-mean i.i.d. increments of a model (``alpha`` for Pareto).

    ``"repeated"`` is a negative control: one Rademacher sign copied across
    each row, which is not a martingale difference sequence.
    """
    if model == "repeated":
        m, n = size
        return np.repeat(np.where(rng.random((m, 1)) < 0.5, -1.0, 1.0), n, axis=1)
    if model == "rademacher":
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)
    if model == "gaussian":
        return rng.standard_normal(size)
    if model == "pareto":
        return oracles.sample_symmetric_pareto(alpha, rng, size)
    raise KeyError(f"unknown increment model {model!r}")


def mds_alpha(p):
    """Tail index used for Pareto increments: finite p-th moment, heavy tail."""
    return 1.5 if p < 1.5 else 3.0


def check_mds_bound(p, n, increment_model, num_samples, rng, alpha=None,
                    slack=MC_REL, se_mult=MC_SE, chunk=1 << 15):
    """``E|S_n|^p <= 2 sum_j E|X_j|^p`` by median-of-means on both sides."""
    lid = f"mds_bound:{increment_model}:p={p:g}:n={n}"
    if not 1.0 <= p <= 2.0:
        return LemmaReport(lid, SKIPPED, detail="p outside [1, 2]")
    if increment_model == "pareto":
        alpha = mds_alpha(p) if alpha is None else alpha
        if not alpha > p:
            return LemmaReport(lid, SKIPPED, detail="p-th moment infinite")
    lhs_vals = np.empty(num_samples)
    rhs_vals = np.empty(num_samples)
    for start in range(0, num_samples, chunk):
        m = min(chunk, num_samples - start)
        X = mds_increments(increment_model, (m, n), rng, alpha)
        lhs_vals[start:start + m] = np.abs(X.sum(axis=1)) ** p
        rhs_vals[start:start + m] = (np.abs(X) ** p).sum(axis=1)
    lhs, lhs_se = oracles.median_of_means(lhs_vals)
    rhs, rhs_se = oracles.median_of_means(rhs_vals)
    bound = 2.0 * rhs
    se = math.hypot(lhs_se, 2.0 * rhs_se)
    allowed = bound * (1.0 + slack) + se_mult * se
    margin = (allowed - lhs) / bound
    status = PASS if lhs <= allowed else FAIL
    return LemmaReport(lid, status, margin=margin, tolerance=0.0, statistic=lhs, bound=bound,
                       witness=None if status == PASS else {"lhs": lhs, "allowed": allowed},
                       detail=f"{num_samples} samples, alpha={alpha}" if alpha else f"{num_samples} samples")


def check_variance_batch(obj, x, B_list, rng=None, num_samples=100_000, exact_tol=1e-10,
                         mc_rel=MC_REL, max_enum=1 << 16):
    """``B * Var_B = Var_1``: exhaustive for ``B <= 2`` (small ``n``), Monte Carlo otherwise."""
    lid = "variance_batch"
    if not obj.finite_sum:
        return LemmaReport(lid, SKIPPED, detail="needs a finite sum")
    var1 = oracles.exact_variance(obj, x)
    scale = max(1.0, var1)
    slacks, where, notes = [], [], []
    for B in B_list:
        if B <= 2 and obj.n ** B <= max_enum:
            vb = oracles.enumerate_batch_variance(obj, x, B)
            slacks.append((exact_tol * scale - abs(vb * B - var1)) / scale)
            notes.append(f"B={B} exact")
        else:
            if rng is None:
                return LemmaReport(lid, SKIPPED, detail=f"B={B} needs an RNG for Monte Carlo")
            vb = oracles.minibatch_variance(obj, x, B, num_samples, rng)
            rel = abs(vb * B / var1 - 1.0) if var1 > 0 else abs(vb)
            slacks.append(mc_rel - rel)
            notes.append(f"B={B} mc")
        where.append({"B": B, "var_B": vb, "var_1": var1})
    return _finish(lid, slacks, 0.0, lambda i: where[i], detail=", ".join(notes))


def check_rho_floor(noise_stats, tol=EXACT_TOL):
    """Every growth estimate is at least ``1 - tol``."""
    lid = "rho_floor"
    vals, where = [], []
    for i, s in enumerate(noise_stats):
        for name in ("rho_hat", "rho_p_hat"):
            v = getattr(s, name)
            if v is not None:
                vals.append(v - 1.0)
                where.append({"estimate": i, "field": name, "value": v})
    return _finish(lid, vals, tol, lambda i: where[i], detail=f"{len(vals)} estimates")


def rho_along_trace(obj, trace):
    """Exact finite-sum growth ratios at the snapshotted iterates (degenerate ones skipped)."""
    out = []
    for k in sorted(trace.snapshots):
        try:
            out.append(oracles.estimate_rho(obj, trace.snapshots[k]))
        except DegeneratePointError:
            continue
    return out


# ---------------------------------------------------------------------------
# phases


def _ls_fit(t, y):
    """Least-squares line ``y = a + b t``; returns ``(a, b, sse)``."""
    if t.size == 1:
        return float(y[0]), 0.0, 0.0
    A = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(coef[0]), float(coef[1]), float(r @ r)


def _prefix_sse(t, y):
    """SSE of the best line on every prefix ``[0, m)`` via cumulative sums."""
    m = np.arange(1, t.size + 1, dtype=np.float64)
    St, Sy = np.cumsum(t), np.cumsum(y)
    Stt, Sty, Syy = np.cumsum(t * t), np.cumsum(t * y), np.cumsum(y * y)
    var_t = Stt - St * St / m
    cov = Sty - St * Sy / m
    var_y = Syy - Sy * Sy / m
    with np.errstate(divide="ignore", invalid="ignore"):
        sse = np.where(var_t > 0, var_y - cov * cov / var_t, var_y)
    return np.concatenate([[0.0], np.maximum(sse, 0.0)])


def fit_phases(trace, mode="gd", H0=None, H1=None, min_points=10):
    """Locate the phase boundary and fit rates on either side.

    ``mode="gd"`` uses the threshold ``F_k < H0/(3 H1)``; any other mode uses
    a two-piece least-squares changepoint on ``log F_k`` (log-linear before,
    power law in ``k + 1`` after) as an observable surrogate for a boundary
    defined through expected gaps.
    """
    gaps = np.asarray(trace.gap if hasattr(trace, "gap") else trace, dtype=np.float64)
    N = gaps.size - 1
    if gaps.size < min_points:
        return RateFit(phase_boundary=0, status="skipped")
    k = np.arange(gaps.size, dtype=np.float64)
    keep = gaps > 0
    if mode == "gd":
        tau = _phase_index(gaps, H0, 0.0 if H1 is None else H1)
        method = "threshold"
    else:
        kk, yy = k[keep], np.log(gaps[keep])
        lin = _prefix_sse(kk, yy)
        sub = _prefix_sse(np.log1p(kk[::-1]), yy[::-1])[::-1]
        total = lin + sub
        j = int(np.argmin(total))
        tau = int(kk[j]) if j < kk.size else N
        method = "changepoint_surrogate"
    first = keep & (k < tau)
    second = keep & (k >= tau)
    if first.sum() < 2:
        first = keep
    if second.sum() < 2:
        second = keep
    y = np.log(np.where(keep, gaps, 1.0))
    a1, b1, s1 = _ls_fit(k[first], y[first])
    a2, b2, s2 = _ls_fit(np.log1p(k[second]), y[second])
    npts = max(1, int(keep.sum()))
    return RateFit(
        phase_boundary=int(min(max(tau, 0), N)),
        linear_rate=math.exp(b1),
        linear_log_intercept=a1,
        sublinear_exponent=-b2,
        sublinear_log_const=a2,
        residual=math.sqrt((s1 + s2) / npts),
        method=method,
    )
