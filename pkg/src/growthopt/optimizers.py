"""ClipSGD, NSGD, plain SGD and warm-up gradient descent, with step/batch rules.

A run logs one row per iterate ``x^0 .. x^N``. Row ``k`` carries the
full-gradient norm and gap at ``x^k`` together with the step size used to
leave ``x^k`` and the resulting step length ``||x^{k+1} - x^k||``; the
terminal row has ``step_len = 0`` and the step size that would be used next.
"""

from dataclasses import dataclass, field, fields, asdict
import io
import math

import numpy as np

from . import objectives as obj_mod
from .errors import ContractViolation
from .oracles import minibatch_fn
from .rng import make_rng

SGD, CLIP_SGD, NSGD, GD_WARMUP = "SGD", "ClipSGD", "NSGD", "GDWarmup"
KINDS = (SGD, CLIP_SGD, NSGD, GD_WARMUP)

DEFAULT_THETA = 1.0 / (4.0 * math.sqrt(2.0) + 4.0)
DIVERGENCE_FACTOR = 1e8
MAX_SNAPSHOTS = 1000

_REQUIRED = {
    SGD: ("eta",),
    CLIP_SGD: ("eta", "c"),
    NSGD: ("eta", "lam"),
    GD_WARMUP: ("theta", "fstar", "H0", "H1"),
}
_OPTIONAL = ("eta", "c", "lam", "theta", "fstar", "H0", "H1")

CSV_COLUMNS = ("k", "grad_norm", "gap", "step_size", "dist_to_opt", "step_len")


# ---------------------------------------------------------------------------
# directions and rules


def clip_direction(g, c):
    """``min(1, c / ||g||) * g``; the zero vector maps to itself."""
    if not c > 0:
        raise ContractViolation("clipping radius c must be positive")
    g = np.asarray(g, dtype=np.float64)
    gn = float(np.linalg.norm(g))
    if gn <= c:
        return g.copy()
    return g * (c / gn)


def nsgd_direction(g, lam):
    """``g / (||g|| + lam)``."""
    if not lam > 0:
        raise ContractViolation("normalization offset lambda must be positive")
    g = np.asarray(g, dtype=np.float64)
    return g / (float(np.linalg.norm(g)) + lam)


def warmup_stepsize(F_k, H0, H1, theta):
    """``theta * min(1/H0, 1/(3 H1 F_k))`` with ``1/0 = +inf`` on either side."""
    if F_k < 0:
        raise ContractViolation("gap F_k must be nonnegative")
    if not 0.0 < theta <= 0.75:
        raise ContractViolation("theta must lie in (0, 3/4]")
    if H0 < 0 or H1 < 0:
        raise ContractViolation("H0 and H1 must be nonnegative")
    a = 1.0 / H0 if H0 > 0 else math.inf
    denom = 3.0 * H1 * F_k
    b = 1.0 / denom if denom > 0 else math.inf
    step = min(a, b)
    if math.isinf(step):
        raise ContractViolation("step undefined: H0 = 0 and H1 * F_k = 0")
    return theta * step


def _need(constants, *keys):
    out = []
    for key in keys:
        val = constants.get(key)
        if val is None:
            raise ContractViolation(f"constant {key!r} is required")
        val = float(val)
        if val < 0 or not math.isfinite(val):
            raise ContractViolation(f"constant {key!r} must be finite and >= 0")
        out.append(val)
    return out


def _ratio(num, den):
    if not den > 0:
        raise ContractViolation("step-size rule has a zero denominator")
    return num / den


def _h_scale(H1, R0):
    return max(math.sqrt(H1), H1 * R0)


_RULES = {
    "clip_nc": (("L0", "L1", "c"), lambda L0, L1, c: _ratio(1.0, 9.0 * (L0 + L1 * c))),
    "nsgd_nc": (("L0", "L1", "lam"), lambda L0, L1, lam: _ratio(lam, L0 + L1 * lam)),
    "clip_cvx": (
        ("cL0", "cL1", "rho", "c"),
        lambda a, b, rho, c: _ratio(1.0, 9.0 * (a + math.sqrt(rho) * b * c)),
    ),
    "nsgd_cvx": (
        ("cL0", "cL1", "rho", "lam"),
        lambda a, b, rho, lam: _ratio(lam, a + math.sqrt(rho) * b * lam),
    ),
    "clip_H": (
        ("H0", "H1", "R0", "c"),
        lambda H0, H1, R0, c: _ratio(1.0, 9.0 * (H0 + _h_scale(H1, R0) * c)),
    ),
    "nsgd_H": (
        ("H0", "H1", "R0", "lam"),
        lambda H0, H1, R0, lam: _ratio(lam, H0 + _h_scale(H1, R0) * lam),
    ),
    # classical SGD under strong growth with an L-smooth objective
    "sgd": (("L0", "rho"), lambda L0, rho: _ratio(1.0, rho * L0)),
}
RULE_IDS = tuple(_RULES)


def theorem_stepsize(rule_id, constants):
    """Largest admissible step size of a named rule.

    ``constants`` maps names (``L0, L1, cL0, cL1, H0, H1, rho, R0, c, lam``)
    to values; only those the rule uses are read.
    """
    try:
        keys, rule = _RULES[rule_id]
    except KeyError:
        raise ContractViolation(f"unknown step-size rule {rule_id!r}") from None
    if "rho" in keys and constants.get("rho") is not None and float(constants["rho"]) < 1.0:
        raise ContractViolation("rho must be >= 1")
    return float(rule(*_need(constants, *keys)))


_FLOOR_FACTORS = {
    "clip_nc": 72.0,
    "nsgd_nc": 64.0,
    "clip_cvx": 36.0,
    "nsgd_cvx": 64.0,
    "clip_H": 36.0,
    "nsgd_H": 64.0,
}
REGIMES = tuple(_FLOOR_FACTORS) + ("heavy",)


def batch_floor(regime, rho, p=None):
    """Minimal batch size of a regime, rounded up and clamped to at least 1."""
    rho = float(rho)
    if not rho >= 1.0:
        raise ContractViolation("rho must be >= 1")
    if regime == "heavy":
        if p is None or not 1.0 < p < 2.0:
            raise ContractViolation("heavy-tailed regime needs p in (1, 2)")
        if rho == 1.0:
            return 1
        # in log space: the floor overflows float64 for p close to 1
        log2_val = (3.0 * p + 1.0) / (p - 1.0) + math.log2(rho - 1.0) / (p - 1.0)
        if log2_val > 62:
            raise ContractViolation(f"heavy-tailed batch floor 2^{log2_val:.1f} exceeds int64")
        return _ceil(2.0 ** log2_val)
    try:
        factor = _FLOOR_FACTORS[regime]
    except KeyError:
        raise ContractViolation(f"unknown regime {regime!r}") from None
    return _ceil(factor * (rho - 1.0))


def _ceil(val):
    """Ceiling clamped to 1, snapping values within float error of an integer."""
    r = round(val)
    if abs(val - r) <= 1e-12 * max(1.0, abs(val)):
        return max(1, int(r))
    return max(1, math.ceil(val))


def target_lambda(regime, epsilon, R0=None):
    """``epsilon / 12`` (non-convex) or ``epsilon / (12 R0)`` (convex)."""
    if not epsilon > 0:
        raise ContractViolation("epsilon must be positive")
    if regime == "nc":
        return epsilon / 12.0
    if regime == "cvx":
        if R0 is None or not R0 > 0:
            raise ContractViolation("convex regime needs R0 > 0")
        return epsilon / (12.0 * R0)
    raise ContractViolation(f"unknown regime {regime!r}")


def nsgd_cvx_iterations(cL0, cL1, rho, R0, F0, epsilon):
    """Iterations sufficient for ``(1 - eta/(4 R0))^N F0 <= epsilon / 2``
    at ``lam = epsilon/(12 R0)`` and the maximal convex NSGD step."""
    scale = 48.0 * cL0 * R0 ** 2 / epsilon + 4.0 * math.sqrt(rho) * cL1 * R0
    return max(1, math.ceil(scale * math.log(2.0 * F0 / epsilon)))


def gd_halving_budget(H0, H1, F0, theta, mu):
    """Iterations sufficient for warm-up GD to halve the gap of a
    ``mu``-strongly convex ``(H0, H1)``-smooth function."""
    if not mu > 0:
        raise ContractViolation("mu must be positive")
    return math.ceil(8.0 * H0 / (theta * mu) + 12.0 * H1 * F0 * math.log(2.0) / (theta * mu))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class OptimizerConfig:
    """Algorithm choice plus hyperparameters.

    ``eta`` is absent for GDWarmup (derived each iteration); ``theta`` defaults
    to ``1/(4 sqrt(2) + 4)`` there. ``noise_sigma`` injects Gaussian oracle
    noise with ``E||noise||^2 = noise_sigma^2`` per draw.
    """

    kind: str
    eta: float = None
    c: float = None
    lam: float = None
    batch_size: int = 1
    theta: float = None
    fstar: float = None
    H0: float = None
    H1: float = None
    max_iters: int = 100
    seed: int = 0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown optimizer kind {self.kind!r}")
        if self.kind == GD_WARMUP and self.theta is None:
            object.__setattr__(self, "theta", DEFAULT_THETA)
        need = _REQUIRED[self.kind]
        for name in _OPTIONAL:
            val = getattr(self, name)
            if name in need and val is None:
                raise ContractViolation(f"{self.kind} requires {name}")
            if name not in need and val is not None:
                raise ContractViolation(f"{self.kind} does not take {name}")
            if val is not None:
                object.__setattr__(self, name, float(val))
        for name in ("eta", "c", "lam"):
            val = getattr(self, name)
            if val is not None and not (val > 0 and math.isfinite(val)):
                raise ContractViolation(f"{name} must be positive and finite")
        if self.theta is not None and not 0.0 < self.theta <= 0.75:
            raise ContractViolation("theta must lie in (0, 3/4]")
        for name in ("H0", "H1"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ContractViolation(f"{name} must be >= 0")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ContractViolation("batch size must be an integer >= 1")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ContractViolation("max_iters must be an integer >= 0")
        if self.noise_sigma < 0:
            raise ContractViolation("noise_sigma must be >= 0")
        object.__setattr__(self, "batch_size", int(self.batch_size))
        object.__setattr__(self, "max_iters", int(self.max_iters))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))

    @property
    def stochastic(self):
        return self.kind != GD_WARMUP

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ContractViolation(f"unknown optimizer fields {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes):
        data = self.to_dict()
        data.update(changes)
        return OptimizerConfig(**{k: v for k, v in data.items() if v is not None})


# ---------------------------------------------------------------------------
# traces


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse(text):
    if text in ("true", "false"):
        return text == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


@dataclass
class RunTrace:
    """Scalar log of a run plus thinned iterate snapshots."""

    k: np.ndarray
    grad_norm: np.ndarray
    gap: np.ndarray
    step_size: np.ndarray
    dist_to_opt: np.ndarray
    step_len: np.ndarray
    snapshots: dict = field(default_factory=dict)
    x_final: np.ndarray = None
    diverged: bool = False
    divergence_iter: int = None
    divergence_reason: str = None
    metadata: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.k) - 1

    @property
    def min_grad_norm(self):
        return float(np.min(self.grad_norm))

    @property
    def final_gap(self):
        return float(self.gap[-1])

    @property
    def F0(self):
        return float(self.gap[0])

    def running_min_grad_norm(self):
        return np.minimum.accumulate(self.grad_norm)

    def summary(self):
        return {
            "iterations": self.iterations,
            "min_grad_norm": self.min_grad_norm,
            "final_gap": self.final_gap,
            "final_grad_norm": float(self.grad_norm[-1]),
            "diverged": self.diverged,
        }

    def header(self):
        meta = dict(self.metadata)
        meta["diverged"] = self.diverged
        if self.diverged:
            meta["divergence_iter"] = self.divergence_iter
            meta["divergence_reason"] = self.divergence_reason
        return meta

    def to_csv(self, path=None):
        """CSV text (and optionally a file): ``# key=value`` header then rows."""
        buf = io.StringIO()
        for key, val in self.header().items():
            buf.write(f"# {key}={_fmt(val)}\n")
        buf.write(",".join(CSV_COLUMNS) + "\n")
        cols = [self.k, self.grad_norm, self.gap, self.step_size, self.dist_to_opt, self.step_len]
        for row in zip(*cols):
            buf.write(str(int(row[0])) + "," + ",".join(repr(float(v)) for v in row[1:]) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source):
        """Parse CSV text or a path written by :meth:`to_csv`."""
        if "\n" not in str(source):
            with open(source, encoding="utf-8") as fh:
                source = fh.read()
        meta, rows = {}, []
        lines = source.splitlines()
        for line in lines:
            if line.startswith("# "):
                key, _, val = line[2:].partition("=")
                meta[key] = _parse(val)
            elif line and not line.startswith("k,"):
                rows.append(line.split(","))
        data = np.array([[float(v) for v in r] for r in rows]).reshape(-1, len(CSV_COLUMNS))
        diverged = bool(meta.pop("diverged", False))
        div_iter = meta.pop("divergence_iter", None)
        reason = meta.pop("divergence_reason", None)
        return cls(
            k=data[:, 0].astype(np.int64),
            grad_norm=data[:, 1],
            gap=data[:, 2],
            step_size=data[:, 3],
            dist_to_opt=data[:, 4],
            step_len=data[:, 5],
            diverged=diverged,
            divergence_iter=div_iter,
            divergence_reason=reason,
            metadata=meta,
        )


# ---------------------------------------------------------------------------
# run loop


def default_start(obj):
    """Origin, except ones for ParetoQuadratic whose optimum is the origin."""
    if obj.family == obj_mod.PARETO_QUADRATIC:
        return np.ones(obj.d)
    return np.zeros(obj.d)


def run(obj, config, x0=None, rng=None, metadata=None):
    """Execute ``config.max_iters`` iterations of the configured method.

    The oracle stream defaults to ``make_rng(config.seed)``. Runs stop early,
    with a recorded divergence event, on a non-finite value or when the gap
    exceeds ``1e8 * F_0``.
    """
    x = default_start(obj) if x0 is None else obj_mod.as_point(x0, obj.d).copy()
    if rng is None:
        rng = make_rng(config.seed)
    fstar = config.fstar if config.fstar is not None else obj.known_fstar
    fstar = math.nan if fstar is None else float(fstar)
    xstar = obj.known_optimum
    N = config.max_iters
    every = max(1, math.ceil(N / MAX_SNAPSHOTS))
    kind = config.kind
    eta = config.eta
    B = config.batch_size

    value_grad = obj_mod.value_grad_fn(obj)
    sample = minibatch_fn(obj, B, config.noise_sigma) if config.stochastic else None
    c, lam = config.c, config.lam
    has_fstar = not math.isnan(fstar)

    ks, gns, gaps, steps, dists, lens = [], [], [], [], [], []
    snapshots = {}
    diverged, div_iter, reason = False, None, None
    F0 = None
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            f, g = value_grad(x)
            gn = math.sqrt(float(g @ g))
            F = f - fstar
            if F0 is None:
                F0 = F
            if not (math.isfinite(f) and math.isfinite(gn)):
                diverged, div_iter, reason = True, k, "non-finite value"
                break
            if xstar is not None:
                e = x - xstar
                dist = math.sqrt(float(e @ e))
            else:
                dist = math.nan
            blown = has_fstar and F0 > 0 and F > DIVERGENCE_FACTOR * F0
            if k % every == 0 or k == N or blown:
                snapshots[k] = x.copy()
            if kind == GD_WARMUP:
                step = warmup_stepsize(max(F, 0.0), config.H0, config.H1, config.theta)
            else:
                step = eta
            ks.append(k)
            gns.append(gn)
            gaps.append(F)
            steps.append(step)
            dists.append(dist)
            if blown:
                lens.append(0.0)
                diverged, div_iter, reason = True, k, "gap exceeded 1e8 * F0"
                break
            if k == N:
                lens.append(0.0)
                break
            if kind == GD_WARMUP:
                direction = g
            else:
                gb = sample(x, rng)
                if kind == SGD:
                    direction = gb
                else:
                    bn = math.sqrt(float(gb @ gb))
                    if kind == CLIP_SGD:
                        direction = gb * (c / bn) if bn > c else gb
                    else:
                        direction = gb / (bn + lam)
            delta = step * direction
            step_len = math.sqrt(float(delta @ delta))
            if not math.isfinite(step_len):
                lens.append(math.inf)
                diverged, div_iter, reason = True, k + 1, "non-finite iterate"
                break
            lens.append(step_len)
            x = x - delta
            k += 1

    meta = {"kind": kind, "family": obj.family}
    meta.update({f"config.{key}": val for key, val in config.to_dict().items()})
    if metadata:
        meta.update(metadata)
    return RunTrace(
        k=np.asarray(ks, dtype=np.int64),
        grad_norm=np.asarray(gns, dtype=np.float64),
        gap=np.asarray(gaps, dtype=np.float64),
        step_size=np.asarray(steps, dtype=np.float64),
        dist_to_opt=np.asarray(dists, dtype=np.float64),
        step_len=np.asarray(lens, dtype=np.float64),
        snapshots=snapshots,
        x_final=x,
        diverged=diverged,
        divergence_iter=div_iter,
        divergence_reason=reason,
        metadata=meta,
    )
