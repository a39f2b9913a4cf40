"""Synthetic objective families with closed-form gradients and known constants.

Four families are provided:

``InterpLeastSquares``
    ``f(x) = (1/n) sum_i 0.5 (a_i^T x - b_i)^2`` with ``b = A x*`` so every
    component is minimized at ``x*`` (interpolation).
``SeparableLogistic``
    ``f(x) = (1/n) sum_i log(1 + exp(-y_i a_i^T x))`` on linearly separable
    data; ``f* = 0`` is an infimum that is never attained.
``ExpInnerProduct``
    ``f(x) = exp(a^T x)``; generalized-smooth but not L-smooth, ``f* = 0``
    as an infimum.
``ParetoQuadratic``
    ``f(x) = 0.5 ||x||^2`` with the heavy-tailed oracle
    ``grad f(x, xi) = (Z + 1) x``, ``Z`` symmetric Pareto with tail index alpha.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np
from scipy import linalg
from scipy.special import expit

from .errors import ContractViolation, UnsupportedOperation
from .rng import make_rng

INTERP_LEAST_SQUARES = "InterpLeastSquares"
SEPARABLE_LOGISTIC = "SeparableLogistic"
EXP_INNER_PRODUCT = "ExpInnerProduct"
PARETO_QUADRATIC = "ParetoQuadratic"
FAMILIES = (INTERP_LEAST_SQUARES, SEPARABLE_LOGISTIC, EXP_INNER_PRODUCT, PARETO_QUADRATIC)

CONVEX_FAMILIES = frozenset(FAMILIES)


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """An immutable objective together with its analytic metadata.

    ``n`` is the number of finite-sum components (0 for the noise-only
    ParetoQuadratic family). ``infimum_only`` marks families whose ``f*``
    is an infimum with no minimizer; ``known_optimum`` is then ``None``.
    """

    family: str
    params: dict
    n: int
    d: int
    known_optimum: np.ndarray = None
    known_fstar: float = None
    per_component_fstar: np.ndarray = None
    infimum_only: bool = False
    seed: int = None
    builder: dict = field(default=None)

    @property
    def finite_sum(self):
        return self.n > 0

    @property
    def interpolating(self):
        """Every realization is minimized at ``known_optimum``."""
        return self.known_optimum is not None

    @property
    def convex(self):
        return self.family in CONVEX_FAMILIES


@dataclass(frozen=True)
class SmoothnessProfile:
    """Smoothness and curvature constants of an objective.

    ``L0, L1`` bound the full objective in the (L0, L1) sense, ``cL0, cL1``
    bound every realization, ``H0, H1`` are the gap-based analogues and
    ``mu`` the strong-convexity modulus. ``None`` means unavailable.
    ``provenance`` maps each constant name to ``"analytic"``,
    ``"empirical"`` or ``"unavailable"``.
    """

    L0: float = None
    L1: float = None
    cL0: float = None
    cL1: float = None
    H0: float = None
    H1: float = None
    mu: float = None
    provenance: dict = field(default_factory=dict)


def as_point(x, d=None):
    """Validate and return ``x`` as a float64 vector of dimension ``d``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ContractViolation(f"point must be a 1-d vector, got shape {x.shape}")
    if d is not None and x.shape[0] != d:
        raise ContractViolation(f"dimension mismatch: expected {d}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ContractViolation("point has non-finite entries")
    return x


# ---------------------------------------------------------------------------
# constructors


def interp_least_squares(A, x_star, seed=None, builder=None):
    """Least squares with targets ``b = A x*`` set exactly."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    x_star = as_point(x_star, A.shape[1])
    b = A @ x_star
    n, d = A.shape
    if n < 1 or d < 1:
        raise ContractViolation("need n >= 1 and d >= 1")
    return ObjectiveSpec(
        family=INTERP_LEAST_SQUARES,
        params={"A": _frozen(A), "b": _frozen(b), "x_star": _frozen(x_star)},
        n=n,
        d=d,
        known_optimum=_frozen(x_star),
        known_fstar=0.0,
        per_component_fstar=_frozen(np.zeros(n)),
        seed=seed,
        builder=builder,
    )


def build_interp_least_squares(seed, n, d, conditioning=0.0):
    """Random interpolating least-squares problem.

    Rows are Gaussian, scaled along a random orthonormal basis by factors
    spaced log-uniformly from 1 down to ``10**-conditioning``; larger
    ``conditioning`` gives a worse-conditioned ``A^T A`` and a larger
    growth constant. ``x*`` is standard normal.
    """
    if n < 1 or d < 1:
        raise ContractViolation("need n >= 1 and d >= 1")
    if conditioning < 0:
        raise ContractViolation("conditioning must be >= 0")
    rng = make_rng(seed, stream=0)
    G = rng.standard_normal((n, d))
    scales = np.logspace(0.0, -float(conditioning), d) if d > 1 else np.ones(1)
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))
    A = (G * scales) @ Q.T
    x_star = rng.standard_normal(d)
    builder = {
        "builder": "interp_least_squares",
        "seed": int(seed),
        "n": int(n),
        "d": int(d),
        "conditioning": float(conditioning),
    }
    return interp_least_squares(A, x_star, seed=int(seed), builder=builder)


def separable_logistic(points, labels, seed=None, builder=None, direction=None):
    """Logistic loss on given points with labels in {-1, +1}.

    ``direction`` optionally records a separating unit vector.
    """
    A = np.atleast_2d(np.asarray(points, dtype=np.float64))
    y = np.asarray(labels, dtype=np.float64).ravel()
    if y.shape[0] != A.shape[0]:
        raise ContractViolation("one label per point required")
    if not np.all(np.abs(y) == 1.0):
        raise ContractViolation("labels must be -1 or +1")
    n, d = A.shape
    params = {"A": _frozen(A), "y": _frozen(y)}
    if direction is not None:
        params["w"] = _frozen(direction)
    return ObjectiveSpec(
        family=SEPARABLE_LOGISTIC,
        params=params,
        n=n,
        d=d,
        known_optimum=None,
        known_fstar=0.0,
        per_component_fstar=_frozen(np.zeros(n)),
        infimum_only=True,
        seed=seed,
        builder=builder,
    )


def build_separable_logistic(seed, n, d, margin):
    """Separable logistic problem with ``y_i <w, a_i> >= margin`` for a unit ``w``."""
    if margin <= 0:
        raise ContractViolation("margin must be positive")
    if n < 1 or d < 1:
        raise ContractViolation("need n >= 1 and d >= 1")
    rng = make_rng(seed, stream=0)
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    P = rng.standard_normal((n, d))
    P -= np.outer(P @ w, w)
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    t = margin + np.abs(rng.standard_normal(n))
    A = P + np.outer(y * t, w)
    builder = {
        "builder": "separable_logistic",
        "seed": int(seed),
        "n": int(n),
        "d": int(d),
        "margin": float(margin),
    }
    return separable_logistic(A, y, seed=int(seed), builder=builder, direction=w)


def build_exp_inner_product(a):
    """``f(x) = exp(a^T x)`` treated as a single-component problem."""
    a = as_point(a)
    if not np.linalg.norm(a) > 0:
        raise ContractViolation("direction a must be nonzero")
    return ObjectiveSpec(
        family=EXP_INNER_PRODUCT,
        params={"a": _frozen(a)},
        n=1,
        d=a.shape[0],
        known_optimum=None,
        known_fstar=0.0,
        per_component_fstar=_frozen(np.zeros(1)),
        infimum_only=True,
        builder={"builder": "exp_inner_product", "a": a.tolist()},
    )


def build_pareto_quadratic(alpha, d):
    """``0.5 ||x||^2`` with multiplicative symmetric-Pareto gradient noise."""
    alpha = float(alpha)
    if not alpha > 1.0:
        raise ContractViolation("tail index alpha must exceed 1")
    if d < 1:
        raise ContractViolation("need d >= 1")
    return ObjectiveSpec(
        family=PARETO_QUADRATIC,
        params={"alpha": alpha},
        n=0,
        d=int(d),
        known_optimum=_frozen(np.zeros(d)),
        known_fstar=0.0,
        builder={"builder": "pareto_quadratic", "alpha": alpha, "d": int(d)},
    )


def pareto_growth_constant(alpha, p):
    """``alpha / (alpha - p) + 1``, the heavy-tail growth constant of ParetoQuadratic."""
    if not 0 < p < alpha:
        raise ContractViolation("need 0 < p < alpha")
    return alpha / (alpha - p) + 1.0


# ---------------------------------------------------------------------------
# evaluation


def eval_full(obj, x):
    """Objective value ``f(x)``; exact component average for finite sums."""
    x = as_point(x, obj.d)
    fam = obj.family
    if fam == INTERP_LEAST_SQUARES:
        r = obj.params["A"] @ x - obj.params["b"]
        return float(0.5 * np.mean(r * r))
    if fam == SEPARABLE_LOGISTIC:
        m = obj.params["y"] * (obj.params["A"] @ x)
        return float(np.mean(np.logaddexp(0.0, -m)))
    if fam == EXP_INNER_PRODUCT:
        return float(math.exp(float(obj.params["a"] @ x)))
    if fam == PARETO_QUADRATIC:
        return float(0.5 * (x @ x))
    raise ContractViolation(f"unknown family {fam!r}")


def grad_full(obj, x):
    """Exact gradient of ``f`` at ``x``."""
    x = as_point(x, obj.d)
    fam = obj.family
    if fam == INTERP_LEAST_SQUARES:
        A = obj.params["A"]
        return A.T @ (A @ x - obj.params["b"]) / obj.n
    if fam == SEPARABLE_LOGISTIC:
        A, y = obj.params["A"], obj.params["y"]
        w = -y * expit(-y * (A @ x))
        return A.T @ w / obj.n
    if fam == EXP_INNER_PRODUCT:
        a = obj.params["a"]
        return a * math.exp(float(a @ x))
    if fam == PARETO_QUADRATIC:
        return x.copy()
    raise ContractViolation(f"unknown family {fam!r}")


def _require_components(obj):
    if not obj.finite_sum:
        raise UnsupportedOperation(
            f"{obj.family} has no finite-sum components; use the oracles module"
        )


def eval_components(obj, x):
    """Vector of all component values ``f_i(x)``."""
    _require_components(obj)
    x = as_point(x, obj.d)
    fam = obj.family
    if fam == INTERP_LEAST_SQUARES:
        r = obj.params["A"] @ x - obj.params["b"]
        return 0.5 * r * r
    if fam == SEPARABLE_LOGISTIC:
        return np.logaddexp(0.0, -obj.params["y"] * (obj.params["A"] @ x))
    return np.array([eval_full(obj, x)])


def grad_components(obj, x):
    """``(n, d)`` array whose row ``i`` is the gradient of component ``i``."""
    _require_components(obj)
    x = as_point(x, obj.d)
    fam = obj.family
    if fam == INTERP_LEAST_SQUARES:
        A = obj.params["A"]
        return A * (A @ x - obj.params["b"])[:, None]
    if fam == SEPARABLE_LOGISTIC:
        A, y = obj.params["A"], obj.params["y"]
        return A * (-y * expit(-y * (A @ x)))[:, None]
    return grad_full(obj, x)[None, :]


def grad_component(obj, x, i):
    """Gradient of component ``i``."""
    _require_components(obj)
    if not 0 <= int(i) < obj.n:
        raise ContractViolation(f"component index {i} out of range [0, {obj.n})")
    x = as_point(x, obj.d)
    i = int(i)
    fam = obj.family
    if fam == INTERP_LEAST_SQUARES:
        a = obj.params["A"][i]
        return a * (a @ x - obj.params["b"][i])
    if fam == SEPARABLE_LOGISTIC:
        a, yi = obj.params["A"][i], obj.params["y"][i]
        return a * (-yi * expit(-yi * (a @ x)))
    return grad_full(obj, x)


def batch_gradient(obj, x, indices):
    """Average of component gradients over ``indices`` (repeats allowed)."""
    x = as_point(x, obj.d)
    _require_components(obj)
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0 or idx.min() < 0 or idx.max() >= obj.n:
        raise ContractViolation(f"indices must be a nonempty subset of [0, {obj.n})")
    return batch_grad_fn(obj)(x, idx)


def value_grad_fn(obj):
    """Unchecked ``x -> (f(x), grad f(x))`` closure for inner loops.

    Shares intermediate products between value and gradient; callers must
    pass finite float64 vectors of length ``obj.d``. Overflow yields ``inf``.
    """
    fam, p = obj.family, obj.params
    if fam == INTERP_LEAST_SQUARES:
        A, b, inv_n = p["A"], p["b"], 1.0 / obj.n
        At = np.ascontiguousarray(A.T)

        def fn(x):
            r = A @ x - b
            return 0.5 * float(r @ r) * inv_n, At @ r * inv_n

    elif fam == SEPARABLE_LOGISTIC:
        A, y, inv_n = p["A"], p["y"], 1.0 / obj.n

        def fn(x):
            m = y * (A @ x)
            return float(np.logaddexp(0.0, -m).sum()) * inv_n, A.T @ (-y * expit(-m)) * inv_n

    elif fam == EXP_INNER_PRODUCT:
        a = p["a"]

        def fn(x):
            v = float(np.exp(a @ x))
            return v, a * v

    elif fam == PARETO_QUADRATIC:

        def fn(x):
            return 0.5 * float(x @ x), x.copy()

    else:
        raise ContractViolation(f"unknown family {fam!r}")
    return fn


def batch_grad_fn(obj):
    """Unchecked ``(x, indices) -> mean component gradient`` closure.

    Batches longer than ``n`` are reduced to per-component draw counts, so
    the cost is ``O(B + n d)`` rather than ``O(B d)``.
    """
    fam, p, n = obj.family, obj.params, obj.n
    if fam == INTERP_LEAST_SQUARES:
        A, b = p["A"], p["b"]
        At = np.ascontiguousarray(A.T)

        def fn(x, idx):
            if len(idx) > n:
                w = np.bincount(idx, minlength=n)
                return At @ (w * (A @ x - b)) * (1.0 / len(idx))
            Ab = A[idx]
            return Ab.T @ (Ab @ x - b[idx]) * (1.0 / len(idx))

    elif fam == SEPARABLE_LOGISTIC:
        A, y = p["A"], p["y"]

        def fn(x, idx):
            if len(idx) > n:
                w = np.bincount(idx, minlength=n)
                return A.T @ (w * -y * expit(-y * (A @ x))) * (1.0 / len(idx))
            Ab, yb = A[idx], y[idx]
            return Ab.T @ (-yb * expit(-yb * (Ab @ x))) * (1.0 / len(idx))

    elif fam == EXP_INNER_PRODUCT:
        full = value_grad_fn(obj)

        def fn(x, idx):
            return full(x)[1]

    else:
        raise UnsupportedOperation(f"{obj.family} has no finite-sum components")
    return fn


# ---------------------------------------------------------------------------
# constants


def smoothness_constants(obj):
    """Analytic smoothness profile of ``obj``.

    For ExpInnerProduct the constants follow the Hessian bound
    ``||hess f(x)|| = ||a||^2 f(x) = ||a|| ||grad f(x)||``.
    """
    fam = obj.family
    if fam == INTERP_LEAST_SQUARES:
        A = obj.params["A"]
        Lmax = float(np.max(np.einsum("ij,ij->i", A, A)))
        eig = np.linalg.eigvalsh(A.T @ A / obj.n)
        mu = float(eig[0]) if eig[0] > 1e-12 * max(eig[-1], 1e-300) else None
        return SmoothnessProfile(
            L0=Lmax, L1=0.0, cL0=Lmax, cL1=0.0, H0=Lmax, H1=0.0, mu=mu,
            provenance=dict.fromkeys(("L0", "L1", "cL0", "cL1", "H0", "H1", "mu"), "analytic"),
        )
    if fam == SEPARABLE_LOGISTIC:
        A = obj.params["A"]
        L = 0.25 * float(np.max(np.einsum("ij,ij->i", A, A)))
        prov = dict.fromkeys(("L0", "L1", "cL0", "cL1", "H0", "H1"), "analytic")
        prov["mu"] = "unavailable"
        return SmoothnessProfile(L0=L, L1=0.0, cL0=L, cL1=0.0, H0=L, H1=0.0, provenance=prov)
    if fam == EXP_INNER_PRODUCT:
        na = float(np.linalg.norm(obj.params["a"]))
        prov = dict.fromkeys(("L0", "L1", "cL0", "cL1", "H0", "H1"), "analytic")
        prov["mu"] = "unavailable"
        return SmoothnessProfile(
            L0=0.0, L1=na, cL0=0.0, cL1=na, H0=0.0, H1=na * na, provenance=prov
        )
    if fam == PARETO_QUADRATIC:
        prov = dict.fromkeys(("L0", "L1", "H0", "H1", "mu"), "analytic")
        prov.update(cL0="unavailable", cL1="unavailable")
        return SmoothnessProfile(L0=1.0, L1=0.0, H0=1.0, H1=0.0, mu=1.0, provenance=prov)
    raise ContractViolation(f"unknown family {fam!r}")


def empirical_lipschitz(obj, rng, num_pairs=1000, radius=1.0, center=None):
    """Largest observed ``||grad f(y) - grad f(x)|| / ||y - x||`` on random pairs.

    A lower estimate of the global gradient Lipschitz constant, used where no
    analytic value is known.
    """
    center = np.zeros(obj.d) if center is None else as_point(center, obj.d)
    best = 0.0
    for _ in range(num_pairs):
        x = center + rng.standard_normal(obj.d)
        u = rng.standard_normal(obj.d)
        y = x + radius * rng.random() * u / np.linalg.norm(u)
        dist = np.linalg.norm(y - x)
        if dist == 0:
            continue
        best = max(best, float(np.linalg.norm(grad_full(obj, y) - grad_full(obj, x)) / dist))
    return best


def certify_smoothness(obj, rng, constants=None, form="L", num_pairs=1000, spread=2.0):
    """Worst relative violation of the generalized-smoothness inequality.

    ``form="L"`` tests ``||grad f(y) - grad f(x)|| <= (L0 + L1 ||grad f(x)||) ||y - x||``
    for ``||y - x|| <= 1/L1``; ``form="H"`` tests the gap-based version with
    ``(H0 + H1 (f(x) - f*))`` and radius ``1/sqrt(H1)``. Returns the largest
    value of ``lhs / rhs - 1`` over the sampled pairs (``<= 0`` means the
    certificate holds on the sample).
    """
    prof = constants if constants is not None else smoothness_constants(obj)
    if form == "L":
        c0, c1 = prof.L0, prof.L1
        radius = 1.0 / c1 if c1 > 0 else spread
    elif form == "H":
        c0, c1 = prof.H0, prof.H1
        radius = 1.0 / math.sqrt(c1) if c1 > 0 else spread
    else:
        raise ContractViolation(f"unknown form {form!r}")
    fstar = obj.known_fstar if obj.known_fstar is not None else 0.0
    center = obj.known_optimum if obj.known_optimum is not None else np.zeros(obj.d)
    worst = -math.inf
    for _ in range(num_pairs):
        x = center + spread * rng.standard_normal(obj.d)
        u = rng.standard_normal(obj.d)
        y = x + radius * rng.random() * u / np.linalg.norm(u)
        dist = float(np.linalg.norm(y - x))
        if dist == 0.0:
            continue
        gx = grad_full(obj, x)
        lhs = float(np.linalg.norm(grad_full(obj, y) - gx))
        if form == "L":
            mod = c0 + c1 * float(np.linalg.norm(gx))
        else:
            mod = c0 + c1 * (eval_full(obj, x) - fstar)
        rhs = mod * dist
        if rhs <= 0.0:
            ratio = 0.0 if lhs == 0.0 else math.inf
        else:
            ratio = lhs / rhs - 1.0
        worst = max(worst, ratio)
    return worst


def growth_constant(obj):
    """Supremum over ``x`` of the finite-sum growth ratio, for InterpLeastSquares.

    With ``H = A^T A / n`` and ``M = (1/n) sum_i ||a_i||^2 a_i a_i^T`` the ratio
    at ``x`` is ``e^T M e / e^T H^2 e`` with ``e = x - x*``; its supremum over
    the row space of ``A`` is the top generalized eigenvalue of ``(M, H^2)``.
    """
    if obj.family != INTERP_LEAST_SQUARES:
        raise UnsupportedOperation("closed-form growth constant only for InterpLeastSquares")
    A = obj.params["A"]
    _, s, Vt = np.linalg.svd(A, full_matrices=False)
    V = Vt[s > 1e-12 * s[0]].T
    Ar = A @ V
    H = Ar.T @ Ar / obj.n
    M = (Ar * np.einsum("ij,ij->i", A, A)[:, None]).T @ Ar / obj.n
    return float(linalg.eigh(M, H @ H, eigvals_only=True)[-1])


# ---------------------------------------------------------------------------
# serialization


def to_dict(obj):
    """JSON-ready description: family tag, parameters, seed and builder args."""
    params = {}
    for key, val in obj.params.items():
        params[key] = val.tolist() if isinstance(val, np.ndarray) else val
    return {
        "family": obj.family,
        "params": params,
        "n": obj.n,
        "d": obj.d,
        "seed": obj.seed,
        "builder": obj.builder,
    }


def from_dict(data):
    """Inverse of :func:`to_dict`; also accepts a builder-argument mapping."""
    if "builder" in data and "family" not in data:
        return build_objective(data)
    fam = data["family"]
    p = data["params"]
    seed, builder = data.get("seed"), data.get("builder")
    if fam == INTERP_LEAST_SQUARES:
        return interp_least_squares(p["A"], p["x_star"], seed=seed, builder=builder)
    if fam == SEPARABLE_LOGISTIC:
        return separable_logistic(p["A"], p["y"], seed=seed, builder=builder, direction=p.get("w"))
    if fam == EXP_INNER_PRODUCT:
        return build_exp_inner_product(p["a"])
    if fam == PARETO_QUADRATIC:
        return build_pareto_quadratic(p["alpha"], data["d"])
    raise ContractViolation(f"unknown family {fam!r}")


def dumps(obj):
    return json.dumps(to_dict(obj), sort_keys=True)


def loads(text):
    return from_dict(json.loads(text))


def build_objective(spec):
    """Construct an objective from a builder mapping such as
    ``{"builder": "interp_least_squares", "seed": 7, "n": 50, "d": 20}``.
    Serialized documents produced by :func:`to_dict` are accepted too.
    """
    if "family" in spec:
        return from_dict(spec)
    kind = spec.get("builder")
    args = {k: v for k, v in spec.items() if k != "builder"}
    if kind == "interp_least_squares":
        if "A" in args:
            return interp_least_squares(args["A"], args["x_star"], builder=dict(spec))
        return build_interp_least_squares(
            args["seed"], args["n"], args["d"], args.get("conditioning", 0.0)
        )
    if kind == "separable_logistic":
        return build_separable_logistic(args["seed"], args["n"], args["d"], args["margin"])
    if kind == "exp_inner_product":
        return build_exp_inner_product(args["a"])
    if kind == "pareto_quadratic":
        return build_pareto_quadratic(args["alpha"], args["d"])
    raise ContractViolation(f"unknown objective builder {kind!r}")
