"""Mini-batch stochastic gradients and empirical noise constants.

Finite-sum families draw component indices uniformly with replacement.
ParetoQuadratic draws ``grad f(x, xi) = (Z + 1) x`` with ``Z`` symmetric
Pareto, so a mini-batch gradient is ``(mean(Z) + 1) x``.
"""

from dataclasses import dataclass, asdict
import itertools
import math

import numpy as np
from scipy.optimize import nnls

from . import objectives as obj_mod
from .errors import ContractViolation, DegeneratePointError, UnsupportedOperation
from .rng import rng_cursor

DEGENERATE_TOL = 1e-12
MOM_BLOCKS = 16

# Above this batch size a ParetoQuadratic mini-batch mean is drawn in
# aggregate (see sample_pareto_mean) instead of materializing every draw.
EXACT_BATCH_CAP = 1 << 16
TAIL_DRAWS = 1024


@dataclass(frozen=True, eq=False)
class OracleSample:
    """One averaged mini-batch gradient.

    ``draws`` holds component indices (finite sums) or Pareto realizations;
    it is ``None`` when an aggregated Pareto batch mean was drawn.
    """

    gradient: np.ndarray
    batch_size: int
    draws: np.ndarray
    rng_cursor: int


@dataclass(frozen=True)
class NoiseStats:
    """Empirical noise constants at one point (or fitted over several).

    ``moment_hat`` is the normalized centered p-th moment
    ``E||g - grad f||^p / ||grad f||^p`` and ``rho_p_hat = moment_hat + 1``.
    """

    rho_hat: float = None
    sigma_hat: float = 0.0
    p: float = None
    rho_p_hat: float = None
    moment_hat: float = None
    sample_count: int = 1
    estimator_variant: str = "exact_finite_sum"

    def metadata(self, prefix="noise."):
        return {prefix + k: v for k, v in asdict(self).items() if v is not None}


def median_of_means(values, blocks=MOM_BLOCKS):
    """Median of ``blocks`` contiguous block means; returns ``(estimate, se)``.

    The standard error is the spread of block means scaled by
    ``sqrt(pi / (2 * blocks))``, the large-sample SE of a median.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size < blocks:
        raise ContractViolation(f"need at least {blocks} samples for median-of-means")
    usable = values.size - values.size % blocks
    means = values[:usable].reshape(blocks, -1).mean(axis=1)
    se = float(np.std(means, ddof=1) * math.sqrt(math.pi / (2 * blocks)))
    return float(np.median(means)), se


def sample_symmetric_pareto(alpha, rng, size=None):
    """Symmetric Pareto draws with density ``(alpha/2) |z|^-(alpha+1)`` on ``|z| >= 1``.

    ``|Z| = U^(-1/alpha)`` with ``U`` uniform on ``(0, 1]`` and an independent
    fair sign.
    """
    if not alpha > 1.0:
        raise ContractViolation("tail index alpha must exceed 1")
    u = 1.0 - rng.random(size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    z = sign * u ** (-1.0 / alpha)
    return float(z) if size is None else z


def _body_variance(alpha, T):
    """``E[Z^2 | |Z| <= T]`` for the symmetric Pareto law."""
    mass = 1.0 - T ** -alpha
    if alpha == 2.0:
        integral = 2.0 * math.log(T)
    else:
        integral = alpha * (T ** (2.0 - alpha) - 1.0) / (2.0 - alpha)
    return integral / mass


def sample_pareto_mean(alpha, B, rng):
    """Mean of ``B`` i.i.d. symmetric Pareto draws; returns ``(mean, draws)``.

    Up to :data:`EXACT_BATCH_CAP` every draw is materialized. Beyond it the
    draws above a threshold ``T`` (chosen so about :data:`TAIL_DRAWS` of them
    are expected) are sampled exactly: their count is binomial and each is
    ``T * U^(-1/alpha)``. The remaining bounded draws are symmetric with
    known variance and are summed as a Gaussian; by symmetry the leading
    Edgeworth correction vanishes, so the distributional error is
    ``O(1 / TAIL_DRAWS)`` regardless of ``B``. ``draws`` is ``None`` then.
    """
    B = int(B)
    if B < 1:
        raise ContractViolation("batch size must be >= 1")
    if B <= EXACT_BATCH_CAP:
        z = sample_symmetric_pareto(alpha, rng, B)
        return float(np.mean(z)), z
    q = TAIL_DRAWS / B
    T = q ** (-1.0 / alpha)
    k = int(rng.binomial(B, q))
    tail = sample_symmetric_pareto(alpha, rng, k) * T
    body = (B - k) * _body_variance(alpha, T)
    total = float(np.sum(tail)) + math.sqrt(body) * float(rng.standard_normal())
    return total / B, None


def _draw_gradient(obj, x, B, rng, noise_sigma=0.0):
    """Averaged mini-batch gradient and its raw draws."""
    if obj.finite_sum:
        idx = rng.integers(0, obj.n, size=B)
        g = obj_mod.batch_gradient(obj, x, idx)
        draws = idx
    elif obj.family == obj_mod.PARETO_QUADRATIC:
        zbar, draws = sample_pareto_mean(obj.params["alpha"], B, rng)
        g = (zbar + 1.0) * x
    else:
        raise UnsupportedOperation(f"no stochastic oracle for {obj.family}")
    if noise_sigma:
        g = g + rng.standard_normal(obj.d) * (noise_sigma / math.sqrt(obj.d * B))
    return g, draws


def minibatch_fn(obj, B, noise_sigma=0.0):
    """Unchecked ``(x, rng) -> averaged gradient`` closure with the same
    draw order as :func:`sample_minibatch`, for optimizer inner loops."""
    B = int(B)
    d = obj.d
    noise_scale = noise_sigma / math.sqrt(d * B) if noise_sigma else 0.0
    if obj.finite_sum:
        grad = obj_mod.batch_grad_fn(obj)
        n = obj.n

        def base(x, rng):
            return grad(x, rng.integers(0, n, size=B))

    elif obj.family == obj_mod.PARETO_QUADRATIC:
        alpha = obj.params["alpha"]

        def base(x, rng):
            return (sample_pareto_mean(alpha, B, rng)[0] + 1.0) * x

    else:
        raise UnsupportedOperation(f"no stochastic oracle for {obj.family}")
    if not noise_scale:
        return base

    def noisy(x, rng):
        return base(x, rng) + rng.standard_normal(d) * noise_scale

    return noisy


def sample_minibatch(obj, x, B, rng, noise_sigma=0.0):
    """Draw one mini-batch stochastic gradient at ``x``.

    ``noise_sigma`` adds independent Gaussian noise with
    ``E||noise||^2 = noise_sigma^2`` to every draw, for generalized growth
    experiments with ``sigma > 0``.
    """
    B = int(B)
    if B < 1:
        raise ContractViolation("batch size must be >= 1")
    x = obj_mod.as_point(x, obj.d)
    g, draws = _draw_gradient(obj, x, B, rng, noise_sigma)
    return OracleSample(gradient=g, batch_size=B, draws=draws, rng_cursor=rng_cursor(rng))


def _full_gradient_or_raise(obj, x):
    g = obj_mod.grad_full(obj, x)
    gn = float(np.linalg.norm(g))
    if gn <= DEGENERATE_TOL:
        raise DegeneratePointError(
            f"full gradient norm {gn:.3e} is below {DEGENERATE_TOL:g}; growth ratio undefined"
        )
    return g, gn


def estimate_rho(obj, x):
    """Exact finite-sum growth ratio ``mean_i ||grad f_i||^2 / ||mean_i grad f_i||^2``."""
    if not obj.finite_sum:
        raise UnsupportedOperation(f"{obj.family} is not a finite sum")
    x = obj_mod.as_point(x, obj.d)
    G = obj_mod.grad_components(obj, x)
    g = G.mean(axis=0)
    gn2 = float(g @ g)
    if math.sqrt(gn2) <= DEGENERATE_TOL:
        raise DegeneratePointError("full gradient vanishes; growth ratio undefined")
    energy = float(np.mean(np.einsum("ij,ij->i", G, G)))
    return NoiseStats(
        rho_hat=energy / gn2,
        sigma_hat=0.0,
        sample_count=obj.n,
        estimator_variant="exact_finite_sum",
    )


def single_draw_deviations(obj, x, num_samples, rng):
    """Norms ``||grad f(x, xi_j) - grad f(x)||`` for ``num_samples`` single draws."""
    x = obj_mod.as_point(x, obj.d)
    g = obj_mod.grad_full(obj, x)
    if obj.finite_sum:
        G = obj_mod.grad_components(obj, x) - g
        dev = np.sqrt(np.einsum("ij,ij->i", G, G))
        return dev[rng.integers(0, obj.n, size=num_samples)]
    if obj.family == obj_mod.PARETO_QUADRATIC:
        z = sample_symmetric_pareto(obj.params["alpha"], rng, num_samples)
        return np.abs(z) * float(np.linalg.norm(x))
    raise UnsupportedOperation(f"no stochastic oracle for {obj.family}")


def estimate_p_moment(obj, x, p, num_samples, rng):
    """Heavy-tail growth constant from the centered p-th moment.

    ``rho_p_hat = E||g - grad f||^p / ||grad f||^p + 1`` (the form with
    ``sigma = 0``), the expectation estimated by median-of-means over
    :data:`MOM_BLOCKS` blocks.
    """
    if not 1.0 < p < 2.0:
        raise ContractViolation("moment order p must lie in (1, 2)")
    _, gn = _full_gradient_or_raise(obj, x)
    dev = single_draw_deviations(obj, x, int(num_samples), rng)
    moment, _ = median_of_means((dev / gn) ** p)
    return NoiseStats(
        p=float(p),
        rho_p_hat=moment + 1.0,
        moment_hat=moment,
        sample_count=int(num_samples),
        estimator_variant="monte_carlo",
    )


def pareto_abs_moment(alpha, p, num_samples, rng):
    """Median-of-means estimate of ``E|Z|^p`` and its standard error."""
    z = sample_symmetric_pareto(alpha, rng, int(num_samples))
    return median_of_means(np.abs(z) ** p)


def running_moment(values, p):
    """Running raw means of ``|values|^p`` (index ``j`` uses the first ``j+1`` values)."""
    v = np.abs(np.asarray(values, dtype=np.float64)) ** p
    return np.cumsum(v) / np.arange(1, v.size + 1)


def exact_variance(obj, x):
    """``E||grad f_i(x) - grad f(x)||^2`` over uniformly drawn components."""
    G = obj_mod.grad_components(obj, obj_mod.as_point(x, obj.d))
    D = G - G.mean(axis=0)
    return float(np.mean(np.einsum("ij,ij->i", D, D)))


def exact_second_moment(obj, x):
    """``E||grad f_i(x)||^2`` over uniformly drawn components."""
    G = obj_mod.grad_components(obj, obj_mod.as_point(x, obj.d))
    return float(np.mean(np.einsum("ij,ij->i", G, G)))


def enumerate_batch_variance(obj, x, B):
    """Exact mini-batch variance by enumerating all ``n**B`` ordered draws."""
    B = int(B)
    if B < 1:
        raise ContractViolation("batch size must be >= 1")
    if obj.n ** B > 1 << 22:
        raise ContractViolation(f"n**B = {obj.n ** B} draws is too many to enumerate")
    G = obj_mod.grad_components(obj, obj_mod.as_point(x, obj.d))
    g = G.mean(axis=0)
    total = 0.0
    for combo in itertools.product(range(obj.n), repeat=B):
        dev = G[list(combo)].mean(axis=0) - g
        total += float(dev @ dev)
    return total / obj.n ** B


def minibatch_deviations(obj, x, B, num_samples, rng, chunk=1 << 14):
    """Squared deviations ``||g_B - grad f(x)||^2`` for ``num_samples`` batches."""
    B = int(B)
    if B < 1:
        raise ContractViolation("batch size must be >= 1")
    x = obj_mod.as_point(x, obj.d)
    g = obj_mod.grad_full(obj, x)
    out = np.empty(int(num_samples))
    if obj.finite_sum:
        G = obj_mod.grad_components(obj, x)
        for start in range(0, out.size, chunk):
            m = min(chunk, out.size - start)
            idx = rng.integers(0, obj.n, size=(m, B))
            dev = G[idx].mean(axis=1) - g
            out[start:start + m] = np.einsum("ij,ij->i", dev, dev)
        return out
    if obj.family == obj_mod.PARETO_QUADRATIC:
        xx = float(x @ x)
        for j in range(out.size):
            zbar, _ = sample_pareto_mean(obj.params["alpha"], B, rng)
            out[j] = zbar * zbar * xx
        return out
    raise UnsupportedOperation(f"no stochastic oracle for {obj.family}")


def minibatch_variance(obj, x, B, num_samples, rng):
    """Monte Carlo estimate of ``E||g_B - grad f(x)||^2``."""
    return float(np.mean(minibatch_deviations(obj, x, B, num_samples, rng)))


def fit_growth(obj, points):
    """Fit ``(rho - 1, sigma^2)`` of the generalized growth condition.

    Exact finite-sum variances at each point are regressed on
    ``||grad f||^2`` with a nonnegative intercept.
    """
    rows, rhs = [], []
    for x in points:
        g = obj_mod.grad_full(obj, x)
        rows.append([float(g @ g), 1.0])
        rhs.append(exact_variance(obj, x))
    coef, _ = nnls(np.array(rows), np.array(rhs))
    return NoiseStats(
        rho_hat=1.0 + float(coef[0]),
        sigma_hat=math.sqrt(float(coef[1])),
        sample_count=len(rows),
        estimator_variant="least_squares_fit",
    )
