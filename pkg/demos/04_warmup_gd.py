"""
Gradient descent that adapts its step to the gap
================================================

Under (H0, H1)-smoothness the curvature may grow with f(x) - f*.  A step
theta * min(1/H0, 1/(3 H1 F)) is short while the gap is large and grows
as it shrinks.  On exp(<a, x>) the curvature is exactly proportional to
the function, so the run starts with tiny steps and speeds up.
"""

import numpy as np

from growthopt import objectives as O
from growthopt import optimizers as P
from growthopt import verify as V

a = np.array([1.0, 0.5])
obj = O.build_exp_inner_product(a)
prof = O.smoothness_constants(obj)
cfg = P.OptimizerConfig(P.GD_WARMUP, fstar=0.0, H0=prof.H0, H1=prof.H1, max_iters=2000)
trace = P.run(obj, cfg, x0=np.array([3.0, 1.0]))

for k in (0, 10, 100, 1000, 2000):
    print(f"k={k:5d}  gap {trace.gap[k]:10.3e}  step {trace.step_size[min(k, trace.iterations - 1)]:.3e}")

# every step decreases f by the amount the descent lemma promises
print(V.check_descent_gd(trace, prof.H0, prof.H1).status)

# restarting GD on a strongly convex quadratic halves the gap per round
quad = O.build_pareto_quadratic(1.5, 2)
rep = V.check_gd_halving(quad, 1.0, 0.0, 1.0, rounds=10)
print(rep.status, "-", rep.detail)
