"""
Why clipped and normalized SGD tolerate larger steps
====================================================

Plain SGD needs a step of order 1/(rho L) when single-sample gradients
can be rho times larger than the full gradient.  Clipping or normalizing
caps the length of every move, so the same problem tolerates much
larger steps.  We sweep powers of two and record the largest step that
neither diverges nor ends above the starting gap.
"""

from growthopt import harness as H

config = {
    "name": "advantage",
    "objective": {"builder": "interp_least_squares", "seed": 7, "n": 50, "d": 20},
    "seeds": [0, 1, 2, 3, 4],
    "N": 500,
    "grid": {
        "kinds": ["SGD", "ClipSGD", "NSGD"],
        "regime": "cvx",
        "eta": [2.0 ** k for k in range(-10, 9)],
        "B": [1],
        "c_mult": [0.1],  # clip radius relative to the starting gradient norm
        "lam": [0.1],
    },
}

result = H.execute(config)
rho = result.constants["rho"]
best = H.stable_step_sizes(result)

print(f"growth constant at the start: {rho:.1f}")
for kind, eta in best.items():
    print(f"  {kind:>8}: largest stable step {eta}")
ratio = max(best["ClipSGD"], best["NSGD"]) / best["SGD"]
print(f"ratio {ratio:.0f}x  (rho/4 = {rho / 4:.1f})")
