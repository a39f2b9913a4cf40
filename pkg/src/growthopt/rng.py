"""Seeded random streams.

Every random draw in the package goes through a Philox counter-based
generator keyed by a 64-bit seed and a stream index, so the same
``(seed, stream)`` reproduces the same bits on every platform.
"""

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed, stream=0):
    """Return a Philox-backed generator for ``(seed, stream)``.

    Distinct stream indices give statistically independent streams for
    the same seed (objective construction vs. oracle draws, for example).
    """
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    seq = np.random.SeedSequence([int(seed) & SEED_MASK, int(stream)])
    return np.random.Generator(np.random.Philox(seq))


def rng_cursor(rng):
    """Position in the underlying Philox stream, in 64-bit words consumed."""
    state = rng.bit_generator.state
    counter = int(state["state"]["counter"][0])
    return 4 * counter + int(state["buffer_pos"]) - 4
