"""Counter-based noise streams.

Every random draw in the library comes from a Philox bit generator whose
key is the user-facing seed and whose 256-bit counter encodes a stream
address (domain tag, trial, step).  A stream is therefore a pure function
of (seed, address): the same draws are produced regardless of platform,
process layout, or evaluation order, which is what makes parallel runs
bit-identical to serial ones.

Counter layout (most significant word first):

    [domain tag | trial/index | step | draw counter]

Each address owns 2**64 Philox blocks, far beyond what any stream draws.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

# Domain tags keep unrelated streams (trajectories, training, rendering,
# suite assembly...) disjoint even under equal (trial, step) indices.
DOMAIN_TRAJECTORY = 1
DOMAIN_REVERSE = 2
DOMAIN_TRAINING = 3
DOMAIN_RENDER = 4
DOMAIN_SUITE = 5
DOMAIN_SAMPLE = 6
DOMAIN_DERIVE = 7

_MASK64 = (1 << 64) - 1


def stream(seed: int, domain: int, index: int = 0, step: int = 0) -> Generator:
    """Return the generator for the (seed, domain, index, step) address."""
    counter = (
        ((domain & _MASK64) << 192)
        | ((index & _MASK64) << 128)
        | ((step & _MASK64) << 64)
    )
    return Generator(Philox(key=seed & _MASK64, counter=counter))


def trajectory_noise(seed: int, trial: int, t_count: int, dim: int) -> np.ndarray:
    """Standard-normal noise block for one forward trajectory.

    Row ``t-1`` holds the draw used at timestep ``t``.  The whole block is a
    single stream keyed by (seed, trial), drawn in one call for speed; the
    per-timestep rows are still a pure function of (seed, trial, t).
    """
    gen = stream(seed, DOMAIN_TRAJECTORY, trial)
    return gen.standard_normal((t_count, dim))


def trial_noise(seed: int, trial: int, dim: int) -> np.ndarray:
    """The single noise vector a likelihood trial broadcasts over timesteps."""
    gen = stream(seed, DOMAIN_TRAJECTORY, trial)
    return gen.standard_normal(dim)


def reverse_noise(seed: int, trial: int, t: int, dim: int) -> np.ndarray:
    """Noise used when sampling the reverse transition at timestep ``t``."""
    gen = stream(seed, DOMAIN_REVERSE, trial, t)
    return gen.standard_normal(dim)


def derive_seed(seed: int, index: int, step: int = 0) -> int:
    """Deterministic child seed for the (seed, index, step) address."""
    return int(stream(seed, DOMAIN_DERIVE, index, step).integers(1 << 62))
