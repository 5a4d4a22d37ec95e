"""Counter-based random substreams.

Every random draw in the toolkit comes from a Philox generator keyed by
``(master_seed, trajectory, channel, purpose)``, so results do not depend on
how trajectories are scheduled across workers.
"""

from __future__ import annotations

import zlib

import numpy as np

PURPOSES = ("ou", "shots", "measure")


def purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def substream(master_seed: int, trajectory: int = 0, channel: int = 0,
              purpose: str = "ou") -> np.random.Generator:
    ss = np.random.SeedSequence(
        entropy=int(master_seed) & (2**64 - 1),
        spawn_key=(int(trajectory), int(channel), purpose_key(purpose)),
    )
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, size=None) -> np.ndarray:
    """Samples of CN(0, 1): independent real and imaginary parts of variance 1/2."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) / np.sqrt(2.0)
