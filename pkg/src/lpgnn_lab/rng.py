"""Named, reproducible random streams derived from one root seed."""

import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def stream(seed, *path) -> np.random.Generator:
    """Generator for ``path`` under root ``seed``.

    ``stream(7, "ldp", "select")`` and ``stream(7, "ldp", "bernoulli")`` are
    independent, and each is unchanged by draws taken from the other.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.default_rng(ss)
