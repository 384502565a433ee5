"""Seeded random streams keyed by (master seed, task indices).

Every random draw in the package goes through :func:`make_rng` so that a
trial's stream depends only on its key, never on execution order.
"""

import numpy as np


def make_rng(seed, *key):
    """Return a Generator for ``seed`` and an integer task ``key``.

    ``seed`` may be an int, a ``SeedSequence`` or an existing ``Generator``
    (returned unchanged when no key is given).
    """
    if isinstance(seed, np.random.Generator):
        if key:
            raise TypeError("cannot derive a keyed stream from a Generator")
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(
            seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(int(k) for k in key)
        )
    else:
        seed = int(seed)
        if seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")
        ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
