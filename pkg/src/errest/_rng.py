"""Deterministic seed derivation shared by splitters, learners and studies.

All randomness in the package flows through numpy Generators created here.
Child streams are derived by counter (spawn keys), so results are identical
for a fixed master seed regardless of evaluation order or worker count.
"""

import numpy as np


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for `seed`, optionally descended along a counter path."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def rng_from(seed: int, *key: int) -> np.random.Generator:
    """Generator seeded from `seed` and a counter path (e.g. replicate index)."""
    return np.random.default_rng(seed_sequence(seed, *key))


def child_seed(seed: int, *key: int) -> int:
    """Derive a 32-bit child seed; used where an integer seed must be handed on."""
    return int(seed_sequence(seed, *key).generate_state(1, dtype=np.uint32)[0])
