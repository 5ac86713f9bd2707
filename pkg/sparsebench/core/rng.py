import numpy as np

# Philox is counter-based and bit-reproducible across platforms, so a seed pins
# the whole stream.
BIT_GENERATOR = np.random.Philox


def make_rng(seed: int) -> np.random.Generator:
    """Build the benchmark's pinned generator for ``seed``."""
    return np.random.Generator(BIT_GENERATOR(int(seed)))


def spawn_rngs(seed: int, count: int) -> list:
    """Independent child generators (one per chain or worker) from one seed."""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [np.random.Generator(BIT_GENERATOR(child)) for child in children]
