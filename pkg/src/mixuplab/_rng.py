import numpy as np


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn(seed, n: int) -> list[np.random.Generator]:
    """Independent child streams; child k depends only on (seed, k)."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def box_muller(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws built from the generator's uniform stream."""
    shape = (size,) if np.isscalar(size) else tuple(size)
    count = int(np.prod(shape))
    half = (count + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([radius * np.cos(2.0 * np.pi * u2), radius * np.sin(2.0 * np.pi * u2)])
    return z[:count].reshape(shape)
