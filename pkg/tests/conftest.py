import numpy as np
import pytest

from lloca import minkowski as mink
from lloca.toy_task import default_masses, generate_dataset


def timelike_vectors(rng, shape=(), mass_range=(0.3, 1.5)):
    """Future-directed timelike four-vectors with O(1) components."""
    spatial = rng.normal(size=(*shape, 3))
    mass = rng.uniform(*mass_range, size=(*shape, 1))
    energy = np.sqrt((spatial ** 2).sum(-1, keepdims=True) + mass ** 2)
    return np.concatenate([energy, spatial], axis=-1)


def admissible_triples(rng, n):
    v = timelike_vectors(rng, (n, 3))
    return v[:, 0], v[:, 1], v[:, 2]


def lorentz_batch(rng, n, beta_max=0.9):
    return np.stack([mink.random_lorentz(rng, beta_max=beta_max) for _ in range(n)])


def apply_lam(lam, vectors):
    return np.einsum("...ij,...j->...i", lam, vectors)


def toy_batch(rng, batch, n_particles=6):
    data = generate_dataset(rng, batch, n_particles=n_particles,
                            masses=default_masses(n_particles))
    return data.particle_set()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
