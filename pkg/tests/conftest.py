import itertools

import numpy as np
import pytest

from equalqa.core import IsingModel


def naive_energy(model, z):
    """Term-by-term double loop; deliberately shares nothing with core.energy."""
    e = model.offset
    for i in range(model.n):
        e += model.h.get(i, 0.0) * z[i]
    for i in range(model.n):
        for j in range(i + 1, model.n):
            e += model.J.get((i, j), 0.0) * z[i] * z[j]
    return e


def all_configs(n):
    return np.array(list(itertools.product([-1, 1], repeat=n)), dtype=np.int8)


def enumerate_energies(model):
    """Energy of every configuration by the naive loop, in product order."""
    return np.array([naive_energy(model, z) for z in all_configs(model.n)])


def random_model(rng, n, density=0.5, offset=True):
    h = {i: float(rng.uniform(-1, 1)) for i in range(n) if rng.random() < 0.8}
    J = {
        (i, j): float(rng.uniform(-1, 1))
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < density
    }
    return IsingModel(n, h, J, float(rng.uniform(-1, 1)) if offset else 0.0)


def random_spins(rng, n):
    return np.where(rng.random(n) < 0.5, -1, 1).astype(np.int8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
