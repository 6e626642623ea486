import itertools

import numpy as np
import pytest

from spinmple import coupling


def sk(n, seed):
    return coupling.build(coupling.ModelSpec("sk", n, seed=seed))


def hopfield(n, m, seed):
    return coupling.build(coupling.ModelSpec("hopfield", n, seed=seed, patterns=m))


def cw(n):
    return coupling.build(coupling.ModelSpec("cw", n))


def brute_configs(n):
    """All configurations via itertools, in '+' < '-' lexicographic order."""
    return np.array(list(itertools.product([1, -1], repeat=n)), dtype=np.int8)


def brute_energy(a, tau):
    n = len(tau)
    return sum(a[i][j] * tau[i] * tau[j] for i in range(n) for j in range(i + 1, n))


def brute_gibbs(a, beta):
    """(configs, probabilities, H) by direct summation, no log-sum-exp."""
    configs = brute_configs(a.shape[0])
    h = np.array([brute_energy(a, t) for t in configs])
    w = np.exp(beta * (h - h.max()))
    return configs, w / w.sum(), h


def naive_score(a, tau, x):
    n = len(tau)
    total = 0.0
    for i in range(n):
        m = sum(a[i][j] * tau[j] for j in range(n))
        total += m * (tau[i] - np.tanh(x * m))
    return total / n


def grouped_grid_root(a, tau, step, x_max, x_min=0.0):
    """First grid point where the score is <= 0, grouping equal (m_i, tau_i) pairs."""
    m = a @ tau.astype(float)
    pairs, counts = np.unique(np.stack([m, tau]), axis=1, return_counts=True)
    xs = np.arange(x_min, x_max + step, step)
    vals = np.zeros_like(xs)
    for (mi, ti), c in zip(pairs.T, counts):
        vals += c * mi * (ti - np.tanh(xs * mi))
    hit = np.nonzero(vals / len(tau) <= 0.0)[0]
    return xs[hit[0]] if len(hit) else np.inf


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
