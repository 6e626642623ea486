"""Compiled inner loops.  Callers validate shapes; nothing here checks."""
import math

import numba
import numpy as np


@numba.njit(cache=True)
def gray_code_energies(a):
    """H(tau) for every configuration, indexed so that bit (n-1-i) set <=> tau_i = -1."""
    n = a.shape[0]
    tau = np.ones(n)
    fields = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += a[i, j]
        fields[i] = s
    h = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            h += a[i, j]
    out = np.empty(1 << n)
    out[0] = h
    g = 0
    for k in range(1, 1 << n):
        b = 0
        while not (k >> b) & 1:
            b += 1
        g ^= 1 << b
        i = n - 1 - b
        h -= 2.0 * tau[i] * fields[i]
        tau[i] = -tau[i]
        t2 = 2.0 * tau[i]
        for l in range(n):
            fields[l] += t2 * a[i, l]
        out[g] = h
    return out


@numba.njit(cache=True)
def local_fields_seq(a, spins):
    n = a.shape[0]
    out = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += a[i, j] * spins[j]
        out[i] = s
    return out


@numba.njit(cache=True)
def flip_prob(beta, s, m):
    z = 2.0 * beta * s * m
    if z > 700.0:
        return math.exp(-z)
    return 1.0 / (1.0 + math.exp(z))


@numba.njit(cache=True)
def heat_bath_steps(rng, a, beta, spins, fields, n_steps):
    """Random-scan heat-bath updates in place; returns the number of flips.

    Per step the stream is consumed as rng.integers(0, n) then rng.random().
    Field updates read row j of the symmetric matrix (contiguous).
    """
    n = spins.shape[0]
    flips = 0
    for _ in range(n_steps):
        j = rng.integers(0, n)
        u = rng.random()
        s = spins[j]
        if u < flip_prob(beta, s, fields[j]):
            spins[j] = -s
            d = -2.0 * s
            for l in range(n):
                fields[l] += d * a[j, l]
            flips += 1
    return flips


@numba.njit(cache=True)
def run_chain(rng, a, beta, spins, fields, burnin_steps, n_samples, thin_steps):
    n = spins.shape[0]
    out = np.empty((n_samples, n), dtype=np.int8)
    heat_bath_steps(rng, a, beta, spins, fields, burnin_steps)
    for k in range(n_samples):
        heat_bath_steps(rng, a, beta, spins, fields, thin_steps)
        for i in range(n):
            out[k, i] = spins[i]
    return out


@numba.njit(cache=True)
def chain_energy_trace(rng, a, beta, spins, fields, burnin_steps, n_samples, thin_steps):
    """H(sigma) recorded every ``thin_steps`` after burn-in."""
    n = spins.shape[0]
    out = np.empty(n_samples)
    heat_bath_steps(rng, a, beta, spins, fields, burnin_steps)
    for k in range(n_samples):
        heat_bath_steps(rng, a, beta, spins, fields, thin_steps)
        h = 0.0
        for i in range(n):
            h += fields[i] * spins[i]
        out[k] = 0.5 * h
    return out


@numba.njit(cache=True)
def histogram_chain(rng, a, beta, spins, fields, burnin_steps, n_samples, thin_steps):
    """Visit counts of configuration indices (same indexing as gray_code_energies)."""
    n = spins.shape[0]
    counts = np.zeros(1 << n, dtype=np.int64)
    heat_bath_steps(rng, a, beta, spins, fields, burnin_steps)
    for _ in range(n_samples):
        heat_bath_steps(rng, a, beta, spins, fields, thin_steps)
        idx = 0
        for i in range(n):
            idx = (idx << 1) | (1 if spins[i] < 0 else 0)
        counts[idx] += 1
    return counts
