"""Gibbs measures P_beta(tau) = 2^-n exp(beta H(tau) - n psi(beta)).

Exact enumeration for small n, heat-bath Glauber sampling for large n, and
thermodynamic integration of psi from sampled energies.

Configurations are ``int8`` arrays of +-1.  Exhaustive tables order the 2^n
configurations lexicographically in their ``+``/``-`` string form, i.e. bit
(n-1-i) of the index is set exactly when tau_i = -1.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .coupling import as_array, operator_norm

MAX_EXACT_N = 22
BURNIN_SWEEPS = 1000
THIN_SWEEPS = 10


class SpinsFormatError(ValueError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


def check_spins(tau, n=None) -> np.ndarray:
    t = np.asarray(tau)
    if t.ndim != 1:
        raise ValueError("a configuration must be one-dimensional")
    if n is not None and t.shape[0] != n:
        raise ValueError(f"configuration has length {t.shape[0]}, coupling has n={n}")
    if not np.all((t == 1) | (t == -1)):
        raise ValueError("spins must be exactly -1 or +1")
    return t.astype(np.int8, copy=False)


def all_configs(n: int) -> np.ndarray:
    """All 2^n configurations as a (2^n, n) int8 array in table order."""
    if n > MAX_EXACT_N:
        raise ValueError(f"n={n} exceeds the enumeration cap {MAX_EXACT_N}")
    idx = np.arange(1 << n, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(n - 1, -1, -1, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int8)


def config_index(tau) -> int:
    k = 0
    for s in np.asarray(tau):
        k = (k << 1) | (1 if s < 0 else 0)
    return k


def config_from_index(k: int, n: int) -> np.ndarray:
    bits = (k >> np.arange(n - 1, -1, -1)) & 1
    return (1 - 2 * bits).astype(np.int8)


def hamiltonian(J, tau) -> float:
    """H(tau) = sum_{i<j} J_ij tau_i tau_j."""
    a = as_array(J)
    t = check_spins(tau, a.shape[0]).astype(np.float64)
    return float(t @ np.triu(a, 1) @ t)


def local_fields(J, tau) -> np.ndarray:
    """m_i(tau) = sum_j J_ij tau_j; independent of tau_i since J_ii = 0."""
    a = as_array(J)
    t = check_spins(tau, a.shape[0])
    return _kernels.local_fields_seq(a, t)


def flip_probability(J, tau, j: int, beta: float) -> float:
    """Heat-bath probability that site j flips: 1 / (1 + exp(2 beta tau_j m_j))."""
    a = as_array(J)
    t = check_spins(tau, a.shape[0])
    if not 0 <= j < a.shape[0]:
        raise IndexError(f"site {j} out of range for n={a.shape[0]}")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    m = float(a[j] @ t)
    return float(_kernels.flip_prob(beta, float(t[j]), m))


@dataclass
class ChainState:
    """Current configuration of one Glauber chain plus its generator.

    ``fields`` is kept in sync with ``spins`` incrementally.
    """

    spins: np.ndarray
    fields: np.ndarray
    rng: np.random.Generator
    steps: int = 0

    @classmethod
    def start(cls, J, seed, spins=None) -> "ChainState":
        a = as_array(J)
        rng = np.random.default_rng(seed)
        if spins is None:
            spins = (2 * rng.integers(0, 2, size=a.shape[0]) - 1).astype(np.int8)
        else:
            spins = check_spins(spins, a.shape[0]).copy()
        return cls(spins, _kernels.local_fields_seq(a, spins), rng)

    @property
    def sweeps(self) -> int:
        return self.steps // self.spins.shape[0]


def glauber_step(state: ChainState, J, beta: float) -> ChainState:
    """One random-scan heat-bath update (site uniform, then conditional draw)."""
    a = as_array(J)
    _kernels.heat_bath_steps(state.rng, a, float(beta), state.spins, state.fields, 1)
    state.steps += 1
    return state


def run_sweeps(state: ChainState, J, beta: float, sweeps: int) -> ChainState:
    a = as_array(J)
    n = a.shape[0]
    _kernels.heat_bath_steps(state.rng, a, float(beta), state.spins, state.fields, sweeps * n)
    state.steps += sweeps * n
    return state


@dataclass
class Samples:
    """Configurations drawn from one chain, one per row."""

    spins: np.ndarray
    beta: float
    seed: int | None
    mixing_uncertain: bool

    def __len__(self):
        return self.spins.shape[0]

    def __iter__(self):
        return iter(self.spins)


def sample(J, beta: float, burnin_sweeps: int = BURNIN_SWEEPS, n_samples: int = 1,
           thin_sweeps: int = THIN_SWEEPS, seed: int = 0, j_norm=None) -> Samples:
    """Draw thinned samples from a single heat-bath chain.

    The chain starts from a uniform random configuration drawn with the same
    generator.  Outputs are flagged ``mixing_uncertain`` when
    ``beta * ||J|| > 1``.
    """
    if burnin_sweeps < 0 or thin_sweeps < 1 or n_samples < 0:
        raise ValueError("need burnin_sweeps >= 0, thin_sweeps >= 1, n_samples >= 0")
    a = as_array(J)
    n = a.shape[0]
    if j_norm is None:
        j_norm = operator_norm(a)
    state = ChainState.start(a, seed)
    out = _kernels.run_chain(state.rng, a, float(beta), state.spins, state.fields,
                             burnin_sweeps * n, n_samples, thin_sweeps * n)
    return Samples(out, float(beta), seed, bool(beta * j_norm > 1.0))


def energy_trace(J, beta, burnin_sweeps=BURNIN_SWEEPS, n_samples=200,
                 thin_sweeps=THIN_SWEEPS, seed=0) -> np.ndarray:
    a = as_array(J)
    n = a.shape[0]
    state = ChainState.start(a, seed)
    return _kernels.chain_energy_trace(state.rng, a, float(beta), state.spins, state.fields,
                                       burnin_sweeps * n, n_samples, thin_sweeps * n)


def chain_histogram(J, beta, n_samples, burnin_sweeps=BURNIN_SWEEPS,
                    thin_sweeps=THIN_SWEEPS, seed=0) -> np.ndarray:
    """Visit counts over table-ordered configurations from one thinned chain."""
    a = as_array(J)
    n = a.shape[0]
    if n > MAX_EXACT_N:
        raise ValueError(f"n={n} exceeds the enumeration cap {MAX_EXACT_N}")
    state = ChainState.start(a, seed)
    return _kernels.histogram_chain(state.rng, a, float(beta), state.spins, state.fields,
                                    burnin_sweeps * n, n_samples, thin_sweeps * n)


def energy_table(J) -> np.ndarray:
    """H for all 2^n configurations via Gray-code incremental updates."""
    a = as_array(J)
    if a.shape[0] > MAX_EXACT_N:
        raise ValueError(f"n={a.shape[0]} exceeds the enumeration cap {MAX_EXACT_N}")
    return _kernels.gray_code_energies(np.ascontiguousarray(a))


@dataclass(frozen=True)
class ExactTable:
    """The Gibbs measure at one beta, enumerated over all 2^n states."""

    n: int
    beta: float
    h_values: np.ndarray = field(repr=False)
    log_weights: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)
    psi: float
    psi_prime: float
    psi_double_prime: float

    def at(self, beta: float) -> "ExactTable":
        """Reweight the stored energies to another inverse temperature."""
        return _table_from_energies(self.h_values, self.n, beta)

    def expect(self, values) -> float:
        return float(np.dot(self.probabilities, values))

    def marginal_means(self) -> np.ndarray:
        return self.probabilities @ all_configs(self.n).astype(np.float64)


def _table_from_energies(h, n, beta):
    beta = float(beta)
    if beta == 0.0:
        lw = np.zeros_like(h)
        p = np.full(h.shape, 2.0 ** -n)
        psi = 0.0
    else:
        lw = beta * h
        lz = logsumexp(lw)
        p = np.exp(lw - lz)
        psi = float((lz - n * math.log(2.0)) / n)
    mean_h = float(np.dot(p, h))
    var_h = float(np.dot(p, (h - mean_h) ** 2))
    return ExactTable(n, beta, h, lw, p, psi, mean_h / n, var_h / n)


def enumerate_exact(J, beta: float, h_values=None) -> ExactTable:
    """Exact table of P_beta; pass ``h_values`` to reuse an energy table."""
    a = as_array(J)
    n = a.shape[0]
    if n > MAX_EXACT_N:
        raise ValueError(f"n={n} exceeds the enumeration cap {MAX_EXACT_N}")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    h = energy_table(a) if h_values is None else np.asarray(h_values)
    return _table_from_energies(h, n, beta)


@dataclass
class ThermoEstimate:
    psi: float
    stderr: float
    nodes: np.ndarray = field(repr=False)
    means: np.ndarray = field(repr=False)
    stderrs: np.ndarray = field(repr=False)
    mixing_uncertain: bool = False


def _batch_means_se(x, n_batches=20):
    k = len(x) // n_batches
    if k < 1:
        return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    b = x[: k * n_batches].reshape(n_batches, k).mean(axis=1)
    return float(np.std(b, ddof=1) / math.sqrt(n_batches))


def psi_thermo(J, beta: float, n_grid_points: int = 21, burnin_sweeps: int = BURNIN_SWEEPS,
               n_samples: int = 200, thin_sweeps: int = THIN_SWEEPS, seed: int = 0,
               rule: str = "trapezoid") -> ThermoEstimate:
    """Estimate psi(beta) = int_0^beta E_u[H]/n du by quadrature over sampled energies.

    Each node runs its own chain seeded with ``mix_seed(seed, node)``.  The
    reported error is the quadrature of per-node batch-means standard errors,
    which treats node errors as perfectly correlated.
    """
    from .seeding import mix_seed

    if beta <= 0:
        raise ValueError("beta must be positive")
    a = as_array(J)
    n = a.shape[0]
    if rule == "trapezoid":
        if n_grid_points < 2:
            nodes = np.array([beta])
            weights = np.array([beta])
        else:
            nodes = np.linspace(0.0, beta, n_grid_points)
            weights = np.full(n_grid_points, beta / (n_grid_points - 1))
            weights[[0, -1]] *= 0.5
    elif rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(n_grid_points)
        nodes = 0.5 * beta * (x + 1.0)
        weights = 0.5 * beta * w
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    means = np.empty(len(nodes))
    ses = np.empty(len(nodes))
    for k, u in enumerate(nodes):
        tr = energy_trace(a, u, burnin_sweeps, n_samples, thin_sweeps, mix_seed(seed, k)) / n
        means[k] = tr.mean()
        ses[k] = _batch_means_se(tr)
    j_norm = operator_norm(a)
    return ThermoEstimate(float(weights @ means), float(weights @ ses), nodes, means, ses,
                          bool(beta * j_norm > 1.0))


def transition_matrix(J, beta: float) -> np.ndarray:
    """Dense one-step kernel of the random-scan heat-bath chain (n <= 12)."""
    a = as_array(J)
    n = a.shape[0]
    if n > 12:
        raise ValueError("transition matrix limited to n <= 12")
    configs = all_configs(n).astype(np.float64)
    fields = configs @ a
    z = 2.0 * beta * configs * fields
    pflip = 0.5 * (1.0 - np.tanh(0.5 * z))
    size = 1 << n
    P = np.zeros((size, size))
    rows = np.arange(size)
    for i in range(n):
        P[rows, rows ^ (1 << (n - 1 - i))] += pflip[:, i] / n
    P[rows, rows] += 1.0 - pflip.sum(axis=1) / n
    return P


def format_config(tau) -> str:
    return "".join("+" if s > 0 else "-" for s in tau)


def parse_config(line: str, lineno: int = 0) -> np.ndarray:
    bad = set(line) - {"+", "-"}
    if not line or bad:
        raise SpinsFormatError(lineno, f"expected a string of '+'/'-', found {line!r}")
    return np.array([1 if c == "+" else -1 for c in line], dtype=np.int8)


_HEADER = re.compile(r"^spins v1 n=(\d+) beta=(\S+) seed=(\S+)$")


def write_spins(path, configs, beta=None, seed=None) -> None:
    configs = np.atleast_2d(np.asarray(configs))
    n = configs.shape[1]
    b = "na" if beta is None else repr(float(beta))
    s = "na" if seed is None else str(int(seed))
    lines = [f"spins v1 n={n} beta={b} seed={s}"]
    lines.extend(format_config(t) for t in configs)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_spins(path):
    """Return ``(configs, meta)`` from a ``spins v1`` file."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines:
        raise SpinsFormatError(1, "empty file")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise SpinsFormatError(1, "expected 'spins v1 n=<N> beta=<beta> seed=<seed>'")
    n = int(m.group(1))
    meta = {
        "n": n,
        "beta": None if m.group(2) == "na" else float(m.group(2)),
        "seed": None if m.group(3) == "na" else int(m.group(3)),
    }
    configs = []
    for k, ln in enumerate(lines[1:], start=2):
        ln = ln.strip()
        if not ln:
            continue
        t = parse_config(ln, k)
        if len(t) != n:
            raise SpinsFormatError(k, f"configuration has length {len(t)}, header says n={n}")
        configs.append(t)
    return np.array(configs, dtype=np.int8).reshape(-1, n), meta
