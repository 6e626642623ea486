"""Interaction matrices for quadratic exponential families on {-1, +1}^N.

Generators for the Sherrington-Kirkpatrick, Hopfield, Curie-Weiss and
periodic square-lattice couplings, the spectral norm, normalization, and the
``jmat v1`` text format.

All random disorder is drawn from ``numpy.random.Generator(PCG64(seed))``;
Gaussian couplings use numpy's ziggurat ``standard_normal``.  A seed therefore
pins a disorder realization for as long as numpy keeps those streams stable.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FAMILIES = ("sk", "hopfield", "cw", "lattice", "custom")

_NORM_TOL = 1e-10
_NORM_MAXITER = 10_000
_RESTART_SEED = 0x5EED


class ZeroCouplingError(ValueError):
    """Raised when a coupling matrix has no nonzero entry."""


class JmatParseError(ValueError):
    """Base class for ``jmat v1`` parse failures.  ``lineno`` is 1-based."""

    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class MalformedHeaderError(JmatParseError):
    pass


class IndexRangeError(JmatParseError):
    pass


class DuplicateEntryError(JmatParseError):
    pass


class DiagonalEntryError(JmatParseError):
    pass


class MalformedEntryError(JmatParseError):
    pass


class CouplingMatrix:
    """Symmetric coupling matrix with zero diagonal.

    The entries are held as a read-only dense ``float64`` array.  Construction
    checks exact symmetry, an exactly zero diagonal and at least one nonzero
    entry.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"coupling matrix must be square, got shape {a.shape}")
        if a.shape[0] < 2:
            raise ValueError("coupling matrix needs n >= 2")
        if not np.all(np.isfinite(a)):
            raise ValueError("coupling matrix has non-finite entries")
        if not np.array_equal(a, a.T):
            raise ValueError("coupling matrix is not symmetric")
        if np.any(np.diag(a) != 0.0):
            raise ValueError("coupling matrix has a nonzero diagonal")
        if not np.any(a):
            raise ZeroCouplingError("coupling matrix is identically zero")
        a.setflags(write=False)
        self._entries = a

    @classmethod
    def from_upper(cls, n, values):
        """Build from the strict upper triangle in row-major order."""
        a = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        a[iu] = values
        a[(iu[1], iu[0])] = values
        return cls(a)

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def n(self) -> int:
        return self._entries.shape[0]

    def upper(self) -> np.ndarray:
        return self._entries[np.triu_indices(self.n, 1)]

    def scaled(self, c: float) -> "CouplingMatrix":
        return CouplingMatrix(self._entries * c)

    def __eq__(self, other):
        if not isinstance(other, CouplingMatrix):
            return NotImplemented
        return np.array_equal(self._entries, other._entries)

    def __hash__(self):
        return hash(self._entries.tobytes())

    def __repr__(self):
        return f"CouplingMatrix(n={self.n})"


def as_array(J) -> np.ndarray:
    """Dense float array view of a ``CouplingMatrix`` or array-like."""
    if isinstance(J, CouplingMatrix):
        return J.entries
    return np.asarray(J, dtype=np.float64)


@dataclass(frozen=True)
class ModelSpec:
    """Model family, size, family parameters and disorder seed.

    ``patterns`` is the Hopfield pattern count M, ``side``/``bond`` describe
    the periodic L x L lattice (n must equal L**2), ``path`` names a jmat file
    for the ``custom`` family.
    """

    family: str
    n: int
    seed: int = 0
    patterns: int | None = None
    side: int | None = None
    bond: float = 1.0
    path: str | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family != "custom" and self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.family == "hopfield" and (self.patterns is None or self.patterns < 1):
            raise ValueError("hopfield requires patterns >= 1")
        if self.family == "lattice":
            if self.side is None or self.side < 2 or self.side * self.side != self.n:
                raise ValueError("lattice requires side L >= 2 with n == L**2")
        if self.family == "custom" and not self.path:
            raise ValueError("custom requires a matrix file path")

    @property
    def tag(self) -> str:
        """Compact comma-free identifier used in CSV output."""
        if self.family == "hopfield":
            return f"hopfield:M={self.patterns}"
        if self.family == "lattice":
            return f"lattice:L={self.side}:b={self.bond!r}"
        if self.family == "custom":
            return f"custom:{Path(self.path).name}"
        return self.family


def sk_couplings(n: int, seed: int) -> CouplingMatrix:
    """J_ij = g_ij / sqrt(n) with g_ij iid standard normal over i < j."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(n * (n - 1) // 2)
    return CouplingMatrix.from_upper(n, g / math.sqrt(n))


def hopfield_couplings(eta) -> CouplingMatrix:
    """Hebbian couplings (1/n) sum_k eta_ik eta_jk with the diagonal zeroed.

    ``eta`` has shape (n, M) with +-1 entries.
    """
    eta = np.asarray(eta, dtype=np.float64)
    if eta.ndim == 1:
        eta = eta[:, None]
    n = eta.shape[0]
    a = (eta @ eta.T) / n
    np.fill_diagonal(a, 0.0)
    # matmul is symmetric up to rounding only
    a = np.triu(a, 1)
    return CouplingMatrix(a + a.T)


def hopfield_patterns(n: int, m: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return 2 * rng.integers(0, 2, size=(n, m), dtype=np.int8) - 1


def curie_weiss_couplings(n: int) -> CouplingMatrix:
    a = np.full((n, n), 1.0 / n)
    np.fill_diagonal(a, 0.0)
    return CouplingMatrix(a)


def lattice_couplings(side: int, bond: float = 1.0) -> CouplingMatrix:
    """Nearest-neighbour couplings on a periodic side x side square lattice."""
    n = side * side
    a = np.zeros((n, n))
    for r in range(side):
        for c in range(side):
            i = r * side + c
            for j in (r * side + (c + 1) % side, ((r + 1) % side) * side + c):
                if j != i:
                    a[i, j] = a[j, i] = bond
    return CouplingMatrix(a)


def build(spec: ModelSpec) -> CouplingMatrix:
    """Construct the coupling matrix described by ``spec``.

    Identical specs give bit-identical matrices.
    """
    if spec.family == "sk":
        return sk_couplings(spec.n, spec.seed)
    if spec.family == "hopfield":
        return hopfield_couplings(hopfield_patterns(spec.n, spec.patterns, spec.seed))
    if spec.family == "cw":
        return curie_weiss_couplings(spec.n)
    if spec.family == "lattice":
        return lattice_couplings(spec.side, spec.bond)
    J = read_matrix(spec.path)
    if J.n != spec.n:
        raise ValueError(f"{spec.path} holds n={J.n}, spec says n={spec.n}")
    return J


def _power_norm(a, v, tol, maxiter):
    # iterate on J^2 through ||J v||, which also converges when +lam and -lam
    # are both extremal
    est = 0.0
    for it in range(1, maxiter + 1):
        w = a @ v
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0, it
        v = w / new
        if abs(new - est) <= tol * new:
            return new, it
        est = new
    return est, maxiter


def operator_norm(J, tol: float = _NORM_TOL, maxiter: int = _NORM_MAXITER) -> float:
    """Spectral norm (largest absolute eigenvalue) of a symmetric matrix.

    Power iteration from the normalized all-ones vector, stopping when the
    estimate changes by less than ``tol`` relatively.  If the start vector is
    (numerically) an eigenvector already, it may not belong to the top of the
    spectrum, so a second run from a seeded random vector is made and the
    larger estimate kept.
    """
    a = as_array(J)
    n = a.shape[0]
    v = np.full(n, 1.0 / math.sqrt(n))
    est, iters = _power_norm(a, v, tol, maxiter)
    if iters <= 3:
        rng = np.random.default_rng(_RESTART_SEED)
        r = rng.standard_normal(n)
        est2, _ = _power_norm(a, r / np.linalg.norm(r), tol, maxiter)
        # a genuine top eigenvector is reproduced up to tol
        if est2 > est * (1.0 + 10 * tol):
            est = est2
    return est


def normalize(J: CouplingMatrix, tol: float = _NORM_TOL):
    """Return ``(J / ||J||, ||J||)``; inputs already at unit norm pass through."""
    if not isinstance(J, CouplingMatrix):
        J = CouplingMatrix(J)
    s = operator_norm(J, tol)
    if s == 0.0:
        raise ZeroCouplingError("cannot normalize a zero matrix")
    if abs(s - 1.0) <= 10 * tol:
        return J, 1.0
    return CouplingMatrix(J.entries / s), s


def write_matrix(J: CouplingMatrix, path) -> None:
    """Write ``J`` in ``jmat v1`` format, nonzero upper entries only."""
    a = as_array(J)
    n = a.shape[0]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"jmat 1\nn {n}\n")
        for i in range(n - 1):
            row = a[i, i + 1:]
            cols = np.nonzero(row)[0]
            if len(cols):
                fh.write("".join(f"{i} {j} {v:.17g}\n"
                                 for j, v in zip((cols + i + 1).tolist(), row[cols].tolist())))


_ENTRY_DTYPE = np.dtype([("i", np.int64), ("j", np.int64), ("v", np.float64)])
_BLOCK_LINES = 1 << 18


def _parse_entry(k, ln, n, seen):
    """Strict single-line parse; raises the error for line ``k`` or returns (i, j, v)."""
    parts = ln.split()
    if len(parts) != 3:
        raise MalformedEntryError(k, f"expected '<i> <j> <value>', got {ln!r}")
    try:
        i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
    except ValueError:
        raise MalformedEntryError(k, f"cannot parse {ln!r}") from None
    if not math.isfinite(v):
        raise MalformedEntryError(k, "value is not finite")
    if i == j and 0 <= i < n:
        if v != 0.0:
            raise DiagonalEntryError(k, f"nonzero diagonal entry ({i},{j})")
        return None
    if not (0 <= i < j < n):
        raise IndexRangeError(k, f"pair ({i},{j}) violates 0 <= i < j < {n}")
    if seen[i, j]:
        raise DuplicateEntryError(k, f"duplicate pair ({i},{j})")
    seen[i, j] = True
    return i, j, v


def _block_entries(block, n, seen):
    """Vectorized parse of ``[(lineno, text), ...]``; None if any line needs the strict path."""
    try:
        with warnings.catch_warnings():
            # numpy truncates "1.5" to an int with only a deprecation warning
            warnings.simplefilter("error", DeprecationWarning)
            rec = np.loadtxt([ln for _, ln in block], dtype=_ENTRY_DTYPE, comments=None, ndmin=1)
    except (ValueError, DeprecationWarning):
        return None
    i, j, v = rec["i"], rec["j"], rec["v"]
    if len(rec) != len(block) or not np.all(np.isfinite(v)):
        return None
    diag = i == j
    if np.any(diag & (v != 0.0)):
        return None
    i, j, v = i[~diag], j[~diag], v[~diag]
    if np.any((i < 0) | (i >= j) | (j >= n)):
        return None
    key = i * n + j
    if len(np.unique(key)) != len(key) or np.any(seen[i, j]):
        return None
    seen[i, j] = True
    return i, j, v


def read_matrix(path) -> CouplingMatrix:
    """Parse a ``jmat v1`` file.

    Raises a ``JmatParseError`` subclass naming the offending line, or
    ``ZeroCouplingError`` if no nonzero entry is present.  Entries are parsed
    in large blocks; a block with any problem is re-read line by line so the
    error names the first bad line.
    """
    with open(path, encoding="utf-8") as fh:
        body = ((k, ln) for k, ln in ((k + 1, raw.strip()) for k, raw in enumerate(fh))
                if ln and not ln.startswith("#"))
        first = next(body, None)
        if first is None or first[1].split() != ["jmat", "1"]:
            raise MalformedHeaderError(first[0] if first else 1, "expected 'jmat 1'")
        second = next(body, None)
        if second is None:
            raise MalformedHeaderError(first[0] + 1, "expected 'n <N>'")
        k, ln = second
        parts = ln.split()
        if len(parts) != 2 or parts[0] != "n" or not parts[1].isdigit():
            raise MalformedHeaderError(k, f"expected 'n <N>', got {ln!r}")
        n = int(parts[1])
        if n < 2:
            raise MalformedHeaderError(k, "n must be at least 2")
        a = np.zeros((n, n))
        seen = np.zeros((n, n), dtype=bool)
        while True:
            block = list(itertools.islice(body, _BLOCK_LINES))
            if not block:
                break
            res = _block_entries(block, n, seen)
            if res is None:
                # strict path; a rejected block has marked nothing in ``seen``
                for k, ln in block:
                    e = _parse_entry(k, ln, n, seen)
                    if e is not None:
                        a[e[0], e[1]] = a[e[1], e[0]] = e[2]
                continue
            i, j, v = res
            a[i, j] = v
            a[j, i] = v
    if not np.any(a):
        raise ZeroCouplingError(f"{path}: no nonzero couplings")
    return CouplingMatrix(a)
