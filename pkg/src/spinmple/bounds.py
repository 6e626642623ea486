"""Explicit constants and finite-sample bounds for the pseudolikelihood estimator.

Everything here is closed-form arithmetic.  Unless noted, bounds that assume a
unit-norm coupling matrix must be fed ``beta * ||J||`` for ``beta``; psi is the
same number before and after that rescaling because the measure is unchanged.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class BoundReport:
    """One audited inequality ``observed <= bound``.

    ``vacuous`` marks probability bounds above 1; they are reported unclamped.
    """

    name: str
    inputs: dict
    bound: float
    observed: float | None = None
    satisfied: bool | None = None
    vacuous: bool = False

    def __post_init__(self):
        if self.observed is not None and self.satisfied is None:
            self.satisfied = bool(self.observed <= self.bound)

    def to_dict(self) -> dict:
        return asdict(self)


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v}")


def lemma12_constant(beta: float, j_norm: float) -> float:
    """C = 6||J||^2 + 6 beta ||J||^3 + 2 beta^2 ||J||^4."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    _positive(j_norm=j_norm)
    return 6 * j_norm**2 + 6 * beta * j_norm**3 + 2 * beta**2 * j_norm**4


def lemma12_variance_bound(beta, j_norm, n) -> float:
    """Upper bound C/n on E_beta[S_sigma(beta)^2]."""
    return lemma12_constant(beta, j_norm) / n


def lemma12_tail_bound(beta, j_norm, n, delta) -> float:
    """Chebyshev tail C/(n delta^2) for P{|S_sigma(beta)| > delta}."""
    _positive(delta=delta)
    return lemma12_constant(beta, j_norm) / (n * delta**2)


def theorem21_constants(beta: float, j_norm: float, psi: float):
    """Return ``(C, K, gamma)`` for the tanh-distance tail bound K/(n eps^2).

    gamma = max(beta ||J||, 1), C = 8 beta ||J||^2 / psi and
    K = 8 gamma^2 / psi^3 + 2^30 gamma^12 / (9 psi^10).  ``psi`` is
    psi(beta) of the model whose couplings are ``J``.
    """
    _positive(beta=beta, j_norm=j_norm, psi=psi)
    gamma = max(beta * j_norm, 1.0)
    C = 8 * beta * j_norm**2 / psi
    K = 8 * gamma**2 / psi**3 + 2.0**30 * gamma**12 / (9 * psi**10)
    return C, K, gamma


def lemma26_constants(beta: float, psi: float):
    """(C1, C2, C3) = (8b/psi, 8b^2/psi^3, 3 psi^5 / (2^13 b^5)); unit-norm J."""
    _positive(beta=beta, psi=psi)
    return 8 * beta / psi, 8 * beta**2 / psi**3, 3 * psi**5 / (2.0**13 * beta**5)


def lemma25_bound(beta: float, psi: float, n: int):
    """Threshold psi/(4 beta) on H/n and its probability bound 8 beta^2/(n psi^3)."""
    _positive(beta=beta, psi=psi, n=n)
    return psi / (4 * beta), 8 * beta**2 / (n * psi**3)


def lemma24_bound(psi_prime: float, psi_double_prime: float, c: float, n: int) -> float:
    """psi''(b1) / (n (psi'(b1) - c)^2), valid for c < psi'(b1)."""
    if not c < psi_prime:
        raise ValueError("need c < psi'(beta_1)")
    return psi_double_prime / (n * (psi_prime - c) ** 2)


def lemma22_distance_bound(c: float, score_abs: float) -> float:
    """8 |S| / (3 c^5): bound on |tanh(2 beta_hat / c) - tanh(2 beta / c)|."""
    _positive(c=c)
    if score_abs < 0:
        raise ValueError("score_abs must be nonnegative")
    return 8 * score_abs / (3 * c**5)


def tanh_distance(C: float, a: float, b: float) -> float:
    """|tanh(C a) - tanh(C b)| with tanh(+inf) = 1."""
    _positive(C=C)
    ta = 1.0 if math.isinf(a) else math.tanh(C * a)
    tb = 1.0 if math.isinf(b) else math.tanh(C * b)
    return abs(ta - tb)


@dataclass
class ConditionReport:
    """Finite-n proxy for the two consistency conditions (not a proof).

    Condition (a): the largest norm over the upper half of the n grid stays
    below ``norm_ceiling`` and norms do not grow like a power of n.
    Condition (b): the smallest psi over the upper half stays above
    ``psi_floor`` and psi does not decay like a power of n.
    """

    ns: list
    sup_norm: float
    min_psi: float
    norm_slope: float
    psi_slope: float
    condition_a: bool
    condition_b: bool
    thresholds: dict = field(default_factory=dict)
    label: str = "finite-n proxy"


def _loglog_slope(ns, vals):
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.maximum(np.asarray(vals, dtype=float), 1e-300))
    return float(np.polyfit(x, y, 1)[0])


def check_conditions(norm_by_n: dict, psi_by_n: dict, norm_ceiling: float = math.inf,
                     psi_floor: float = 1e-3, max_norm_slope: float = 0.25,
                     min_psi_slope: float = -0.5) -> ConditionReport:
    if not norm_by_n or not psi_by_n:
        raise ValueError("empty input")
    ns = sorted(set(norm_by_n) & set(psi_by_n))
    if len(ns) < 3:
        raise ValueError("need at least 3 values of n present in both maps")
    upper = ns[len(ns) // 2:]
    sup_norm = max(norm_by_n[k] for k in upper)
    min_psi = min(psi_by_n[k] for k in upper)
    ns_slope = _loglog_slope(ns, [norm_by_n[k] for k in ns])
    ps_slope = _loglog_slope(ns, [psi_by_n[k] for k in ns])
    return ConditionReport(
        ns=ns,
        sup_norm=sup_norm,
        min_psi=min_psi,
        norm_slope=ns_slope,
        psi_slope=ps_slope,
        condition_a=bool(sup_norm <= norm_ceiling and ns_slope <= max_norm_slope),
        condition_b=bool(min_psi >= psi_floor and ps_slope >= min_psi_slope),
        thresholds=dict(norm_ceiling=norm_ceiling, psi_floor=psi_floor,
                        max_norm_slope=max_norm_slope, min_psi_slope=min_psi_slope),
    )
