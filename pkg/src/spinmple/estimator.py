"""Maximum pseudolikelihood estimation of the inverse temperature.

The normalized score

    S_tau(x) = (1/n) sum_i m_i(tau) (tau_i - tanh(x m_i(tau)))

is continuous and nonincreasing on [0, inf], with S_tau(0) = 2 H(tau) / n and
S_tau(inf) = (1/n) sum_i (m_i tau_i - |m_i|) <= 0.  The estimate is the
smallest nonnegative root, or +inf when the root set is empty.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .coupling import ZeroCouplingError, as_array, operator_norm
from .gibbs import check_spins, local_fields

SCORE_TOL = 1e-10
X_CAP_FACTOR = 1e6
TANH_SATURATION = 20.0


class Status(str, enum.Enum):
    ROOT_FOUND = "root_found"
    AT_ZERO = "at_zero"
    INFINITE_NO_CROSSING = "infinite_no_crossing"
    INFINITE_NEGATIVE_AT_ZERO = "infinite_negative_at_zero"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Estimate:
    value: float
    status: Status
    score_at_root: float
    bracket: tuple = (0.0, 0.0)
    iterations: int = 0
    diagnostic: str = ""

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def __str__(self):
        v = "inf" if not self.is_finite else f"{self.value:.12g}"
        return f"{v} ({self.status})"


def sat_tanh(z):
    """tanh with |z| > 20 mapped to exactly +-1."""
    z = np.asarray(z, dtype=np.float64)
    return np.where(np.abs(z) > TANH_SATURATION, np.sign(z), np.tanh(z))


def _prepare(J, tau):
    a = as_array(J)
    t = check_spins(tau, a.shape[0])
    return local_fields(a, t), t.astype(np.float64)


def score_from_fields(m, t, x: float) -> float:
    return float(np.mean(m * (t - sat_tanh(x * m))))


def score_derivative_from_fields(m, x: float) -> float:
    return float(-np.mean(m * m / np.cosh(np.minimum(np.abs(x * m), 350.0)) ** 2))


def score_at_infinity_from_fields(m, t) -> float:
    return float(np.mean(m * t - np.abs(m)))


def score(J, tau, x: float) -> float:
    """Normalized pseudolikelihood score S_tau(x), x >= 0."""
    if not (x >= 0 and math.isfinite(x)):
        raise ValueError("score needs a finite x >= 0")
    m, t = _prepare(J, tau)
    return score_from_fields(m, t, x)


def score_at_infinity(J, tau) -> float:
    m, t = _prepare(J, tau)
    return score_at_infinity_from_fields(m, t)


def score_derivative(J, tau, x: float) -> float:
    """S'_tau(x) = -(1/n) sum_i m_i^2 / cosh^2(x m_i), always <= 0."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    m, _ = _prepare(J, tau)
    return score_derivative_from_fields(m, x)


def smallest_root(f, scale: float, x_cap: float, fprime=None):
    """Smallest root of a continuous nonincreasing ``f`` with ``f(0) > 0``.

    Brackets by doubling from ``[0, scale]`` (clipped at ``x_cap``), bisects until
    ``hi - lo <= 1e-12 * max(1, hi)``, then tries one Newton step inside the
    bracket.  Returns ``(x, f(x), (lo, hi), iterations)`` or ``None`` if no
    sign change occurs below ``x_cap``.
    """
    lo, hi = 0.0, min(scale, x_cap)
    f_hi = f(hi)
    it = 0
    while f_hi > 0.0:
        if hi >= x_cap:
            return None
        lo = hi
        hi = min(2.0 * hi, x_cap)
        it += 1
        f_hi = f(hi)
    f_lo = f(lo) if lo > 0.0 else None
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        it += 1
        if f_mid > 0.0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    x, fx = hi, f_hi
    if f_lo is not None and abs(f_lo) < abs(fx):
        x, fx = lo, f_lo
    if fprime is not None and fx != 0.0:
        d = fprime(x)
        if d < 0.0:
            x_new = x - fx / d
            if lo <= x_new <= hi:
                f_new = f(x_new)
                if abs(f_new) < abs(fx):
                    x, fx = x_new, f_new
    return x, fx, (lo, hi), it


def solve_score(f, fprime, s0: float, s_inf: float, scale: float,
                score_tolerance: float = SCORE_TOL, x_cap: float = math.inf) -> Estimate:
    """Classify a monotone score by its end values, then find its smallest root.

    ``f``/``fprime`` evaluate the score and its derivative, ``s0 = f(0)`` and
    ``s_inf`` is the limit at infinity.  Shared by every MPLE path so that all
    of them use one decision procedure.
    """
    if s0 < -score_tolerance:
        return Estimate(math.inf, Status.INFINITE_NEGATIVE_AT_ZERO, s0)
    if abs(s0) <= score_tolerance:
        return Estimate(0.0, Status.AT_ZERO, s0)
    if s_inf >= -score_tolerance:
        return Estimate(math.inf, Status.INFINITE_NO_CROSSING, s_inf)
    res = smallest_root(f, scale, x_cap, fprime)
    if res is None:
        return Estimate(math.inf, Status.INFINITE_NO_CROSSING, s_inf,
                        diagnostic=f"no sign change below x_cap={x_cap:g}")
    x, fx, bracket, it = res
    return Estimate(x, Status.ROOT_FOUND, fx, bracket, it)


def mple_from_fields(m, t, j_norm: float, score_tolerance: float = SCORE_TOL,
                     x_cap: float | None = None) -> Estimate:
    """MPLE given precomputed local fields ``m`` and spins ``t`` (as floats)."""
    if j_norm <= 0:
        raise ZeroCouplingError("MPLE needs a nonzero coupling matrix")
    if x_cap is None:
        x_cap = X_CAP_FACTOR / j_norm
    return solve_score(lambda x: score_from_fields(m, t, x),
                       lambda x: score_derivative_from_fields(m, x),
                       score_from_fields(m, t, 0.0),
                       score_at_infinity_from_fields(m, t),
                       1.0 / j_norm, score_tolerance, x_cap)


def mple(J, tau, score_tolerance: float = SCORE_TOL, x_cap: float | None = None,
         j_norm: float | None = None) -> Estimate:
    """Maximum pseudolikelihood estimate of beta from one configuration.

    Parameters
    ----------
    J : CouplingMatrix or array
        Couplings; must be nonzero.
    tau : array of +-1
        Observed configuration.
    score_tolerance : float
        Band around zero used to classify S(0) and S(inf).
    x_cap : float, optional
        Largest bracket end tried; defaults to ``1e6 / ||J||``.
    j_norm : float, optional
        Precomputed ``||J||`` (it only sets the bracket scale and the cap).

    Returns
    -------
    Estimate
        ``value`` is ``math.inf`` when the root set is empty.
    """
    a = as_array(J)
    if not np.any(a):
        raise ZeroCouplingError("MPLE needs a nonzero coupling matrix")
    if j_norm is None:
        j_norm = operator_norm(a)
    m, t = _prepare(a, tau)
    return mple_from_fields(m, t, j_norm, score_tolerance, x_cap)

