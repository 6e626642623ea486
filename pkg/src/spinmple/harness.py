"""Seeded experiments and exact audits for the pseudolikelihood estimator.

Exact audits enumerate all 2^n configurations and contain no Monte Carlo
randomness.  Replica experiments derive one child seed per replica with
:func:`spinmple.seeding.mix_seed`, so their output does not depend on how
replicas are scheduled across workers.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import multiprocessing

import numpy as np
from scipy.special import gammaln, logsumexp

from . import bounds, gibbs
from .coupling import ModelSpec, as_array, build, normalize, operator_norm
from .estimator import (SCORE_TOL, Estimate, Status, mple_from_fields, sat_tanh,
                        score_from_fields, solve_score)
from .seeding import mix_seed

CSV_HEADER = ("model", "n", "beta_true", "replica", "seed", "beta_hat", "status",
              "score_at_true", "h_over_n", "sampler", "runtime_ms")
EXACT_SAMPLER_MAX_N = 20
PROBABILITY_AUDIT_MAX_N = 16


def fmt_float(x) -> str:
    """Shortest round-trip decimal; infinities as ``inf``/``-inf``."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def model_spec(family: str, n: int, seed: int = 0, patterns=None, pattern_ratio=None,
               bond: float = 1.0, path=None) -> ModelSpec:
    """ModelSpec with family parameters filled in for size ``n``."""
    side = None
    if family == "hopfield" and patterns is None:
        patterns = max(1, int(round((pattern_ratio or 0.25) * n)))
    if family == "lattice":
        side = math.isqrt(n)
    return ModelSpec(family, n, seed=seed, patterns=patterns, side=side, bond=bond, path=path)


# ---------------------------------------------------------------- replicas

@dataclass
class SamplerOptions:
    burnin_sweeps: int = gibbs.BURNIN_SWEEPS
    thin_sweeps: int = gibbs.THIN_SWEEPS
    exact_max_n: int = EXACT_SAMPLER_MAX_N


@dataclass
class SweepRecord:
    model: str
    n: int
    beta_true: float
    replica: int
    seed: int
    beta_hat: float
    status: str
    score_at_true: float
    h_over_n: float
    sampler: str
    mixing_uncertain: bool = False
    runtime_ms: float = 0.0

    def csv_row(self, timing: bool = False) -> list:
        return [self.model, str(self.n), fmt_float(self.beta_true), str(self.replica),
                str(self.seed), fmt_float(self.beta_hat), self.status,
                fmt_float(self.score_at_true), fmt_float(self.h_over_n), self.sampler,
                f"{self.runtime_ms:.3f}" if timing else ""]


def records_to_csv(records, timing: bool = False) -> str:
    """CSV text with the fixed header.  ``runtime_ms`` is left empty unless
    ``timing`` is set, which keeps bodies byte-stable across runs."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.csv_row(timing))
    return buf.getvalue()


@dataclass
class _ReplicaContext:
    model: str
    a: np.ndarray
    j_norm: float
    beta: float
    master_seed: int
    options: SamplerOptions
    cdf: np.ndarray | None


_CTX: _ReplicaContext | None = None


def _init_worker(ctx):
    global _CTX
    _CTX = ctx


def _draw_config(ctx: _ReplicaContext, seed: int):
    n = ctx.a.shape[0]
    if ctx.cdf is not None:
        rng = np.random.default_rng(seed)
        k = int(np.searchsorted(ctx.cdf, rng.random(), side="right"))
        return gibbs.config_from_index(min(k, len(ctx.cdf) - 1), n), False
    s = gibbs.sample(ctx.a, ctx.beta, ctx.options.burnin_sweeps, 1, ctx.options.thin_sweeps,
                     seed, j_norm=ctx.j_norm)
    return s.spins[0], s.mixing_uncertain


def _run_one(ctx: _ReplicaContext, r: int) -> SweepRecord:
    t0 = time.perf_counter()
    seed = mix_seed(ctx.master_seed, r)
    tau, uncertain = _draw_config(ctx, seed)
    m = gibbs.local_fields(ctx.a, tau)
    t = tau.astype(np.float64)
    est = mple_from_fields(m, t, ctx.j_norm)
    sampler = "exact" if ctx.cdf is not None else ("mcmc:mixing_uncertain" if uncertain else "mcmc")
    return SweepRecord(
        model=ctx.model, n=ctx.a.shape[0], beta_true=ctx.beta, replica=r, seed=seed,
        beta_hat=est.value, status=str(est.status),
        score_at_true=score_from_fields(m, t, ctx.beta),
        h_over_n=gibbs.hamiltonian(ctx.a, tau) / ctx.a.shape[0],
        sampler=sampler, mixing_uncertain=uncertain,
        runtime_ms=1e3 * (time.perf_counter() - t0))


def _run_chunk(indices):
    return [_run_one(_CTX, r) for r in indices]


def _chunks(seq, k):
    k = max(1, k)
    size = -(-len(seq) // k)
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def parallel_map(fn, items, jobs: int, initializer=None, initargs=()):
    """Order-preserving map over processes (spawned, to keep BLAS/numba state clean)."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(x) for x in items]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx, initializer=initializer,
                             initargs=initargs) as ex:
        return list(ex.map(fn, items))


def run_replicas(spec: ModelSpec, beta: float, M: int, master_seed: int,
                 sampler_options: SamplerOptions | None = None, jobs: int = 1,
                 J=None) -> list[SweepRecord]:
    """Draw M independent configurations from P_beta and estimate beta from each.

    Replica ``r`` uses only ``mix_seed(master_seed, r)``.  Configurations come
    from the exact table when ``n <= exact_max_n`` and from a fresh Glauber
    chain per replica otherwise.
    """
    if M < 1:
        raise ValueError("need at least one replica")
    opts = sampler_options or SamplerOptions()
    J = build(spec) if J is None else J
    a = as_array(J)
    cdf = None
    if a.shape[0] <= opts.exact_max_n:
        p = gibbs.enumerate_exact(a, beta).probabilities
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
    ctx = _ReplicaContext(spec.tag, a, operator_norm(a), float(beta), int(master_seed), opts, cdf)
    chunks = _chunks(list(range(M)), jobs * 4 if jobs > 1 else 1)
    out = parallel_map(_run_chunk, chunks, jobs, _init_worker, (ctx,))
    return [rec for chunk in out for rec in chunk]


def replay_record(J, rec: SweepRecord, sampler_options: SamplerOptions | None = None):
    """Recompute (score_at_true, h_over_n) for a record from its stored seed."""
    opts = sampler_options or SamplerOptions()
    a = as_array(J)
    cdf = None
    if rec.sampler == "exact":
        cdf = np.cumsum(gibbs.enumerate_exact(a, rec.beta_true).probabilities)
        cdf /= cdf[-1]
    ctx = _ReplicaContext(rec.model, a, operator_norm(a), rec.beta_true, 0, opts, cdf)
    tau, _ = _draw_config(ctx, rec.seed)
    m = gibbs.local_fields(a, tau)
    return (score_from_fields(m, tau.astype(np.float64), rec.beta_true),
            gibbs.hamiltonian(a, tau) / a.shape[0])


# ------------------------------------------------------------ exact audits

class StateSpace:
    """All configurations of a small system with local fields, H and MPLEs."""

    def __init__(self, J, max_n: int = PROBABILITY_AUDIT_MAX_N):
        a = as_array(J)
        n = a.shape[0]
        if n > max_n:
            raise ValueError(f"n={n} exceeds the exact-audit cap {max_n}")
        self.a = a
        self.n = n
        self.j_norm = operator_norm(a)
        self.configs = gibbs.all_configs(n).astype(np.float64)
        self.fields = self.configs @ a
        self.h = gibbs.energy_table(a)
        self._estimates = None

    def table(self, beta) -> gibbs.ExactTable:
        return gibbs.enumerate_exact(self.a, beta, h_values=self.h)

    def scores(self, x: float) -> np.ndarray:
        F = self.fields
        return np.mean(F * (self.configs - sat_tanh(x * F)), axis=1)

    def estimates(self, jobs: int = 1) -> np.ndarray:
        """MPLE for every configuration (cached).  Uses S_{-tau} == S_tau."""
        if self._estimates is None:
            half = 1 << (self.n - 1)
            idx = list(range(half))
            chunks = _chunks(idx, jobs * 4 if jobs > 1 else 1)
            payload = (self.fields, self.configs, self.j_norm)
            vals = parallel_map(_mple_chunk, [(payload, c) for c in chunks], jobs)
            first = np.concatenate(vals)
            # index of -tau is (2^n - 1) - index of tau
            self._estimates = np.concatenate([first, first[::-1]])
        return self._estimates


def _mple_chunk(arg):
    (F, T, j_norm), idx = arg
    return np.array([mple_from_fields(F[k], T[k], j_norm).value for k in idx])


def variance_audit(J, beta: float, mode: str = "exact", M: int = 10_000, seed: int | None = None,
                   sampler_options: SamplerOptions | None = None) -> bounds.BoundReport:
    """Compare E_beta[S_sigma(beta)^2] with the variance bound C/n.

    ``mode='exact'`` sums over all states (n <= 20); ``mode='mc'`` averages
    over M thinned Glauber samples and reports the standard error in
    ``inputs['stderr']``.
    """
    a = as_array(J)
    n = a.shape[0]
    j_norm = operator_norm(a)
    bound = bounds.lemma12_variance_bound(beta, j_norm, n)
    inputs = dict(beta=float(beta), j_norm=j_norm, n=n, mode=mode)
    if mode == "exact":
        ss = StateSpace(a, max_n=EXACT_SAMPLER_MAX_N)
        p = ss.table(beta).probabilities
        observed = float(np.dot(p, ss.scores(beta) ** 2))
    elif mode == "mc":
        if seed is None:
            raise ValueError("mc mode needs a seed")
        opts = sampler_options or SamplerOptions()
        smp = gibbs.sample(a, beta, opts.burnin_sweeps, M, opts.thin_sweeps, seed, j_norm)
        F = smp.spins.astype(np.float64) @ a
        s2 = np.mean(F * (smp.spins - sat_tanh(beta * F)), axis=1) ** 2
        observed = float(s2.mean())
        inputs["stderr"] = float(s2.std(ddof=1) / math.sqrt(M))
        inputs["mixing_uncertain"] = smp.mixing_uncertain
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return bounds.BoundReport("lemma12_variance", inputs, bound, observed)


def _prob_report(name, inputs, observed, bound):
    return bounds.BoundReport(name, inputs, float(bound), float(observed), vacuous=bool(bound > 1.0))


PROBABILITY_QUANTITIES = ("score_tail", "tanh_distance", "h_threshold", "lemma24", "lemma26",
                          "lemma22")


def probability_audit(J, beta: float, quantity: str, grid=(), state_space: StateSpace | None = None,
                      jobs: int = 1) -> list[bounds.BoundReport]:
    """Exact left-hand probabilities of the tail bounds versus their right-hand sides.

    quantity
        ``score_tail``  P{|S(beta)| > delta} <= C/(n delta^2), grid of delta.
        ``tanh_distance``  P{|tanh(C b_hat) - tanh(C beta)| > eps} <= K/(n eps^2),
        grid of eps in (0, 1).
        ``h_threshold``  P{H/n <= psi/(4 beta)} <= 8 beta^2/(n psi^3), on the
        unit-norm rescaling; grid ignored.
        ``lemma24``  P_beta{H/n <= c} <= psi''(b1)/(n (psi'(b1) - c)^2) with
        c = psi'(b1)/2, grid of b1 <= beta.
        ``lemma26``  tanh-distance with C1 versus C2/n + P{|S| > C3 eps}, unit
        norm, grid of eps.
        ``lemma22``  pointwise: for every tau with H/n >= c (unit norm), the
        tanh distance with scale 2/c is at most 8|S(beta)|/(3 c^5); grid of c.
        ``observed`` is the largest excess (must be <= 0).
    """
    if quantity not in PROBABILITY_QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}")
    ss = state_space if state_space is not None else StateSpace(J)
    n = ss.n
    tab = ss.table(beta)
    p = tab.probabilities
    psi = tab.psi
    base = dict(beta=float(beta), j_norm=ss.j_norm, psi=psi, n=n)
    out = []
    if quantity == "score_tail":
        s_abs = np.abs(ss.scores(beta))
        for d in grid:
            lhs = p[s_abs > d].sum()
            out.append(_prob_report("lemma12_tail", {**base, "delta": float(d)}, lhs,
                                    bounds.lemma12_tail_bound(beta, ss.j_norm, n, d)))
        return out
    if quantity == "lemma24":
        for b1 in grid:
            if not 0 < b1 <= beta:
                raise ValueError("lemma24 grid needs 0 < beta_1 <= beta")
            t1 = ss.table(b1)
            c = 0.5 * t1.psi_prime
            lhs = p[ss.h / n <= c].sum()
            out.append(_prob_report("lemma24", {**base, "beta_1": float(b1), "c": c}, lhs,
                                    bounds.lemma24_bound(t1.psi_prime, t1.psi_double_prime, c, n)))
        return out
    if beta <= 0:
        raise ValueError(f"{quantity} needs beta > 0")
    if quantity == "tanh_distance":
        C, K, gamma = bounds.theorem21_constants(beta, ss.j_norm, psi)
        bh = ss.estimates(jobs)
        dist = _tanh_dist_vec(C, bh, beta)
        for eps in grid:
            if not 0 < eps < 1:
                raise ValueError("eps must lie in (0, 1)")
            lhs = p[dist > eps].sum()
            out.append(_prob_report("theorem21", {**base, "eps": float(eps), "C": C, "K": K,
                                                  "gamma": gamma}, lhs, K / (n * eps**2)))
        return out
    # the remaining bounds assume ||J|| = 1
    s = ss.j_norm
    b1 = beta * s
    base_u = {**base, "beta_unit": b1}
    if quantity == "h_threshold":
        c, bnd = bounds.lemma25_bound(b1, psi, n)
        lhs = p[(ss.h / s) / n <= c].sum()
        return [_prob_report("lemma25", {**base_u, "c": c}, lhs, bnd)]
    if quantity == "lemma26":
        C1, C2, C3 = bounds.lemma26_constants(b1, psi)
        bh = ss.estimates(jobs) * s
        dist = _tanh_dist_vec(C1, bh, b1)
        s_abs = np.abs(ss.scores(beta)) / s
        for eps in grid:
            lhs = p[dist > eps].sum()
            rhs = C2 / n + p[s_abs > C3 * eps].sum()
            out.append(_prob_report("lemma26", {**base_u, "eps": float(eps), "C1": C1, "C2": C2,
                                                "C3": C3}, lhs, rhs))
        return out
    # lemma22
    bh = ss.estimates(jobs) * s
    s_abs = np.abs(ss.scores(beta)) / s
    hn = (ss.h / s) / n
    for c in grid:
        mask = hn >= c
        if not mask.any():
            excess = -math.inf
        else:
            dist = _tanh_dist_vec(2.0 / c, bh[mask], b1)
            excess = float(np.max(dist - bounds.lemma22_distance_bound(c, 1.0) * s_abs[mask]))
        rep = bounds.BoundReport("lemma22", {**base_u, "c": float(c), "states": int(mask.sum())},
                                 0.0, excess)
        out.append(rep)
    return out


def _tanh_dist_vec(C, bh, b):
    t = np.where(np.isinf(bh), 1.0, np.tanh(C * np.where(np.isinf(bh), 0.0, bh)))
    return np.abs(t - math.tanh(C * b))


@dataclass
class MonotonicityReport:
    name: str
    function: str
    betas: list
    values: list
    max_decrease: float
    nondecreasing: bool
    slack: float = 1e-12

    @property
    def satisfied(self) -> bool:
        return self.nondecreasing


TEST_FUNCTIONS = ("identity", "clipped", "indicator", "constant")


def make_test_function(kind: str, h_values, threshold=None):
    """Nondecreasing test functions of H.

    ``clipped`` clips H to its inter-quartile range; ``indicator`` is 1{H >= t}
    with t the median of H over states unless ``threshold`` is given.
    """
    h = np.asarray(h_values)
    if kind == "identity":
        return lambda x: x
    if kind == "clipped":
        lo, hi = np.quantile(h, [0.25, 0.75])
        return lambda x: np.clip(x, lo, hi)
    if kind == "indicator":
        t = float(np.median(h)) if threshold is None else float(threshold)
        return lambda x: (x >= t).astype(np.float64)
    if kind == "constant":
        return lambda x: np.ones_like(x)
    raise ValueError(f"unknown test function {kind!r}; choose from {TEST_FUNCTIONS}")


def monotonicity_audit(J, f: str = "identity", beta_grid=None, threshold=None,
                       slack: float = 1e-12, h_values=None) -> MonotonicityReport:
    """Exact E_beta f(H) on a beta grid; checks it never decreases by more than ``slack``."""
    a = as_array(J)
    if a.shape[0] > PROBABILITY_AUDIT_MAX_N:
        raise ValueError(f"n={a.shape[0]} exceeds the exact-audit cap {PROBABILITY_AUDIT_MAX_N}")
    if beta_grid is None:
        beta_grid = np.linspace(0.0, 3.0, 13)
    h = gibbs.energy_table(a) if h_values is None else h_values
    fh = make_test_function(f, h, threshold)(h)
    # shift by the minimum: exact for constant f, less cancellation otherwise
    f0 = float(fh.min())
    vals = [f0 + float(np.dot(gibbs.enumerate_exact(a, b, h_values=h).probabilities, fh - f0))
            for b in beta_grid]
    drops = np.diff(vals)
    max_dec = float(max(0.0, -drops.min())) if len(drops) else 0.0
    return MonotonicityReport("lemma23", f, [float(b) for b in beta_grid], vals, max_dec,
                              bool(max_dec <= slack), slack)


# --------------------------------------------------------- consistency sweep

@dataclass
class SweepSummaryRow:
    n: int
    j_norm: float
    replicas: int
    finite: int
    infinite: int
    median: float
    rmse: float
    sqrt_n_rmse: float
    mixing_uncertain: int


@dataclass
class SweepSummary:
    family: str
    beta: float
    rows: list
    ratio: float
    records: list = field(repr=False, default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "j_norm", "replicas", "finite", "infinite", "median", "rmse",
                    "sqrt_n_rmse", "mixing_uncertain"])
        for r in self.rows:
            w.writerow([r.n, fmt_float(r.j_norm), r.replicas, r.finite, r.infinite,
                        fmt_float(r.median), fmt_float(r.rmse), fmt_float(r.sqrt_n_rmse),
                        r.mixing_uncertain])
        return buf.getvalue()


def summarize(records, beta: float, j_norm: float) -> SweepSummaryRow:
    """Median over all replicas (infinite ones sort last); RMSE over finite ones."""
    vals = np.array([r.beta_hat for r in records])
    fin = vals[np.isfinite(vals)]
    n = records[0].n
    rmse = float(np.sqrt(np.mean((fin - beta) ** 2))) if len(fin) else math.inf
    return SweepSummaryRow(n, j_norm, len(vals), len(fin), len(vals) - len(fin),
                           float(np.median(vals)), rmse, math.sqrt(n) * rmse,
                           sum(r.mixing_uncertain for r in records))


def consistency_sweep(family: str, beta: float, n_grid, M: int, master_seed: int,
                      disorder_seed: int | None = None, sampler_options=None, jobs: int = 1,
                      **family_params) -> SweepSummary:
    """sqrt(n)-scaling check: RMSE of the MPLE over M replicas for each n.

    Size ``n`` uses disorder seed ``mix_seed(disorder_seed, n)`` and replica
    master seed ``mix_seed(master_seed, n)``.  ``ratio`` is
    max/min of sqrt(n) * RMSE over the grid.
    """
    disorder_seed = master_seed if disorder_seed is None else disorder_seed
    rows, records = [], []
    for n in n_grid:
        spec = model_spec(family, n, mix_seed(disorder_seed, n), **family_params)
        J = build(spec)
        recs = run_replicas(spec, beta, M, mix_seed(master_seed, n), sampler_options, jobs, J)
        rows.append(summarize(recs, beta, operator_norm(J)))
        records.extend(recs)
    scaled = [r.sqrt_n_rmse for r in rows if math.isfinite(r.sqrt_n_rmse)]
    ratio = max(scaled) / min(scaled) if scaled and min(scaled) > 0 else math.inf
    return SweepSummary(family, float(beta), rows, ratio, records)


# ------------------------------------------------------ Curie-Weiss example

CW_VARIANTS = ("mean_field", "self_term")


@dataclass
class CWDistribution:
    """Exact law of the MPLE in the Curie-Weiss model at one n.

    ``k`` is the number of + spins, ``prob`` its probability under P_beta.
    ``estimates['self_term']`` uses the zero-diagonal local fields
    m_i = m - tau_i/n (the MPLE of the actual coupling matrix);
    ``estimates['mean_field']`` uses m_i = m, i.e. J_ij = 1/n for every pair
    including i = j, for which S(x) = m (m - tanh(x m)).
    """

    n: int
    beta: float
    k: np.ndarray = field(repr=False)
    prob: np.ndarray = field(repr=False)
    estimates: dict = field(repr=False)
    statuses: dict = field(repr=False)

    def quantile(self, variant: str, q: float) -> float:
        v = self.estimates[variant]
        order = np.argsort(v, kind="stable")
        cum = np.cumsum(self.prob[order])
        i = int(np.searchsorted(cum, q * cum[-1], side="left"))
        return float(v[order][min(i, len(v) - 1)])

    def median(self, variant: str) -> float:
        return self.quantile(variant, 0.5)

    def median_abs_dev(self, variant: str, target: float = 1.0) -> float:
        d = np.abs(self.estimates[variant] - target)
        order = np.argsort(d, kind="stable")
        cum = np.cumsum(self.prob[order])
        i = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
        return float(d[order][min(i, len(d) - 1)])

    def prob_within(self, variant: str, radius: float = 0.2, target: float = 1.0) -> float:
        v = self.estimates[variant]
        return float(self.prob[np.abs(v - target) < radius].sum())

    def prob_infinite(self, variant: str) -> float:
        return float(self.prob[np.isinf(self.estimates[variant])].sum())

    def summary(self, variant: str) -> dict:
        return dict(n=self.n, beta=self.beta, variant=variant,
                    median=self.median(variant),
                    median_abs_dev=self.median_abs_dev(variant),
                    p_within_0_2=self.prob_within(variant),
                    p_infinite=self.prob_infinite(variant),
                    q05=self.quantile(variant, 0.05), q25=self.quantile(variant, 0.25),
                    q75=self.quantile(variant, 0.75), q95=self.quantile(variant, 0.95))


def cw_magnetization_law(n: int, beta: float):
    """P_beta{#plus = k} proportional to binom(n, k) exp(beta H_k), H_k = (s^2/n - 1)/2."""
    k = np.arange(n + 1)
    s = 2 * k - n
    h = 0.5 * (s.astype(np.float64) ** 2 / n - 1.0)
    lw = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) + beta * h
    return k, np.exp(lw - logsumexp(lw))


def cw_self_term_mple(n: int, k: int, score_tolerance: float = SCORE_TOL) -> Estimate:
    """MPLE for a Curie-Weiss configuration with k plus spins (zero diagonal)."""
    s = 2 * k - n
    mp, mm = (s - 1) / n, (s + 1) / n
    wp, wm = k / n, (n - k) / n

    def th(z):
        return math.copysign(1.0, z) if abs(z) > 20.0 else math.tanh(z)

    def f(x):
        return wp * mp * (1.0 - th(x * mp)) + wm * mm * (-1.0 - th(x * mm))

    def fp(x):
        return -(wp * mp * mp / math.cosh(min(abs(x * mp), 350.0)) ** 2
                 + wm * mm * mm / math.cosh(min(abs(x * mm), 350.0)) ** 2)

    s0 = wp * mp - wm * mm
    s_inf = wp * (mp - abs(mp)) + wm * (-mm - abs(mm))
    j_norm = (n - 1) / n
    return solve_score(f, fp, s0, s_inf, 1.0 / j_norm, score_tolerance, 1e6 / j_norm)


def cw_mean_field_mple(n: int, k: int, score_tolerance: float = SCORE_TOL) -> Estimate:
    """MPLE with every local field equal to the magnetization m = (2k - n)/n."""
    m = (2 * k - n) / n

    def th(z):
        return math.copysign(1.0, z) if abs(z) > 20.0 else math.tanh(z)

    def f(x):
        return m * (m - th(x * m))

    def fp(x):
        return -m * m / math.cosh(min(abs(x * m), 350.0)) ** 2

    return solve_score(f, fp, m * m, m * m - abs(m), 1.0, score_tolerance, 1e6)


def counterexample_cw(beta: float, n_grid, variants=CW_VARIANTS) -> list[CWDistribution]:
    """Exact distribution of the Curie-Weiss MPLE for each n, no sampling.

    Configurations with equal plus-count share the same score, and k and n - k
    give the same estimate, so each n costs about n/2 root solves per variant.
    """
    if not 0 <= beta < 1:
        raise ValueError("the Curie-Weiss counterexample needs 0 <= beta < 1")
    solvers = {"mean_field": cw_mean_field_mple, "self_term": cw_self_term_mple}
    out = []
    for n in n_grid:
        k, prob = cw_magnetization_law(n, beta)
        est, stat = {}, {}
        for v in variants:
            half = [solvers[v](n, kk) for kk in range(n // 2 + 1)]
            full = half + [half[n - kk] for kk in range(n // 2 + 1, n + 1)]
            est[v] = np.array([e.value for e in full])
            stat[v] = [str(e.status) for e in full]
        out.append(CWDistribution(n, float(beta), k, prob, est, stat))
    return out


def cw_to_csv(dists, variants=CW_VARIANTS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["n", "beta", "variant", "median", "median_abs_dev", "p_within_0_2", "p_infinite",
            "q05", "q25", "q75", "q95"]
    w.writerow(cols)
    for d in dists:
        for v in variants:
            s = d.summary(v)
            w.writerow([s["n"], fmt_float(s["beta"]), v] + [fmt_float(s[c]) for c in cols[3:]])
    return buf.getvalue()


# ----------------------------------------------------------- condition scan

@dataclass
class ConditionRow:
    n: int
    j_norm: float
    psi: float
    psi_stderr: float
    method: str


def condition_scan(family: str, beta: float, n_grid, disorder_seed: int = 0, seed: int = 0,
                   exact_max_n: int = EXACT_SAMPLER_MAX_N, thermo_options: dict | None = None,
                   thresholds: dict | None = None, **family_params):
    """Tabulate (n, ||J||, psi_n(beta)) and run the finite-n condition proxy."""
    rows = []
    for n in n_grid:
        J = build(model_spec(family, n, mix_seed(disorder_seed, n), **family_params))
        if n <= exact_max_n:
            rows.append(ConditionRow(n, operator_norm(J), gibbs.enumerate_exact(J, beta).psi,
                                     0.0, "exact"))
        else:
            th = gibbs.psi_thermo(J, beta, seed=mix_seed(seed, n), **(thermo_options or {}))
            rows.append(ConditionRow(n, operator_norm(J), th.psi, th.stderr, "thermo"))
    rep = bounds.check_conditions({r.n: r.j_norm for r in rows}, {r.n: r.psi for r in rows},
                                  **(thresholds or {}))
    return rows, rep


def conditions_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "j_norm", "psi", "psi_stderr", "method"])
    for r in rows:
        w.writerow([r.n, fmt_float(r.j_norm), fmt_float(r.psi), fmt_float(r.psi_stderr), r.method])
    return buf.getvalue()


def reports_to_csv(reports) -> str:
    """Flat CSV for BoundReports; inputs are packed as ``key=value`` pairs."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "inputs", "bound", "observed", "satisfied", "vacuous"])
    for r in reports:
        inputs = ";".join(f"{k}={fmt_float(v) if isinstance(v, float) else v}"
                          for k, v in r.inputs.items())
        w.writerow([r.name, inputs, fmt_float(r.bound),
                    "" if r.observed is None else fmt_float(r.observed),
                    "" if r.satisfied is None else str(r.satisfied).lower(),
                    str(r.vacuous).lower()])
    return buf.getvalue()

