import math

import numpy as np
import pytest

from spinmple import bounds, coupling, estimator, gibbs, harness
from spinmple.seeding import mix_seed

from conftest import cw, grouped_grid_root, sk


def test_mix_seed_reference_values():
    # SplitMix64 finalizer of master ^ r * golden, recomputed by hand
    def ref(master, r):
        z = (master ^ (r * 0x9E3779B97F4A7C15)) & (2**64 - 1)
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & (2**64 - 1)
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & (2**64 - 1)
        return z ^ (z >> 31)
    for m, r in [(0, 0), (0, 1), (3, 7), (2**63 + 5, 12345)]:
        assert mix_seed(m, r) == ref(m, r)
    assert len({mix_seed(1, r) for r in range(1000)}) == 1000


@pytest.mark.parametrize("n", [10, 30])
def test_replicas_schedule_independent(n):
    spec = harness.model_spec("sk", n, seed=4)
    opts = harness.SamplerOptions(burnin_sweeps=50, thin_sweeps=2)
    a = harness.run_replicas(spec, 0.5, 24, 99, opts, jobs=1)
    b = harness.run_replicas(spec, 0.5, 24, 99, opts, jobs=8)
    assert harness.records_to_csv(a) == harness.records_to_csv(b)
    assert [r.replica for r in a] == list(range(24))
    assert a[0].sampler == ("exact" if n <= 20 else "mcmc")


def test_exact_path_energy_mean():
    spec = harness.model_spec("sk", 12, seed=8)
    J = coupling.build(spec)
    recs = harness.run_replicas(spec, 0.7, 10_000, 2024)
    h = np.array([r.h_over_n for r in recs])
    target = gibbs.enumerate_exact(J, 0.7).psi_prime
    assert abs(h.mean() - target) <= 3 * h.std(ddof=1) / math.sqrt(len(h))


def test_records_replay_and_invariants():
    for n, beta in [(12, 0.6), (40, 0.3)]:
        spec = harness.model_spec("sk", n, seed=1)
        J = coupling.build(spec)
        opts = harness.SamplerOptions(burnin_sweeps=30, thin_sweeps=1)
        for rec in harness.run_replicas(spec, beta, 6, 17, opts):
            s, h = harness.replay_record(J, rec, opts)
            assert s == pytest.approx(rec.score_at_true, abs=1e-12)
            assert h == pytest.approx(rec.h_over_n, abs=1e-12)
            assert not math.isfinite(rec.beta_hat) or rec.beta_hat >= 0


def test_beta_zero_replicas():
    # at beta = 0 the sign of H is a fair coin, so about half the estimates are finite
    spec = harness.model_spec("sk", 12, seed=1)
    J = coupling.build(spec)
    recs = harness.run_replicas(spec, 0.0, 2000, 5)
    finite = np.mean([math.isfinite(r.beta_hat) for r in recs])
    assert 0.4 <= finite <= 0.6
    s0 = np.median([abs(r.score_at_true) for r in recs])
    assert s0 <= math.sqrt(bounds.lemma12_constant(0.0, coupling.operator_norm(J)) / 12)


def test_csv_header_and_inf_token():
    spec = harness.model_spec("cw", 2)
    recs = harness.run_replicas(spec, 0.5, 4, 1)
    text = harness.records_to_csv(recs)
    lines = text.splitlines()
    assert lines[0] == ("model,n,beta_true,replica,seed,beta_hat,status,score_at_true,"
                        "h_over_n,sampler,runtime_ms")
    assert all(line.split(",")[5] == "inf" for line in lines[1:])
    assert all(line.endswith(",") for line in lines[1:])
    timed = harness.records_to_csv(recs, timing=True).splitlines()
    assert not timed[1].endswith(",")


@pytest.mark.parametrize("beta", [0.2, 0.5, 1, 2, 5])
def test_variance_audit_exact(beta):
    rep = harness.variance_audit(sk(10, 3), beta)
    assert rep.satisfied is True
    assert rep.bound == pytest.approx(bounds.lemma12_constant(beta, rep.inputs["j_norm"]) / 10)


def test_variance_audit_beta_zero_formula():
    J = sk(10, 3)
    h = gibbs.energy_table(J)
    direct = 4 / 100 * np.mean(h**2)
    assert harness.variance_audit(J, 0.0).observed == pytest.approx(direct, abs=1e-12)


def test_variance_audit_mc_matches_exact():
    J = sk(10, 3)
    exact = harness.variance_audit(J, 0.5).observed
    mc = harness.variance_audit(J, 0.5, mode="mc", M=10_000, seed=3,
                                sampler_options=harness.SamplerOptions(100, 2))
    assert abs(mc.observed - exact) <= 4 * mc.inputs["stderr"]
    with pytest.raises(ValueError):
        harness.variance_audit(J, 0.5, mode="mc")
    with pytest.raises(ValueError):
        harness.variance_audit(sk(21, 1), 0.5)


def test_state_space_estimates_match_direct():
    J = sk(8, 5)
    ss = harness.StateSpace(J)
    est = ss.estimates()
    configs = gibbs.all_configs(8)
    for k in range(256):
        assert est[k] == estimator.mple(J, configs[k]).value
    assert np.array_equal(harness.StateSpace(J).estimates(jobs=4), est)


def test_lemma25_curie_weiss():
    (rep,) = harness.probability_audit(cw(12), 1.0, "h_threshold")
    assert rep.satisfied and rep.name == "lemma25"


def test_theorem21_sk():
    reps = harness.probability_audit(sk(10, 2), 1.0, "tanh_distance", grid=(0.1, 0.3, 0.5))
    assert len(reps) == 3 and all(r.satisfied for r in reps)
    assert all(r.vacuous for r in reps)


def test_score_tail_empty_event():
    J = sk(10, 2)
    ss = harness.StateSpace(J)
    top = np.abs(ss.scores(1.0)).max()
    (rep,) = harness.probability_audit(J, 1.0, "score_tail", grid=(top * 1.01,), state_space=ss)
    assert rep.observed == 0.0 and rep.satisfied


@pytest.mark.parametrize("quantity, grid", [
    ("score_tail", (0.05, 0.2, 0.5)),
    ("lemma24", (0.25, 0.5, 1.0)),
    ("lemma26", (0.1, 0.5, 0.9)),
    ("lemma22", (0.05, 0.1, 0.2, 0.4)),
])
@pytest.mark.parametrize("which", ["sk", "cw"])
def test_other_exact_audits(quantity, grid, which):
    J = sk(10, 7) if which == "sk" else cw(10)
    reps = harness.probability_audit(J, 1.0, quantity, grid=grid)
    assert len(reps) == len(grid)
    assert all(r.satisfied for r in reps)


def test_probability_audit_guards():
    with pytest.raises(ValueError):
        harness.probability_audit(sk(17, 1), 1.0, "score_tail", grid=(0.1,))
    with pytest.raises(ValueError):
        harness.probability_audit(sk(6, 1), 1.0, "nope")
    with pytest.raises(ValueError):
        harness.probability_audit(sk(6, 1), 1.0, "tanh_distance", grid=(1.5,))


@pytest.mark.parametrize("f", ["identity", "clipped", "indicator"])
def test_monotonicity(f):
    rep = harness.monotonicity_audit(sk(10, 9), f, np.linspace(0, 3, 7))
    assert rep.satisfied and len(rep.values) == 7


def test_monotonicity_constant():
    rep = harness.monotonicity_audit(sk(10, 9), "constant")
    assert len(set(rep.values)) == 1 and rep.max_decrease == 0.0


def test_degenerate_two_site_sweep():
    s = harness.consistency_sweep("sk", 0.5, [2], 20, master_seed=1)
    row = s.rows[0]
    assert row.infinite == 20 and row.finite == 0
    assert row.median == math.inf and row.rmse == math.inf
    assert "inf" in s.to_csv()


def test_small_sweep_median_near_truth():
    opts = harness.SamplerOptions(burnin_sweeps=200, thin_sweeps=1)
    s = harness.consistency_sweep("sk", 0.4, [64, 128], 30, master_seed=5, sampler_options=opts,
                                  jobs=4)
    last = s.rows[-1]
    assert last.finite >= 25
    assert abs(last.median - 0.4) <= 3 * last.rmse / math.sqrt(30)
    again = harness.consistency_sweep("sk", 0.4, [64, 128], 30, master_seed=5,
                                      sampler_options=opts, jobs=1)
    assert again.to_csv() == s.to_csv()
    assert harness.records_to_csv(again.records) == harness.records_to_csv(s.records)


def test_summarize_rules():
    recs = [harness.SweepRecord("m", 4, 1.0, i, 0, v, "", 0.0, 0.0, "exact")
            for i, v in enumerate([0.5, 1.5, math.inf, math.inf, 1.0])]
    row = harness.summarize(recs, 1.0, 1.0)
    assert (row.finite, row.infinite) == (3, 2)
    assert row.median == 1.5
    assert row.rmse == pytest.approx(math.sqrt(0.5 / 3))
    assert row.sqrt_n_rmse == pytest.approx(2 * row.rmse)


# ---------------------------------------------------------------- Curie-Weiss

def test_cw_law_matches_table():
    n, beta = 10, 0.5
    k, prob = harness.cw_magnetization_law(n, beta)
    p = gibbs.enumerate_exact(cw(n), beta).probabilities
    plus = (gibbs.all_configs(n) == 1).sum(axis=1)
    np.testing.assert_allclose(prob, [p[plus == kk].sum() for kk in k], atol=1e-14)


@pytest.mark.parametrize("n", [10, 101, 1000])
def test_cw_self_term_matches_generic_mple(n):
    J = cw(n)
    for k in sorted({0, 1, n // 3, n // 2, n // 2 + 1, (2 * n) // 3, n - 1, n}):
        tau = np.array([1] * k + [-1] * (n - k))
        a = harness.cw_self_term_mple(n, k)
        b = estimator.mple(J, tau)
        assert a.status == b.status
        if a.is_finite:
            assert a.value == pytest.approx(b.value, abs=1e-8)


def test_cw_self_term_grid_oracle():
    n = 1000
    J = cw(n)
    for k in (550, 600, 800):
        tau = np.array([1] * k + [-1] * (n - k))
        grid = grouped_grid_root(J.entries, tau, 1e-6, 3.0)
        assert abs(harness.cw_self_term_mple(n, k).value - grid) <= 1e-6


def test_cw_mean_field_closed_form():
    # S(x) = m (m - tanh(x m)) vanishes at atanh(|m|)/|m|
    n = 1000
    for k in (0, 300, 499, 501, 700, 1000):
        m = (2 * k - n) / n
        e = harness.cw_mean_field_mple(n, k)
        if abs(m) == 1:
            assert e.value == math.inf
        else:
            assert e.value == pytest.approx(math.atanh(abs(m)) / abs(m), rel=1e-10)
    assert harness.cw_mean_field_mple(n, 500).status is estimator.Status.AT_ZERO


def test_counterexample_self_term_limit():
    # zero-diagonal CW: beta_hat -> 1 - 1/z^2 when z^2 > 1, else infinite;
    # z = sqrt(n) m is asymptotically N(0, 1/(1 - beta))
    (d,) = harness.counterexample_cw(0.5, [10_000], variants=("self_term",))
    from scipy.stats import norm
    p_inf = 2 * norm.cdf(1 / math.sqrt(2)) - 1
    assert d.prob_infinite("self_term") == pytest.approx(p_inf, abs=0.01)


def test_counterexample_rejects_high_temperature_violation():
    for b in (1.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            harness.counterexample_cw(b, [100])


def test_counterexample_is_deterministic():
    a = harness.cw_to_csv(harness.counterexample_cw(0.5, [100, 200]))
    assert a == harness.cw_to_csv(harness.counterexample_cw(0.5, [100, 200]))
    assert a.splitlines()[0].startswith("n,beta,variant,median")


# ------------------------------------------------------------ condition scan

def test_condition_scan_curie_weiss():
    rows, rep = harness.condition_scan("cw", 0.5, [8, 12, 16, 20])
    psi = [r.psi for r in rows]
    assert all(x > y for x, y in zip(psi, psi[1:]))
    assert not rep.condition_b and rep.condition_a
    text = harness.conditions_to_csv(rows)
    assert text.splitlines()[0] == "n,j_norm,psi,psi_stderr,method"


def test_condition_scan_sk_low_temperature():
    rows, rep = harness.condition_scan("sk", 2.0, [8, 12, 16, 20], disorder_seed=1)
    assert min(r.psi for r in rows) >= 0.25 and rep.condition_b


def test_condition_scan_hopfield_norms():
    rows, rep = harness.condition_scan("hopfield", 1.0, [8, 12, 16, 20], disorder_seed=1)
    assert max(r.j_norm for r in rows) < 2 and rep.condition_a
