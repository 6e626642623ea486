import math

import numpy as np
import pytest

from spinmple import coupling, gibbs

from conftest import brute_configs, brute_energy, brute_gibbs, cw, sk


def test_hamiltonian_examples():
    assert gibbs.hamiltonian(cw(3), [1, 1, -1]) == pytest.approx(-1 / 3)
    j = 0.37
    J = coupling.CouplingMatrix([[0, j], [j, 0]])
    assert gibbs.hamiltonian(J, [1, -1]) == pytest.approx(-j)


@pytest.mark.parametrize("n", range(2, 13))
def test_curie_weiss_energy_identity(n, rng):
    J = cw(n)
    for _ in range(5):
        tau = rng.choice([-1, 1], size=n)
        m = tau.sum() / n
        direct = brute_energy(J.entries, tau)
        assert gibbs.hamiltonian(J, tau) == pytest.approx(direct, abs=1e-12)
        assert direct == pytest.approx((n * m * m - 1) / 2, abs=1e-12)


def test_energy_equals_half_field_sum(rng):
    J = sk(15, 4)
    for _ in range(20):
        tau = rng.choice([-1, 1], size=15)
        m = gibbs.local_fields(J, tau)
        assert gibbs.hamiltonian(J, tau) == pytest.approx(0.5 * m @ tau, abs=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        gibbs.hamiltonian(cw(3), [1, 1])
    with pytest.raises(ValueError):
        gibbs.local_fields(cw(3), [1, 0, 1])


def test_local_fields_examples():
    np.testing.assert_allclose(gibbs.local_fields(cw(3), [1, 1, -1]), [0, 0, 2 / 3], atol=1e-15)


def test_local_field_flip_update(rng):
    J = sk(12, 8)
    a = J.entries
    tau = rng.choice([-1, 1], size=12).astype(np.int8)
    m = gibbs.local_fields(J, tau)
    for j in range(12):
        t2 = tau.copy()
        t2[j] = -t2[j]
        m2 = gibbs.local_fields(J, t2)
        for i in range(12):
            if i != j:
                assert m2[i] - m[i] == pytest.approx(2 * a[i, j] * t2[j], abs=1e-14)
        assert m2[j] == m[j]


def test_field_norm_bound(rng):
    J = sk(10, 21)
    nrm = coupling.operator_norm(J)
    for _ in range(50):
        m = gibbs.local_fields(J, rng.choice([-1, 1], size=10))
        assert m @ m <= nrm**2 * 10 * (1 + 1e-12)


def test_flip_probability_examples():
    J = sk(6, 1)
    tau = [1, -1, 1, 1, -1, 1]
    for j in range(6):
        assert gibbs.flip_probability(J, tau, j, 0.0) == 0.5
    # site 0 of a 3-site CW config (+, +, -) has zero field
    assert gibbs.flip_probability(cw(3), [1, 1, -1], 0, 4.0) == 0.5
    J2 = coupling.CouplingMatrix([[0, 1.0], [1.0, 0]])
    p = gibbs.flip_probability(J2, [1, 1], 0, 1.0)
    assert p == pytest.approx(1 / (1 + math.e**2), rel=1e-14)
    # conditional from the 4-state table: P(s0 = - | s1 = +)
    configs, probs, _ = brute_gibbs(J2.entries, 1.0)
    cond = probs[(configs[:, 0] == -1) & (configs[:, 1] == 1)].sum() / probs[configs[:, 1] == 1].sum()
    assert p == pytest.approx(cond, rel=1e-12)
    assert p == pytest.approx(0.11920, abs=1e-5)
    with pytest.raises(IndexError):
        gibbs.flip_probability(J2, [1, 1], 2, 1.0)


def test_flip_probability_extreme_arguments():
    J2 = coupling.CouplingMatrix([[0, 1.0], [1.0, 0]])
    for beta in (350.0, 699.0, 1e4):
        p_aligned = gibbs.flip_probability(J2, [1, 1], 0, beta)
        p_anti = gibbs.flip_probability(J2, [1, -1], 0, beta)
        assert 0.0 <= p_aligned < 1e-300 or p_aligned == 0.0
        assert p_anti == 1.0
        assert math.isfinite(p_aligned)


def test_glauber_step_matches_batched_kernel():
    J = sk(9, 5)
    s1 = gibbs.ChainState.start(J, seed=77)
    s2 = gibbs.ChainState.start(J, seed=77)
    for _ in range(500):
        gibbs.glauber_step(s1, J, 0.8)
    gibbs.run_sweeps(s2, J, 0.8, 500 // 9)
    for _ in range(500 - 9 * (500 // 9)):
        gibbs.glauber_step(s2, J, 0.8)
    assert np.array_equal(s1.spins, s2.spins)
    np.testing.assert_allclose(s1.fields, gibbs.local_fields(J, s1.spins), atol=1e-12)
    assert s1.steps == 500 and s1.sweeps == 500 // 9


def test_beta_zero_chain_is_uniform():
    J = sk(8, 2)
    smp = gibbs.sample(J, 0.0, burnin_sweeps=10, n_samples=125_000, thin_sweeps=1, seed=3)
    # 125k samples * 8 steps = 1e6 single-site steps
    assert np.all(np.abs(smp.spins.mean(axis=0)) < 0.01)


@pytest.mark.parametrize("n", [4, 7, 10])
def test_one_step_stationarity(n):
    J = sk(n, 100 + n)
    for beta in (0.3, 1.0, 2.5):
        p = gibbs.enumerate_exact(J, beta).probabilities
        P = gibbs.transition_matrix(J, beta)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-14)
        assert np.max(np.abs(p @ P - p)) <= 1e-12
        # detailed balance
        flow = p[:, None] * P
        assert np.max(np.abs(flow - flow.T)) <= 1e-12


def test_sample_determinism_and_flags():
    J = sk(20, 1)
    a = gibbs.sample(J, 0.5, 50, 30, 2, seed=9)
    b = gibbs.sample(J, 0.5, 50, 30, 2, seed=9)
    assert np.array_equal(a.spins, b.spins)
    assert a.spins.shape == (30, 20)
    assert not a.mixing_uncertain
    assert gibbs.sample(J, 3.0, 1, 1, 1, seed=9).mixing_uncertain
    with pytest.raises(ValueError):
        gibbs.sample(J, 0.5, 10, 5, 0, seed=1)


def test_sample_frequencies_match_exact_table():
    J = sk(8, 31)
    N = 100_000
    counts = gibbs.chain_histogram(J, 0.5, N, seed=5)
    p = gibbs.enumerate_exact(J, 0.5).probabilities
    z = (counts / N - p) / np.sqrt(p * (1 - p) / N)
    # 256 cells: allow the binomial tail a Bonferroni margin
    assert np.mean(np.abs(z) > 3) <= 0.01
    assert np.max(np.abs(z)) < 4.5


def test_beta_zero_energy_is_zero_on_average():
    J = cw(100)
    h = gibbs.energy_trace(J, 0.0, burnin_sweeps=10, n_samples=4000, thin_sweeps=1, seed=2)
    assert abs(h.mean() / 100) < 0.01


def test_energy_table_matches_brute_force():
    for n in (2, 5, 9):
        J = sk(n, n)
        h = gibbs.energy_table(J)
        brute = np.array([brute_energy(J.entries, t) for t in brute_configs(n)])
        np.testing.assert_allclose(h, brute, atol=1e-12)
    assert np.array_equal(gibbs.all_configs(4), brute_configs(4))
    for k in (0, 5, 15):
        assert gibbs.config_index(gibbs.config_from_index(k, 4)) == k


@pytest.mark.parametrize("j", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_two_site_psi(j, beta):
    # sum over 4 states: 2^-2 (2 e^{bj} + 2 e^{-bj}) = cosh(bj); psi = log(.)/2
    J = coupling.CouplingMatrix([[0, j], [j, 0]])
    t = gibbs.enumerate_exact(J, beta)
    assert t.psi == pytest.approx(0.5 * math.log(math.cosh(beta * j)), rel=1e-13)


def test_beta_zero_table():
    t = gibbs.enumerate_exact(sk(7, 3), 0.0)
    assert t.psi == 0.0
    assert np.all(t.probabilities == 2.0**-7)


def test_table_against_brute_force():
    J = sk(8, 17)
    configs, p, h = brute_gibbs(J.entries, 1.3)
    t = gibbs.enumerate_exact(J, 1.3)
    np.testing.assert_allclose(t.probabilities, p, atol=1e-14)
    assert abs(t.probabilities.sum() - 1) <= 1e-12
    assert t.psi_prime == pytest.approx(p @ h / 8, abs=1e-10)
    assert t.psi_double_prime == pytest.approx((p @ h**2 - (p @ h) ** 2) / 8, abs=1e-10)


def test_psi_derivatives_by_finite_differences():
    J = sk(9, 4)
    h = gibbs.energy_table(J)
    b, d = 0.8, 1e-5
    t = gibbs.enumerate_exact(J, b, h)
    lo, hi = t.at(b - d), t.at(b + d)
    assert (hi.psi - lo.psi) / (2 * d) == pytest.approx(t.psi_prime, rel=1e-7)
    assert (hi.psi_prime - lo.psi_prime) / (2 * d) == pytest.approx(t.psi_double_prime, rel=1e-6)


def test_enumeration_cap():
    with pytest.raises(ValueError):
        gibbs.enumerate_exact(sk(23, 1), 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_exact_table_invariants(seed):
    J = sk(8, seed)
    nrm = coupling.operator_norm(J)
    Jn, s = coupling.normalize(J)
    h, hn = gibbs.energy_table(J), gibbs.energy_table(Jn)
    betas = np.linspace(0, 4, 17)
    psis = []
    for b in betas:
        t = gibbs.enumerate_exact(J, b, h)
        assert np.max(np.abs(t.marginal_means())) <= 1e-12
        assert t.psi <= b * nrm + 1e-12
        assert t.psi_double_prime >= 0
        assert gibbs.enumerate_exact(Jn, b, hn).psi_prime <= 0.5
        psis.append(t.psi)
    assert psis[0] == 0 and np.all(np.diff(psis) >= 0)


def test_global_flip_symmetry():
    J = sk(10, 2)
    h = gibbs.energy_table(J)
    np.testing.assert_allclose(h, h[::-1], atol=1e-12)


def test_conditional_mean_identity():
    J = sk(8, 44)
    beta = 1.7
    t = gibbs.enumerate_exact(J, beta)
    configs = gibbs.all_configs(8)
    p = t.probabilities
    for i in range(8):
        bit = 1 << (7 - i)
        for k in range(256):
            if k & bit:
                continue
            k_minus = k | bit
            cond = (p[k] - p[k_minus]) / (p[k] + p[k_minus])
            m = gibbs.local_fields(J, configs[k])[i]
            assert cond == pytest.approx(math.tanh(beta * m), abs=1e-12)


def test_psi_thermo_matches_exact():
    J = sk(10, 6)
    est = gibbs.psi_thermo(J, 1.0, n_grid_points=21, burnin_sweeps=200, n_samples=2000,
                           thin_sweeps=2, seed=11)
    exact = gibbs.enumerate_exact(J, 1.0).psi
    assert abs(est.psi - exact) <= 3 * est.stderr
    assert est.stderr > 0


def test_psi_thermo_tiny_beta():
    est = gibbs.psi_thermo(sk(50, 1), 1e-4, n_grid_points=1, burnin_sweeps=10, n_samples=100,
                           seed=1)
    assert abs(est.psi) < 1e-3


def test_spins_file_round_trip(tmp_path):
    configs = gibbs.sample(sk(12, 1), 0.4, 5, 7, 1, seed=2).spins
    p = tmp_path / "s.spins"
    gibbs.write_spins(p, configs, 0.4, 2)
    back, meta = gibbs.read_spins(p)
    assert np.array_equal(back, configs)
    assert meta == {"n": 12, "beta": 0.4, "seed": 2}
    assert p.read_text().splitlines()[0] == "spins v1 n=12 beta=0.4 seed=2"


@pytest.mark.parametrize("body, line", [
    ("spins v2 n=3 beta=na seed=na\n+++\n", 1),
    ("spins v1 n=3 beta=na seed=na\n+++\n+x+\n", 3),
    ("spins v1 n=3 beta=na seed=na\n++\n", 2),
])
def test_spins_file_errors(tmp_path, body, line):
    p = tmp_path / "bad.spins"
    p.write_text(body)
    with pytest.raises(gibbs.SpinsFormatError) as info:
        gibbs.read_spins(p)
    assert info.value.lineno == line
