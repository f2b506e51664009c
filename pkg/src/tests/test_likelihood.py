import math

import numpy as np
import pytest
from scipy import integrate
from scipy import stats as st

from nominator.graph import TABLE1_RED
from nominator.graph.models import FullColoring, ModelParams, VertexStats
from nominator.likelihood import (
    IDENTITY_TOL,
    MARGINAL_TOL,
    NORMALIZATION_TOL,
    Family,
    InvalidConfigError,
    LikelihoodTables,
    Pmf,
    PriorConfig,
    binom_log_pmf,
    cdf_p1_given,
    cdf_p2_given,
    cdf_q2_given,
    conditional_s_pmf,
    convolve,
    f1_log,
    f1_s_marginal,
    f2_log,
    f2_s_marginal,
    fprime_log,
    fprime_s_marginal,
    log_likelihood,
    log_posterior_kernel,
    log_prior_pq,
    prior_p_marginal,
    prior_psi_density,
    prior_q2_marginal,
    sample_p1_given,
    sample_p2_given,
    sample_params_from_prior,
    sample_q2_given,
)


def _random_settings(count: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(5, 31))
        m_prime = int(rng.integers(2, min(5, n - 2) + 1))
        m = int(rng.integers(m_prime + 1, n + 1))
        yield sample_params_from_prior(rng), n, m_prime, m


def test_binomial_log_mass_matches_scipy():
    k = np.arange(-2, 13)
    expected = st.binom.logpmf(k, 10, 0.3)
    assert np.allclose(binom_log_pmf(k, 10, 0.3), expected, equal_nan=False)
    assert binom_log_pmf(11, 10, 0.3) == -math.inf
    assert binom_log_pmf(0, 4, 0.0) == 0.0
    with pytest.raises(ValueError):
        binom_log_pmf(1, 3, 1.5)


def test_convolution_of_binomials_with_equal_p():
    combined = convolve(Pmf.binomial(7, 0.35), Pmf.binomial(5, 0.35))
    expected = Pmf.binomial(12, 0.35).probabilities()
    assert np.allclose(combined.probabilities(), expected, atol=1e-14)
    assert combined.total() == pytest.approx(1.0, abs=1e-12)
    assert Pmf.point_mass(3).log_pmf(3) == 0.0
    assert Pmf.point_mass(3).log_pmf(2) == -math.inf


def test_joint_mass_functions_are_normalized():
    for params, n, m_prime, m in _random_settings(100):
        tables = LikelihoodTables(params, n, m_prime)
        for family in Family:
            total = np.exp(tables.joint(family, m)).sum()
            assert total == pytest.approx(1.0, abs=NORMALIZATION_TOL), (family, n, m_prime, m)


def test_content_marginals_follow_from_the_joint():
    for params, n, m_prime, m in _random_settings(100, seed=1):
        tables = LikelihoodTables(params, n, m_prime)
        for family, marginal in [
            (Family.GREEN, f1_s_marginal(params, n)),
            (Family.LATENT_RED, f2_s_marginal(m, params, n)),
            (Family.OBSERVED_RED, fprime_s_marginal(m, params, n)),
        ]:
            from_joint = np.exp(tables.joint(family, m)).sum(axis=0)
            expected = np.exp(marginal.log_table(n))
            assert np.allclose(from_joint, expected, atol=MARGINAL_TOL, rtol=0.0), family


def test_vertex_mass_functions_agree_with_tables(table1_stats):
    params = ModelParams(0.25, 0.15, 0.25)
    tables = LikelihoodTables(params, 12, 2)
    for t in table1_stats.latent():
        assert f1_log(t, params, 12, 2) == pytest.approx(tables.joint(Family.GREEN)[t.r, t.s])
        assert f2_log(t, 5, params, 12, 2) == pytest.approx(
            tables.joint(Family.LATENT_RED, 5)[t.r, t.s]
        )
    for t in table1_stats.observed():
        assert fprime_log(t, 5, params, 12, 2) == pytest.approx(
            tables.joint(Family.OBSERVED_RED, 5)[t.r, t.s]
        )


def test_out_of_range_statistics_have_zero_mass(table1_stats):
    params = ModelParams(0.25, 0.15, 0.25)
    t = table1_stats.latent()[0]
    assert f1_log(VertexStats(3, 0), params, 12, 2) == -math.inf
    assert fprime_log(VertexStats(2, 0), 5, params, 12, 2) == -math.inf
    with pytest.raises(ValueError):
        f2_log(t, 2, params, 12, 2)


def test_log_likelihood_is_a_product_over_vertices(table1_stats):
    params = ModelParams(0.25, 0.15, 0.25)
    coloring = FullColoring.from_red(12, TABLE1_RED)
    expected = 0.0
    for v in range(12):
        t = table1_stats.for_vertex(v)
        if v in (0, 1):
            expected += fprime_log(t, 5, params, 12, 2)
        elif v in TABLE1_RED:
            expected += f2_log(t, 5, params, 12, 2)
        else:
            expected += f1_log(t, params, 12, 2)
    assert log_likelihood(table1_stats, coloring, params) == pytest.approx(expected, abs=1e-10)


def _conditionings(seed: int, gap: float = 0.05):
    rng = np.random.default_rng(seed)
    found = 0
    while found < 200:
        params = sample_params_from_prior(rng)
        gaps = [params.p1, params.p2, params.q2 - params.p2, 1.0 - params.p1 - params.q2]
        if min(gaps) >= gap:
            found += 1
            yield params, float(rng.random())


def test_inverse_cdf_round_trips():
    for params, u in _conditionings(3):
        p1 = sample_p1_given(params.p2, params.q2, u)
        assert cdf_p1_given(p1, params.p2, params.q2) == pytest.approx(u, abs=IDENTITY_TOL)
        p2 = sample_p2_given(params.p1, params.q2, u)
        assert cdf_p2_given(p2, params.p1, params.q2) == pytest.approx(u, abs=IDENTITY_TOL)
        q2 = sample_q2_given(params.p1, params.p2, u)
        assert cdf_q2_given(q2, params.p1, params.p2) == pytest.approx(u, abs=IDENTITY_TOL)


def test_conditional_cdfs_match_integrated_densities():
    p2, q2 = 0.1, 0.45
    norm, _ = integrate.quad(lambda x: 1.0 / (1.0 - x - p2), 0.0, 1.0 - q2)
    for p1 in [0.05, 0.2, 0.5]:
        mass, _ = integrate.quad(lambda x: 1.0 / (1.0 - x - p2), 0.0, p1)
        assert cdf_p1_given(p1, p2, q2) == pytest.approx(mass / norm, abs=1e-9)

    p1 = 0.3
    norm, _ = integrate.quad(lambda x: 1.0 / (1.0 - p1 - x), 0.0, q2)
    for p2 in [0.05, 0.2, 0.4]:
        mass, _ = integrate.quad(lambda x: 1.0 / (1.0 - p1 - x), 0.0, p2)
        assert cdf_p2_given(p2, p1, q2) == pytest.approx(mass / norm, abs=1e-9)


def test_conditional_samples_pass_ks_tests():
    rng = np.random.default_rng(8)
    p1, p2, q2 = 0.2, 0.15, 0.5
    draws = [sample_p1_given(p2, q2, u) for u in rng.random(4000)]
    assert st.kstest(draws, np.vectorize(lambda v: cdf_p1_given(v, p2, q2))).pvalue > 0.001
    draws = [sample_p2_given(p1, q2, u) for u in rng.random(4000)]
    assert st.kstest(draws, np.vectorize(lambda v: cdf_p2_given(v, p1, q2))).pvalue > 0.001
    draws = [sample_q2_given(p1, p2, u) for u in rng.random(4000)]
    assert st.kstest(draws, st.uniform(p2, 1.0 - p1 - p2).cdf).pvalue > 0.001


def test_conditionings_outside_support_are_rejected():
    with pytest.raises(ValueError):
        sample_p1_given(0.4, 0.3, 0.5)
    with pytest.raises(ValueError):
        sample_p2_given(0.6, 0.5, 0.5)
    with pytest.raises(ValueError):
        sample_q2_given(0.2, 0.2, 1.5)


def test_prior_marginals_integrate_to_one():
    assert integrate.quad(prior_p_marginal, 0.0, 1.0)[0] == pytest.approx(1.0, abs=1e-9)
    assert integrate.quad(prior_q2_marginal, 0.0, 1.0)[0] == pytest.approx(1.0, abs=1e-7)
    for prior in [PriorConfig(2.0, 10.0), PriorConfig(1.0, 1.0, psi_upper=0.5)]:
        mass = integrate.quad(lambda x: prior_psi_density(x, prior), 0.0, prior.psi_upper)[0]
        assert mass == pytest.approx(1.0, abs=1e-7)
    assert prior_psi_density(0.7, PriorConfig(1.0, 1.0, psi_upper=0.5)) == 0.0


def test_prior_draws_match_marginals():
    rng = np.random.default_rng(9)
    draws = np.array([sample_params_from_prior(rng).as_array() for _ in range(4000)])
    assert st.kstest(draws[:, 0], st.beta(1, 2).cdf).pvalue > 0.001
    assert st.kstest(draws[:, 1], st.beta(1, 2).cdf).pvalue > 0.001
    assert draws[:, 2].mean() == pytest.approx(0.5, abs=0.02)
    assert np.all(draws[:, 1] < draws[:, 2])


def test_log_prior_and_kernel_vanish_off_support(table1_stats):
    assert log_prior_pq((0.25, 0.15, 0.25)) == pytest.approx(math.log(2.0) - math.log(0.6))
    assert log_prior_pq((0.25, 0.3, 0.2)) == -math.inf

    coloring = FullColoring.from_red(12, TABLE1_RED)
    prior = PriorConfig(2.0, 10.0)
    params = ModelParams(0.25, 0.15, 0.25)
    assert math.isfinite(log_posterior_kernel(table1_stats, coloring, params, 0.3, prior))
    assert log_posterior_kernel(table1_stats, coloring, params, 1.0, prior) == -math.inf
    boundary = ModelParams(0.25, 0.15, 0.15)
    assert log_posterior_kernel(table1_stats, coloring, boundary, 0.3, prior) == -math.inf


@pytest.mark.parametrize(
    "kwargs", [{"alpha": 0.0, "beta": 1.0}, {"alpha": 1.0, "beta": -1.0}, {"psi_upper": 0.0}]
)
def test_prior_config_validation(kwargs):
    with pytest.raises(InvalidConfigError):
        PriorConfig(**{"alpha": 1.0, "beta": 1.0, **kwargs})


def test_tables_match_direct_convolutions():
    for params, n, m_prime, m in _random_settings(30, seed=4):
        tables = LikelihoodTables(params, n, m_prime)
        for family in Family:
            table = tables.conditional(family, m)
            for r in range(m_prime + 1 if family != Family.OBSERVED_RED else m_prime):
                direct = conditional_s_pmf(family, r, params, n, m_prime, m).log_table(n)
                finite = np.isfinite(direct)
                assert np.array_equal(finite, np.isfinite(table[r])), (family, r)
                assert np.allclose(table[r][finite], direct[finite], atol=1e-9), (family, r)


def test_tables_derived_for_new_parameters_match_fresh_ones():
    params = ModelParams(0.25, 0.15, 0.3)
    tables = LikelihoodTables(params, 20, 3)
    for m in (4, 7):
        tables.joint(Family.LATENT_RED, m)
        tables.joint(Family.OBSERVED_RED, m)
    tables.joint(Family.GREEN)
    for changed in [
        ModelParams(0.1, 0.15, 0.3),
        ModelParams(0.25, 0.15, 0.5),
        ModelParams(0.25, 0.05, 0.3),
    ]:
        derived = tables.with_params(changed)
        fresh = LikelihoodTables(changed, 20, 3)
        for family, m in [(Family.GREEN, 0), (Family.LATENT_RED, 4), (Family.OBSERVED_RED, 7)]:
            assert np.array_equal(derived.joint(family, m), fresh.joint(family, m))
