import math

import numpy as np
import pytest

from engines.cpp import sample_spectrum
from engines.moments import (
    asymptotic_factorial_moment, build_moment_context, clonal_composition_matrix, clonal_composition_pmf,
    geometric_factorial_moment, joint_pgf, joint_pmf, l2_error_asymptote, l2_error_exact, lln_descriptor,
    lower_profile, mean_spectrum, mixed_mean, mixed_mean_row, pmf_clonal, pmf_population,
    product_with_population, second_order, spectrum_covariance,
)
from engines.scale import clonal_constants, eval_W
from utils.errors import ConfigurationError, DomainError, SupercriticalityError
from utils.statistics import mean_and_se
from utils.streams import replica_rng


def test_context_validation(birth_death):
    with pytest.raises(ConfigurationError):
        build_moment_context(birth_death, 1.0, series_radius=1.0)
    with pytest.raises(ConfigurationError):
        build_moment_context(birth_death, 1.0, series_length=16)
    with pytest.raises(ConfigurationError):
        build_moment_context(birth_death, 1.0, quadrature_points=1)


def test_population_pmf(ctx):
    assert pmf_population(ctx, 1, 2.0) == pytest.approx(1.0 / 13.778112, abs=1e-6)
    total = sum(pmf_population(ctx, k, 2.0) for k in range(1, 600))
    assert total == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        pmf_population(ctx, 0, 2.0)
    with pytest.raises(DomainError):
        pmf_population(ctx, 1, 5.0)


def test_clonal_pmf(ctx):
    assert pmf_clonal(ctx, 0, 2.0) == pytest.approx(0.356178, abs=1e-4)
    expected = 1.0 - math.exp(-1.0) * 13.778112 / 7.873127
    assert pmf_clonal(ctx, 0, 2.0) == pytest.approx(expected, abs=1e-5)
    total = sum(pmf_clonal(ctx, k, 2.0) for k in range(0, 400))
    assert total == pytest.approx(1.0, abs=1e-10)
    values = pmf_clonal(ctx, 2, np.array([0.5, 1.0]))
    assert values[1] == pytest.approx(pmf_clonal(ctx, 2, 1.0))


def test_mean_spectrum(ctx):
    total = sum(k * mean_spectrum(ctx, k, 2.0) for k in range(1, 400))
    assert total == pytest.approx(13.778112 * (1.0 - math.exp(-1.0)), abs=1e-3)
    assert total == pytest.approx(8.7095, abs=1e-3)
    assert mean_spectrum(ctx, 1, 0.0) == 0.0


def test_mean_spectrum_without_mutations(yule):
    ctx = build_moment_context(yule, 1.0)
    assert mean_spectrum(ctx, 1, 1.0) == 0.0
    assert pmf_clonal(ctx, 0, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert second_order(ctx, 1, 2, 1.0) == 0.0


def test_joint_pgf(ctx):
    p = 1.0 / eval_W(ctx.gridW, 2.0)
    value = joint_pgf(ctx, 0.0, 2.0, 0.5, 1.0)
    assert value.real == pytest.approx(0.5 * p / (1.0 - 0.5 * (1.0 - p)), rel=1e-10)
    assert joint_pgf(ctx, 0.5, 1.5, 1.0, 1.0).real == pytest.approx(1.0, rel=1e-10)
    tilde = eval_W(ctx.gridW, 2.0)
    with pytest.raises(DomainError):
        joint_pgf(ctx, 0.0, 2.0, tilde / (tilde - 1.0), 0.5)


def test_joint_pmf_marginals(ctx):
    table = joint_pmf(ctx, 0.0, 2.0)
    assert table.sum() == pytest.approx(1.0, abs=1e-8)
    assert np.all(table >= 0.0)
    p = 1.0 / eval_W(ctx.gridW, 2.0)
    n = np.arange(1, 20)
    assert np.allclose(table.sum(axis=1)[1:20], p * (1.0 - p) ** (n - 1), atol=1e-8)
    assert table[0].sum() == pytest.approx(0.0, abs=1e-8)
    clonal = [pmf_clonal(ctx, z, 2.0) for z in range(20)]
    assert np.allclose(table.sum(axis=0)[:20], clonal, atol=1e-5)
    # Z never exceeds N
    assert np.triu(table, 1).sum() == pytest.approx(0.0, abs=1e-8)


def test_lower_profile_at_zero_base_is_clonal_law(ctx):
    q, m = lower_profile(ctx, 0.0, 2.0)
    clonal = np.array([pmf_clonal(ctx, z, 2.0) for z in range(30)])
    assert np.allclose(q[:30], clonal, atol=1e-5)
    assert q.sum() == pytest.approx(1.0, abs=1e-8)
    assert m.sum() == pytest.approx(eval_W(ctx.gridW, 2.0), rel=1e-6)


def test_lower_profile_matches_joint_pmf(ctx):
    table = joint_pmf(ctx, 1.0, 2.0)
    q, m = lower_profile(ctx, 1.0, 1.0)
    size = min(q.size, table.shape[1], 25)
    n = np.arange(table.shape[0])[:, np.newaxis]
    assert np.allclose(q[:size], table.sum(axis=0)[:size], atol=1e-5)
    assert np.allclose(m[:size], (n * table).sum(axis=0)[:size], atol=1e-4)


def test_lower_profile_without_span(ctx):
    q, m = lower_profile(ctx, 1.0, 0.0)
    assert q[:2].tolist() == pytest.approx([0.0, 1.0])
    assert m[:2].tolist() == pytest.approx([0.0, 1.0])
    assert np.allclose(q[2:], 0.0) and np.allclose(m[2:], 0.0)


def test_composition_matches_iterated_convolution(ctx):
    a, lmax = 1.0, 12
    law = np.array([pmf_clonal(ctx, k, a) for k in range(lmax + 1)])
    matrix = clonal_composition_matrix(ctx, a, 5, lmax)
    power = np.zeros(lmax + 1)
    power[0] = 1.0
    for z in range(6):
        assert np.allclose(matrix[z], power, atol=1e-12)
        power = np.convolve(power, law)[:lmax + 1]
    assert clonal_composition_pmf(ctx, a, 3, 4) == pytest.approx(matrix[3, 4])


def test_mixed_means_partition_the_mean(ctx):
    lmax = 200
    for k in (1, 2):
        row = mixed_mean_row(ctx, k, 2.0, lmax)
        assert row.sum() == pytest.approx(mean_spectrum(ctx, k, 2.0), rel=1e-3)
        assert mixed_mean(ctx, k, 1, 2.0) == pytest.approx(row[1])
    assert np.all(mixed_mean_row(ctx, 1, 0.0, 3) == 0.0)


def test_second_order_is_symmetric(ctx):
    assert second_order(ctx, 1, 2, 1.5) == second_order(ctx, 2, 1, 1.5)
    value = spectrum_covariance(ctx, 1, 2, 1.5)
    assert value == pytest.approx(second_order(ctx, 1, 2, 1.5)
                                  - mean_spectrum(ctx, 1, 1.5) * mean_spectrum(ctx, 2, 1.5))
    assert second_order(ctx, 1, 1, 0.0) == 0.0


def test_geometric_factorial_moment():
    assert geometric_factorial_moment(0.5, 1) == pytest.approx(2.0)
    assert geometric_factorial_moment(0.5, 2) == pytest.approx(4.0)
    assert geometric_factorial_moment(1.0, 2) == 0.0
    with pytest.raises(DomainError):
        geometric_factorial_moment(0.0, 1)


def test_asymptotic_factorial_moment(ctx, birth_death):
    c1 = clonal_constants(birth_death, 1, h=ctx.gridW.step)[0]
    W = eval_W(ctx.gridW, 2.0)
    assert asymptotic_factorial_moment(ctx, [1], [1], 2.0) == pytest.approx(W * c1)
    assert asymptotic_factorial_moment(ctx, [1], [2], 2.0) == pytest.approx(W ** 2 * c1 ** 2)
    with pytest.raises(DomainError):
        asymptotic_factorial_moment(ctx, [1, 2], [1], 2.0)


def test_lln_descriptor(ctx):
    descriptor = lln_descriptor(ctx, 4)
    assert descriptor.alpha == pytest.approx(1.0)
    assert descriptor.psi_prime_alpha == pytest.approx(0.5)
    assert np.allclose(descriptor.scales, descriptor.constants / 0.5)
    assert np.all(np.diff(descriptor.constants) < 0)


def test_lln_descriptor_requires_growth():
    from models import LifespanDistribution, ModelParams
    subcritical = ModelParams(b=0.5, theta=0.5, lifespan=LifespanDistribution.exponential(1.0))
    with pytest.raises(SupercriticalityError):
        lln_descriptor(build_moment_context(subcritical, 1.0))


def test_l2_error(ctx):
    exact = l2_error_exact(ctx, 1, 1.0)
    assert exact > 0.0
    assert l2_error_asymptote(ctx, 1, 1.0) >= 0.0


@pytest.mark.slow
def test_second_order_against_simulation(ctx):
    t = 1.0
    samples = [sample_spectrum(ctx.gridW, t, ctx.theta, replica_rng(41, r)) for r in range(100_000)]
    products = np.array([s.count(1) * s.count(2) for s in samples], dtype=float)
    estimate, se = mean_and_se(products)
    assert abs(estimate - second_order(ctx, 1, 2, t)) < 4 * se

    with_population = np.array([s.count(1) * s.N for s in samples], dtype=float)
    estimate, se = mean_and_se(with_population)
    assert abs(estimate - product_with_population(ctx, 1, t)) < 4 * se

    ones = np.array([s.count(1) for s in samples], dtype=float)
    estimate, se = mean_and_se(ones * (ones - 1.0))
    assert abs(estimate - second_order(ctx, 1, 1, t)) < 4 * se
    estimate, se = mean_and_se(ones * np.array([s.Z0 == 1 for s in samples]))
    assert abs(estimate - mixed_mean(ctx, 1, 1, t)) < 4 * se


def test_mixed_and_diagonal_moments_against_simulation(ctx):
    t = 1.0
    samples = [sample_spectrum(ctx.gridW, t, ctx.theta, replica_rng(47, r)) for r in range(30_000)]
    clonal = np.array([s.Z0 for s in samples])
    counts = {k: np.array([s.count(k) for s in samples], dtype=float) for k in (1, 2)}
    for k, l in ((1, 0), (1, 1), (1, 2), (2, 1)):
        estimate, se = mean_and_se(counts[k] * (clonal == l))
        assert abs(estimate - mixed_mean(ctx, k, l, t)) < 4 * se
    for k in (1, 2):
        estimate, se = mean_and_se(counts[k] * (counts[k] - 1.0))
        assert abs(estimate - second_order(ctx, k, k, t)) < 4 * se
