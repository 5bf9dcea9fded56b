import math

import numpy as np
import pytest

from utils.errors import InsufficientSamplesError
from utils.statistics import (
    binomial_z, geometric_to_exponential, gof_discrete, gof_geometric, ks_exponential, ks_statistic, mean_and_se,
    total_variation, two_sample_chisquare, welch_z,
)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def test_gof_geometric_accepts_matching_law(rng):
    samples = rng.geometric(0.3, 5000)
    assert gof_geometric(samples, 0.3) > 1e-3
    assert gof_geometric(samples, 0.15) < 1e-3


def test_gof_geometric_is_calibrated(rng):
    p_values = np.array([gof_geometric(rng.geometric(0.3, 2000), 0.3) for _ in range(200)])
    assert 0.01 <= np.mean(p_values < 0.05) <= 0.12


def test_gof_discrete_rejects_values_below_support():
    samples = np.zeros(200, dtype=int)
    assert gof_discrete(samples, [0.5, 0.5], start=1) == 0.0


def test_too_few_samples():
    with pytest.raises(InsufficientSamplesError):
        gof_geometric(np.ones(10, dtype=int), 0.5)
    with pytest.raises(InsufficientSamplesError):
        ks_exponential(np.ones(10))


def test_ks_exponential(rng):
    samples = rng.exponential(2.0, 3000)
    assert ks_exponential(samples, 2.0) > 1e-3
    assert ks_exponential(samples, 1.0) < 1e-3
    assert ks_statistic(samples, 2.0) < 0.05
    assert math.isnan(ks_statistic([]))


def test_two_sample_chisquare(rng):
    first = rng.poisson(3.0, 2000)
    second = rng.poisson(3.0, 2000)
    assert two_sample_chisquare(first, second) > 1e-3
    assert two_sample_chisquare(first, rng.poisson(4.0, 2000)) < 1e-3


def test_mean_and_se():
    mean, se = mean_and_se([1.0, 2.0, 3.0, 4.0])
    assert mean == 2.5
    assert se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)
    assert math.isnan(mean_and_se([])[0])
    assert math.isnan(mean_and_se([3.0])[1])


def test_z_statistics():
    assert welch_z(1.0, 0.5, 0.0) == 2.0
    assert welch_z(1.0, 0.0, 1.0) == 0.0
    assert welch_z(2.0, 0.0, 1.0) == math.inf
    assert binomial_z(50, 100, 0.5) == 0.0
    with pytest.raises(InsufficientSamplesError):
        binomial_z(0, 0, 0.5)


def test_total_variation():
    table = np.array([[0.0, 0.0], [0.5, 0.5]])
    assert total_variation(table, [[1, 0], [1, 1]]) == pytest.approx(0.0)
    assert total_variation(table, [[1, 0], [1, 0]]) == pytest.approx(0.5)
    # samples outside the table count toward the distance
    assert total_variation(table, [[5, 5], [5, 5]]) == pytest.approx(1.0)


def test_geometric_to_exponential(rng):
    p = math.exp(-2.0)
    counts = rng.geometric(p, 5000)
    spread = geometric_to_exponential(counts, p, rng.random(counts.size))
    assert np.all(spread >= 0.0)
    assert ks_exponential(spread) > 1e-3
    # the lattice correction vanishes as p shrinks
    assert np.allclose(spread, p * counts, atol=2.0 * p * (1.0 + counts.max() * p))

    shifted = rng.geometric(0.8 * p, 5000)
    assert ks_exponential(geometric_to_exponential(shifted, p, rng.random(shifted.size))) < 1e-3
    with pytest.raises(ValueError):
        geometric_to_exponential(counts, p, rng.random(3))
