import math

import numpy as np
import pytest

from config import Config
from engines.forward import (
    Population, _with_descent, checkpoint_mean_ratio, contour_order, descent_transition_probability,
    immortal_horizon, infinite_descent_counts, population_records, residual_lifetimes, run_population,
    simulate_forward,
)
from engines.harness import descent_batch, run_replicas
from engines.moments import mean_spectrum
from engines.scale import eval_W
from models import LifespanDistribution, ModelParams
from utils.errors import DomainError
from utils.statistics import binomial_z, geometric_to_exponential, gof_geometric, ks_exponential, mean_and_se
from utils.streams import Stream, replica_rng


@pytest.fixture
def small_population():
    # root 0 has children 1 (born 1) and 2 (born 2); 1 has child 3 (born 3); 2 dies at 4
    return Population(
        births=np.array([0.0, 1.0, 2.0, 3.0]),
        deaths=np.array([10.0, 10.0, 4.0, 10.0]),
        parents=np.array([-1, 0, 0, 1]),
        types=np.zeros(4, dtype=np.int64),
        overflow=False,
    )


def test_contour_order_visits_youngest_child_first(small_population):
    assert contour_order(small_population, 3.5).tolist() == [0, 2, 1, 3]
    assert contour_order(small_population, 5.0).tolist() == [0, 1, 3]


def test_descent_marks(small_population):
    marked = _with_descent(small_population, 5.0)
    assert marked.tolist() == [True, True, False, True]


def test_records(small_population):
    records = population_records(small_population)
    assert [record.parent for record in records] == [-1, 0, 0, 1]
    assert records[3].birth == 3.0


def test_run_is_reproducible(birth_death):
    first = run_population(birth_death, 2.0, 10_000, replica_rng(1, 0, Stream.FORWARD))
    second = run_population(birth_death, 2.0, 10_000, replica_rng(1, 0, Stream.FORWARD))
    assert np.array_equal(first.births, second.births)
    assert np.array_equal(first.types, second.types)


def test_parents_precede_children(birth_death):
    population = run_population(birth_death, 3.0, 10_000, np.random.default_rng(3))
    children = np.arange(1, population.parents.size)
    assert np.all(population.parents[children] < children)
    assert np.all(np.diff(population.births) >= 0)
    assert np.all(population.births[children] < population.deaths[population.parents[children]])


def test_no_mutations_keeps_everyone_clonal():
    params = ModelParams(b=2.0, theta=0.0, lifespan=LifespanDistribution.exponential(1.0))
    for replica in range(50):
        outcome = simulate_forward(params, 2.0, 10_000, replica_rng(5, replica, Stream.FORWARD))
        if outcome.survived:
            assert outcome.sample.Z0 == outcome.sample.N
            assert outcome.sample.A == {}


def test_forward_samples_are_conserved(birth_death):
    for replica in range(100):
        outcome = simulate_forward(birth_death, 2.0, 10_000, replica_rng(7, replica, Stream.FORWARD))
        assert outcome.sample.is_conserved
        assert outcome.survived == (outcome.sample.N > 0)


def test_overflow_is_flagged(yule):
    outcome = simulate_forward(yule, 15.0, 50, np.random.default_rng(0), keep_records=True)
    assert outcome.overflow
    assert outcome.sample is None
    assert len(outcome.records) == 51


def test_forward_domain(birth_death):
    with pytest.raises(DomainError):
        simulate_forward(birth_death, 0.0, 10, np.random.default_rng(0))
    with pytest.raises(DomainError):
        simulate_forward(birth_death, 1.0, 0, np.random.default_rng(0))


def test_survival_fraction(birth_death):
    runs = 3000
    survived = sum(simulate_forward(birth_death, 2.0, 100_000, replica_rng(9, r, Stream.FORWARD)).survived
                   for r in range(runs))
    assert abs(binomial_z(survived, runs, 1.0 / (2.0 - math.exp(-2.0)))) < 4.0


def test_infinite_descent_counts(birth_death, gridW):
    T, checkpoint = 3.0, 1.0
    counts = []
    for replica in range(4000):
        outcome = infinite_descent_counts(birth_death, [checkpoint], T, replica_rng(11, replica, Stream.DESCENT))
        if outcome.survived:
            counts.append(outcome.counts[0])
    assert len(counts) > 1000
    assert min(counts) >= 1
    assert gof_geometric(counts, descent_transition_probability(gridW, checkpoint, T)) > 1e-3


def test_descent_domain(birth_death):
    with pytest.raises(DomainError):
        infinite_descent_counts(birth_death, [3.0], 3.0, np.random.default_rng(0))


def test_descent_probabilities(gridW):
    assert descent_transition_probability(gridW, 0.0, 3.0) == 1.0
    assert descent_transition_probability(gridW, 1.0, 3.0) == pytest.approx(eval_W(gridW, 2.0) / eval_W(gridW, 3.0))
    assert checkpoint_mean_ratio(gridW, 1.0, 2.0, 3.0) == pytest.approx(eval_W(gridW, 2.0) / eval_W(gridW, 1.0))
    with pytest.raises(DomainError):
        checkpoint_mean_ratio(gridW, 2.0, 1.0, 3.0)


def test_residual_lifetimes(birth_death):
    overshoots = residual_lifetimes(birth_death, 2.0, np.random.default_rng(13))
    assert np.all(overshoots > 0)
    with pytest.raises(DomainError):
        residual_lifetimes(birth_death, 0.0, np.random.default_rng(0))


def test_immortal_horizon():
    assert immortal_horizon(6.0, 1.0) == 11.0
    with pytest.raises(DomainError):
        immortal_horizon(6.0, 0.0)


def test_descent_and_residuals_use_the_default_cap(yule, monkeypatch):
    monkeypatch.setattr(Config, 'POPULATION_CAP', 50)
    outcome = infinite_descent_counts(yule, [1.0], 15.0, np.random.default_rng(0))
    assert outcome.overflow
    assert outcome.counts.tolist() == [0]
    assert residual_lifetimes(yule, 15.0, np.random.default_rng(0)).size == 0
    with pytest.raises(DomainError):
        infinite_descent_counts(yule, [1.0], 15.0, np.random.default_rng(0), cap=0)


def test_forward_population_and_spectrum_laws(ctx):
    t = 2.0
    outcomes = [simulate_forward(ctx.params, t, 100_000, replica_rng(17, r, Stream.FORWARD)) for r in range(8000)]
    alive = [outcome.sample for outcome in outcomes if outcome.survived]
    sizes = np.array([sample.N for sample in alive])
    assert gof_geometric(sizes, 1.0 / eval_W(ctx.gridW, t)) > 1e-3
    for k in range(1, 5):
        estimate, se = mean_and_se([sample.count(k) for sample in alive])
        assert abs(estimate - mean_spectrum(ctx, k, t)) < 4 * se


def test_descent_counts_approach_yule_law(birth_death):
    # N^(T)_t tends to a Yule process of rate alpha = 1, geometric(e^{-t}) at time t
    t = 1.0
    T = immortal_horizon(t, 1.0, margin=4.0)
    rows = run_replicas(descent_batch, 3000, birth_death, t, T, 100_000, seed=19, stream=Stream.YULE)
    counts = rows[(rows[:, 0] == 1) & (rows[:, 1] == 0), 2]
    assert counts.size > 1000
    p = math.exp(-t)
    assert gof_geometric(counts, p) > 1e-3
    uniforms = replica_rng(19, 0, Stream.YULE, 1).random(counts.size)
    assert ks_exponential(geometric_to_exponential(counts, p, uniforms)) > 1e-3


def test_exponential_residual_lifetimes(birth_death):
    t = 1.0
    first, second, third = [], [], []
    for replica in range(6000):
        overshoots = residual_lifetimes(birth_death, t, replica_rng(23, replica, Stream.RESIDUAL))
        if overshoots.size:
            first.append(overshoots[0])
        if overshoots.size >= 3:
            second.append(overshoots[1])
            third.append(overshoots[2])
    # memoryless lifespans leave Exp(1) overshoots
    assert ks_exponential(first, 1.0) > 1e-3
    assert ks_exponential(second, 1.0) > 1e-3
    assert len(second) > 500
    correlation = np.corrcoef(second, third)[0, 1]
    assert abs(correlation) < 4.0 / math.sqrt(len(second))


def test_fixed_lifespan_residuals_are_bounded():
    params = ModelParams(b=1.0, theta=0.0, lifespan=LifespanDistribution.deterministic(1.5))
    for replica in range(300):
        overshoots = residual_lifetimes(params, 2.0, replica_rng(29, replica, Stream.RESIDUAL))
        assert np.all((overshoots > 0.0) & (overshoots < 1.5))
