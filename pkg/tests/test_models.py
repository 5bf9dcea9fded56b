import math

import numpy as np
import pytest

from models import (
    LifespanDistribution, LifespanKind, ModelParams, SpectrumSample, extinction_probability,
    lifespan_laplace, lifespan_survival, malthusian_alpha, non_extinction_probability, psi,
    psi_derivative, psi_theta,
)
from utils.errors import DomainError, ParameterError


def test_lifespan_spec_parsing():
    assert LifespanDistribution.from_spec('exp:0.5') == LifespanDistribution.exponential(0.5)
    assert LifespanDistribution.from_spec('fixed:2').kind is LifespanKind.DETERMINISTIC
    assert LifespanDistribution.from_spec(' Uniform:1,3 ').mean == 2.0
    assert LifespanDistribution.from_spec('immortal').mean == math.inf
    assert LifespanDistribution.from_spec('uniform:1,3').to_spec() == 'uniform:1,3'


@pytest.mark.parametrize('text', ['', 'exp', 'exp:-1', 'fixed:0', 'uniform:3,1', 'weibull:2', 'immortal:1'])
def test_lifespan_spec_rejects_invalid(text):
    with pytest.raises(ParameterError):
        LifespanDistribution.from_spec(text)


def test_lifespan_survival():
    exponential = LifespanDistribution.exponential(1.0)
    assert lifespan_survival(exponential, 0.0) == 1.0
    assert lifespan_survival(exponential, 1.0) == pytest.approx(math.exp(-1.0))
    assert lifespan_survival(LifespanDistribution.immortal(), 100.0) == 1.0
    fixed = LifespanDistribution.deterministic(2.0)
    assert fixed.survival(2.0) == 0.0
    assert fixed.left_survival(2.0) == 1.0
    with pytest.raises(DomainError):
        lifespan_survival(exponential, -1.0)


def test_lifespan_laplace():
    assert lifespan_laplace(LifespanDistribution.uniform(0.0, 1.0), 0.0) == 1.0
    assert lifespan_laplace(LifespanDistribution.exponential(1.0), 1.0) == pytest.approx(0.5)
    assert lifespan_laplace(LifespanDistribution.deterministic(2.0), 0.5) == pytest.approx(math.exp(-1.0))
    assert lifespan_laplace(LifespanDistribution.immortal(), 1.0) == 0.0


def test_laplace_derivative_matches_finite_differences():
    h = 1e-6
    for dist in (LifespanDistribution.exponential(1.5), LifespanDistribution.uniform(0.5, 2.0),
                 LifespanDistribution.deterministic(1.2)):
        for x in (0.3, 1.0, 4.0):
            numeric = -(dist.laplace(x + h) - dist.laplace(x - h)) / (2 * h)
            assert dist.laplace_derivative(x) == pytest.approx(numeric, rel=1e-6)


def test_psi_closed_forms(birth_death):
    params = ModelParams(b=2.0, theta=0.0, lifespan=LifespanDistribution.exponential(1.0))
    assert psi(params, 0.0) == 0.0
    assert psi(params, 3.0) == pytest.approx(1.5)
    for x in np.linspace(0.0, 10.0, 25):
        assert psi(params, x) == pytest.approx(x * (x + 1.0 - 2.0) / (x + 1.0), abs=1e-12)
    yule = ModelParams(b=1.0, theta=0.0, lifespan=LifespanDistribution.immortal())
    assert psi(yule, 2.0) == pytest.approx(1.0)
    assert psi_derivative(yule, 3.0) == 1.0


def test_psi_theta(birth_death):
    assert psi_theta(birth_death, 1.0) == pytest.approx(0.2)
    assert psi_theta(birth_death, 0.0) == 0.0
    rng = np.random.default_rng(7)
    for x in rng.uniform(0.0, 10.0, 100):
        assert psi_theta(birth_death, x) * (x + 0.5) == pytest.approx(x * psi(birth_death, x + 0.5))


def test_psi_derivative_matches_finite_differences(birth_death):
    h = 1e-6
    for x in np.linspace(0.1, 10.0, 20):
        numeric = (psi(birth_death, x + h) - psi(birth_death, x - h)) / (2 * h)
        assert psi_derivative(birth_death, x) == pytest.approx(numeric, rel=1e-6)
    assert psi_derivative(birth_death, 1.0) == pytest.approx(0.5)
    assert psi_derivative(birth_death, 0.0) == pytest.approx(1.0 - 2.0)


def test_malthusian_alpha(birth_death, yule):
    assert malthusian_alpha(birth_death) == pytest.approx(1.0, rel=1e-10)
    assert abs(psi(birth_death, malthusian_alpha(birth_death))) < 1e-10
    assert malthusian_alpha(yule) == pytest.approx(1.0, rel=1e-10)
    subcritical = ModelParams(b=0.5, theta=0.0, lifespan=LifespanDistribution.exponential(1.0))
    assert malthusian_alpha(subcritical) == 0.0
    assert extinction_probability(subcritical) == 1.0


def test_extinction_probability(birth_death):
    assert extinction_probability(birth_death) == pytest.approx(0.5)
    assert non_extinction_probability(birth_death) == pytest.approx(0.5)


def test_model_params_validation():
    with pytest.raises(ParameterError):
        ModelParams(b=0.0, theta=0.0, lifespan=LifespanDistribution.immortal())
    with pytest.raises(ParameterError):
        ModelParams(b=1.0, theta=-0.1, lifespan=LifespanDistribution.immortal())


def test_spectrum_sample():
    sample = SpectrumSample(N=7, Z0=2, A={1: 1, 2: 2})
    assert sample.families == 3
    assert sample.is_conserved
    assert sample.count(3) == 0
    assert sample.spectrum_text == '1:1 2:2'
    assert SpectrumSample.parse_spectrum(sample.spectrum_text) == {1: 1, 2: 2}
    assert SpectrumSample.parse_spectrum('') == {}
