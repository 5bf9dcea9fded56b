import math

import pytest

from engines.moments import build_moment_context
from engines.scale import build_scale_grid
from models import LifespanDistribution, ModelParams


def closed_form_W(t):
    """W(t) of the birth-death tree b=2, d=1"""
    return 2.0 * math.exp(t) - 1.0


def closed_form_W_theta(t):
    """W_theta(t) of the same tree with theta=0.5"""
    return 4.0 * math.exp(0.5 * t) - 3.0


@pytest.fixture(scope='session')
def birth_death():
    return ModelParams(b=2.0, theta=0.5, lifespan=LifespanDistribution.exponential(1.0))


@pytest.fixture(scope='session')
def yule():
    return ModelParams(b=1.0, theta=0.0, lifespan=LifespanDistribution.immortal())


@pytest.fixture(scope='session')
def gridW(birth_death):
    return build_scale_grid(birth_death, 1e-3, 4.0)


@pytest.fixture(scope='session')
def gridWtheta(birth_death):
    return build_scale_grid(birth_death, 1e-3, 4.0, clonal=True)


@pytest.fixture(scope='session')
def ctx(birth_death):
    return build_moment_context(birth_death, 3.0)
