import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from config import Config
from utils.errors import DomainError, ParameterError

logger = logging.getLogger(__name__)


# Lifespan variants
class LifespanKind(enum.Enum):
    EXPONENTIAL = "exp"
    DETERMINISTIC = "fixed"
    UNIFORM = "uniform"
    IMMORTAL = "immortal"


# Named checks of the validation battery
class Check(enum.Enum):
    POPULATION = "population"
    CLONAL = "clonal"
    MEANS = "means"
    IDENTITIES = "identities"
    MIXED = "mixed"
    SECOND_ORDER = "second_order"
    PRODUCT = "product"
    JOINT_PMF = "joint_pmf"
    FORWARD = "forward"
    GRAFT = "graft"
    ASYMPTOTICS = "asymptotics"
    LIMITS = "limits"


# Lifetime law P_V on (0, inf]
@dataclass(frozen=True)
class LifespanDistribution:
    kind: LifespanKind
    rate: float = 0.0
    value: float = 0.0
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self):
        if self.kind is LifespanKind.EXPONENTIAL and not self.rate > 0:
            raise ParameterError(f"exponential rate must be > 0, got {self.rate}")
        if self.kind is LifespanKind.DETERMINISTIC and not self.value > 0:
            raise ParameterError(f"fixed lifespan must be > 0, got {self.value}")
        if self.kind is LifespanKind.UNIFORM and not (self.low >= 0 and self.high > self.low):
            raise ParameterError(f"uniform lifespan needs 0 <= lo < hi, got {self.low},{self.high}")

    @classmethod
    def exponential(cls, rate):
        return cls(LifespanKind.EXPONENTIAL, rate=float(rate))

    @classmethod
    def deterministic(cls, value):
        return cls(LifespanKind.DETERMINISTIC, value=float(value))

    @classmethod
    def uniform(cls, low, high):
        return cls(LifespanKind.UNIFORM, low=float(low), high=float(high))

    @classmethod
    def immortal(cls):
        return cls(LifespanKind.IMMORTAL)

    @classmethod
    def from_spec(cls, text):
        """Parse "exp:<d>", "fixed:<v>", "uniform:<lo>,<hi>" or "immortal"."""
        if not isinstance(text, str) or not text.strip():
            raise ParameterError("empty lifespan specification")
        name, _, arguments = text.strip().lower().partition(':')
        try:
            if name == LifespanKind.IMMORTAL.value and not arguments:
                return cls.immortal()
            if name == LifespanKind.EXPONENTIAL.value:
                return cls.exponential(float(arguments))
            if name == LifespanKind.DETERMINISTIC.value:
                return cls.deterministic(float(arguments))
            if name == LifespanKind.UNIFORM.value:
                low, high = arguments.split(',')
                return cls.uniform(float(low), float(high))
        except ValueError:
            pass
        raise ParameterError(f"Invalid lifespan specification: {text}")

    def to_spec(self):
        if self.kind is LifespanKind.EXPONENTIAL:
            return f"exp:{self.rate:g}"
        if self.kind is LifespanKind.DETERMINISTIC:
            return f"fixed:{self.value:g}"
        if self.kind is LifespanKind.UNIFORM:
            return f"uniform:{self.low:g},{self.high:g}"
        return "immortal"

    @property
    def mean(self):
        if self.kind is LifespanKind.EXPONENTIAL:
            return 1.0 / self.rate
        if self.kind is LifespanKind.DETERMINISTIC:
            return self.value
        if self.kind is LifespanKind.UNIFORM:
            return 0.5 * (self.low + self.high)
        return math.inf

    @property
    def is_finite(self):
        return self.kind is not LifespanKind.IMMORTAL

    def survival(self, s):
        """P(V > s)"""
        s = np.asarray(s, dtype=float)
        if self.kind is LifespanKind.EXPONENTIAL:
            out = np.exp(-self.rate * s)
        elif self.kind is LifespanKind.DETERMINISTIC:
            out = (s < self.value).astype(float)
        elif self.kind is LifespanKind.UNIFORM:
            out = np.clip((self.high - s) / (self.high - self.low), 0.0, 1.0)
        else:
            out = np.ones_like(s)
        return out.item() if out.ndim == 0 else out

    def left_survival(self, s):
        """P(V >= s); differs from survival only at the atom of a fixed lifespan"""
        if self.kind is LifespanKind.DETERMINISTIC:
            out = (np.asarray(s, dtype=float) <= self.value).astype(float)
            return out.item() if out.ndim == 0 else out
        return self.survival(s)

    def laplace(self, x):
        """E[exp(-xV)]"""
        x = float(x)
        if x == 0.0:
            return 1.0
        if self.kind is LifespanKind.EXPONENTIAL:
            return self.rate / (self.rate + x)
        if self.kind is LifespanKind.DETERMINISTIC:
            return math.exp(-x * self.value)
        if self.kind is LifespanKind.UNIFORM:
            width = self.high - self.low
            return (math.exp(-x * self.low) - math.exp(-x * self.high)) / (x * width)
        return 0.0

    def laplace_derivative(self, x):
        """E[V exp(-xV)], minus the derivative of the Laplace transform"""
        x = float(x)
        if self.kind is LifespanKind.EXPONENTIAL:
            return self.rate / (self.rate + x) ** 2
        if self.kind is LifespanKind.DETERMINISTIC:
            return self.value * math.exp(-x * self.value)
        if self.kind is LifespanKind.UNIFORM:
            if x == 0.0:
                return self.mean
            width = self.high - self.low
            el, eh = math.exp(-x * self.low), math.exp(-x * self.high)
            return ((self.low * el - self.high * eh) / x + (el - eh) / x ** 2) / width
        return math.inf if x == 0.0 else 0.0

    def sample(self, rng, size=None):
        if self.kind is LifespanKind.EXPONENTIAL:
            return rng.exponential(1.0 / self.rate, size)
        if self.kind is LifespanKind.UNIFORM:
            return rng.uniform(self.low, self.high, size)
        constant = self.value if self.kind is LifespanKind.DETERMINISTIC else math.inf
        return constant if size is None else np.full(size, constant)

    def __str__(self):
        return self.to_spec()


# Birth rate, mutation rate and lifespan of a splitting tree
@dataclass(frozen=True)
class ModelParams:
    b: float
    theta: float
    lifespan: LifespanDistribution

    def __post_init__(self):
        if not self.b > 0:
            raise ParameterError(f"birth rate b must be > 0, got {self.b}")
        if not self.theta >= 0:
            raise ParameterError(f"mutation rate theta must be >= 0, got {self.theta}")

    @property
    def mean_offspring(self):
        return self.b * self.lifespan.mean

    @property
    def is_supercritical(self):
        return self.mean_offspring > 1.0

    def clonal_survival(self, s):
        """P(V_theta > s) for V_theta = min(V, Exp(theta))"""
        return np.exp(-self.theta * np.asarray(s, dtype=float)) * self.lifespan.survival(s)

    def __repr__(self):
        return f'<ModelParams b={self.b:g} theta={self.theta:g} lifespan={self.lifespan}>'


def lifespan_survival(dist, s):
    if np.any(np.asarray(s) < 0):
        raise DomainError("survival requires s >= 0")
    return dist.survival(s)


def lifespan_laplace(dist, x):
    if x < 0:
        raise DomainError("Laplace transform requires x >= 0")
    return dist.laplace(x)


def psi(params, x):
    """Laplace exponent x - b(1 - E[exp(-xV)])"""
    if x < 0:
        raise DomainError("psi requires x >= 0")
    return x - params.b * (1.0 - params.lifespan.laplace(x))


def psi_derivative(params, x):
    return 1.0 - params.b * params.lifespan.laplace_derivative(x)


def psi_theta(params, x):
    """Laplace exponent of the clonal tree, x psi(x + theta) / (x + theta)"""
    shifted = x + params.theta
    if x < 0 or shifted <= 0:
        raise DomainError("psi_theta requires x >= 0 and x + theta > 0")
    return x * psi(params, shifted) / shifted


def psi_theta_derivative(params, x):
    shifted = x + params.theta
    if shifted <= 0:
        raise DomainError("psi_theta requires x + theta > 0")
    value = psi(params, shifted)
    return value / shifted + x * (psi_derivative(params, shifted) * shifted - value) / shifted ** 2


def malthusian_alpha(params):
    """Largest root of psi on [0, inf); 0 when b E[V] <= 1"""
    if not params.is_supercritical:
        return 0.0

    low, high = 1e-9, 1.0
    while psi(params, low) >= 0.0 and low > 1e-300:
        low *= 1e-3
    while psi(params, high) <= 0.0:
        high *= 2.0
        logger.debug("alpha bracket expanded to [%g, %g]", low, high)
    return optimize.bisect(lambda x: psi(params, x), low, high, xtol=1e-300, rtol=1e-12)


def extinction_probability(params):
    """E[exp(-alpha V)], the probability that the population dies out"""
    return params.lifespan.laplace(malthusian_alpha(params))


def non_extinction_probability(params):
    return 1.0 - extinction_probability(params)


# Tabulated scale function W (or W_theta) on a uniform grid
@dataclass(frozen=True, eq=False)
class ScaleGrid:
    params: ModelParams
    step: float
    horizon: float
    values: np.ndarray
    alpha: float
    psi_prime_alpha: float
    tail_coefficient: float
    clonal: bool = False

    @property
    def nodes(self):
        return np.arange(self.values.size) * self.step

    @property
    def size(self):
        return self.values.size - 1

    def __repr__(self):
        name = 'W_theta' if self.clonal else 'W'
        return f'<ScaleGrid {name} h={self.step:g} T={self.horizon:g} M={self.size}>'


# Genealogy of the population alive at the horizon; depths[0] is the horizon
@dataclass(frozen=True, eq=False)
class CoalescentPointProcess:
    horizon: float
    depths: np.ndarray
    base: float = 0.0

    def __post_init__(self):
        depths = self.depths
        if depths.size < 1 or depths[0] != self.horizon:
            raise DomainError("first branch depth must equal the horizon")
        interior = depths[1:]
        if interior.size and (interior.min() <= 0.0 or interior.max() >= self.horizon):
            raise DomainError("interior branch depths must lie in (0, horizon)")

    @property
    def size(self):
        return int(self.depths.size)

    def __repr__(self):
        return f'<CoalescentPointProcess t={self.horizon:g} N={self.size}>'


# Mutations grouped per branch: depths[offsets[i]:offsets[i+1]] sit on branch i
@dataclass(frozen=True, eq=False)
class MutationSet:
    depths: np.ndarray
    offsets: np.ndarray

    @property
    def branch_count(self):
        return int(self.offsets.size - 1)

    @property
    def counts(self):
        return np.diff(self.offsets)

    def branch(self, index):
        return self.depths[self.offsets[index]:self.offsets[index + 1]]

    def pairs(self):
        for index in range(self.branch_count):
            for depth in self.branch(index):
                yield index, float(depth)

    def __len__(self):
        return int(self.depths.size)


# One realization of the allelic partition of the alive population
@dataclass(frozen=True)
class SpectrumSample:
    N: int
    Z0: int
    A: dict = field(default_factory=dict)

    def count(self, k):
        return self.A.get(k, 0)

    @property
    def families(self):
        return sum(self.A.values())

    @property
    def is_conserved(self):
        return self.Z0 + sum(k * c for k, c in self.A.items()) == self.N

    @property
    def spectrum_text(self):
        return ' '.join(f'{k}:{self.A[k]}' for k in sorted(self.A))

    @classmethod
    def parse_spectrum(cls, text):
        if not isinstance(text, str) or not text.strip():
            return {}
        return {int(k): int(c) for k, c in (item.split(':') for item in text.split())}


# Individual of the forward simulator
@dataclass
class IndividualRecord:
    id: int
    parent: int
    birth: float
    death: float
    type: int

    def __repr__(self):
        return f'<Individual {self.id} born {self.birth:.4g}>'


# Result of a forward run; sample is None when the run overflowed the cap
@dataclass(frozen=True)
class ForwardOutcome:
    sample: Optional[SpectrumSample]
    survived: bool
    overflow: bool
    records: tuple = ()


# Infinite-descent counts at checkpoints of one forward run
@dataclass(frozen=True)
class DescentOutcome:
    counts: np.ndarray
    survived: bool
    overflow: bool


# Grids and numerical controls shared by the moment formulas
@dataclass(frozen=True, eq=False)
class MomentContext:
    params: ModelParams
    gridW: ScaleGrid
    gridWtheta: ScaleGrid
    quadrature_points: int
    nested_points: int
    series_radius: float
    series_length: int
    tail_tolerance: float
    max_joint_length: int
    weighted_integral: np.ndarray = field(repr=False, default=None)
    weighted_square_integral: np.ndarray = field(repr=False, default=None)
    memo: dict = field(default_factory=dict, repr=False)

    @property
    def theta(self):
        return self.params.theta

    @property
    def horizon(self):
        return min(self.gridW.horizon, self.gridWtheta.horizon)


# Parameters of the almost-sure limits of N_t and A(k, t)
@dataclass(frozen=True)
class LimitDescriptor:
    alpha: float
    psi_prime_alpha: float
    constants: np.ndarray
    scales: np.ndarray


# One validation experiment
@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    times: tuple = (2.0,)
    reps: int = Config.DEFAULT_REPS
    seed: int = Config.DEFAULT_SEED
    checks: tuple = tuple(Check)
    grid_step: float = Config.GRID_STEP
    horizon: Optional[float] = None
    quadrature_points: int = Config.QUADRATURE_POINTS
    nested_points: int = Config.NESTED_POINTS
    workers: int = Config.WORKERS
    out_dir: Optional[str] = None
    kmax: int = Config.DEFAULT_KMAX
    cap: int = Config.POPULATION_CAP
    forward_reps: int = Config.FORWARD_REPS
    descent_reps: int = Config.DESCENT_REPS
    converge_reps: int = Config.CONVERGE_REPS
    asymptotic_reps: int = Config.ASYMPTOTIC_REPS
    converge_times: tuple = Config.CONVERGE_TIMES
    graft_depth: Optional[float] = None
    batch_size: int = Config.BATCH_SIZE

    @property
    def grid_horizon(self):
        if self.horizon is not None:
            return self.horizon
        return Config.HORIZON_FACTOR * max(self.times)

    @property
    def dry_run(self):
        return self.reps == 0


# Theory against Monte Carlo for one quantity
@dataclass(frozen=True)
class ComparisonReport:
    check: str
    quantity: str
    t: Optional[float] = None
    theory: Optional[float] = None
    estimate: Optional[float] = None
    std_error: Optional[float] = None
    statistic: Optional[float] = None
    p_value: Optional[float] = None
    replicas: int = 0
    passed: Optional[bool] = None

    @property
    def z(self):
        if self.estimate is None or self.theory is None or not self.std_error:
            return None
        return (self.estimate - self.theory) / self.std_error

    def __repr__(self):
        return f'<ComparisonReport {self.check}:{self.quantity} passed={self.passed}>'


# One row of a convergence study
@dataclass(frozen=True)
class ConvergenceRow:
    t: float
    quantity: str
    estimate: Optional[float]
    std_error: Optional[float]
    theory: Optional[float]
    asymptote: Optional[float]
    replicas: int
