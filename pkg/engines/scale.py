"""Scale functions W and W_theta, their inverses and tails, and the constants c_k.

W solves the renewal (Volterra second-kind) equation

    W(t) = 1 + int_0^t W(t - s) b P(V > s) ds,

whose Laplace transform is 1/psi. W_theta solves the same equation with P(V > s)
replaced by exp(-theta s) P(V > s), the survival function of min(V, Exp(theta)).
"""
import functools
import logging
import math

import numpy as np
from scipy import integrate

from config import Config
from models import (
    LifespanKind, ScaleGrid, malthusian_alpha, psi, psi_derivative, psi_theta_derivative,
    non_extinction_probability,
)
from utils.errors import ConfigurationError, DomainError, SupercriticalityError
from utils.helpers import scalar_or_array

logger = logging.getLogger(__name__)


def _march_renewal(kernel, forcing, step):
    """Trapezoidal marching for x = forcing + kernel * x on a uniform grid."""
    diagonal = 1.0 - 0.5 * step * kernel[0]
    if diagonal <= 0.0:
        raise ConfigurationError(f"grid step {step} too coarse for kernel value {kernel[0]}")

    size = kernel.size
    last = size - 1
    reversed_kernel = np.ascontiguousarray(kernel[::-1])
    values = np.empty(size)
    values[0] = forcing[0]
    for n in range(1, size):
        history = np.dot(reversed_kernel[last - n + 1:last], values[1:n])
        values[n] = (forcing[n] + step * (0.5 * kernel[n] * values[0] + history)) / diagonal
    return values


def _kernel_survival(params, nodes, clonal):
    # average of P(V > s) and P(V >= s) keeps second order at an atom sitting on a node
    survival = 0.5 * (params.lifespan.survival(nodes) + params.lifespan.left_survival(nodes))
    if clonal:
        survival = survival * np.exp(-params.theta * nodes)
    return survival


def build_scale_grid(params, h, T, clonal=False):
    """Tabulate W (or W_theta when clonal) on [0, T] with step h."""
    if not h > 0:
        raise ConfigurationError(f"grid step must be > 0, got {h}")
    if T < h:
        raise ConfigurationError(f"horizon {T} shorter than step {h}")
    size = int(math.ceil(T / h - 1e-9))
    if size > Config.MAX_GRID_NODES:
        raise ConfigurationError(f"grid too large: {size} nodes (limit {Config.MAX_GRID_NODES})")

    nodes = np.arange(size + 1) * h
    kernel = params.b * _kernel_survival(params, nodes, clonal)
    values = _march_renewal(kernel, np.ones(size + 1), h)

    alpha = malthusian_alpha(params)
    if clonal and params.theta > 0:
        alpha = max(alpha - params.theta, 0.0)
        psi_prime_alpha = psi_theta_derivative(params, alpha)
    else:
        psi_prime_alpha = psi_derivative(params, alpha)
    horizon = size * h
    tail_coefficient = values[-1] * math.exp(-alpha * horizon)

    logger.info("Built %s grid: h=%g T=%g M=%d alpha=%.6g",
                'W_theta' if clonal else 'W', h, horizon, size, alpha)
    return ScaleGrid(
        params=params,
        step=h,
        horizon=horizon,
        values=values,
        alpha=alpha,
        psi_prime_alpha=psi_prime_alpha,
        tail_coefficient=tail_coefficient,
        clonal=clonal,
    )


def _clonal_tail(grid):
    """(limit, rate, slope) of a W_theta grid whose tail does not grow exponentially.

    theta > alpha: W_theta rises to theta/psi(theta), its gap closing at rate theta - alpha.
    theta = alpha: W_theta grows linearly with slope alpha/psi'(alpha).
    """
    params = grid.params
    alpha = malthusian_alpha(params)
    rate = params.theta - alpha
    if rate <= 0.0:
        return None, 0.0, alpha / psi_derivative(params, alpha)
    limit = max(params.theta / psi(params, params.theta), float(grid.values[-1]))
    return limit, rate, 0.0


def _tail_values(grid, excess):
    """W at horizon + excess beyond the grid"""
    last = grid.values[-1]
    if grid.alpha > 0:
        return last * np.exp(grid.alpha * excess)
    if not (grid.clonal and grid.params.theta > 0):
        raise SupercriticalityError("tail extension requires supercritical")
    limit, rate, slope = _clonal_tail(grid)
    if limit is None:
        return last + slope * excess
    return limit - (limit - last) * np.exp(-rate * excess)


def _tail_inverse(grid, targets):
    """Excess beyond the horizon at which the tail reaches targets; inf past a bounded limit"""
    last = grid.values[-1]
    if grid.alpha > 0:
        with np.errstate(divide='ignore'):
            return np.log(targets / last) / grid.alpha
    if not (grid.clonal and grid.params.theta > 0):
        raise SupercriticalityError("tail extension requires supercritical")
    limit, rate, slope = _clonal_tail(grid)
    if limit is None:
        return (targets - last) / slope
    gap = limit - last
    with np.errstate(divide='ignore', invalid='ignore'):
        excess = -np.log((limit - targets) / gap) / rate if gap > 0 else np.full(targets.shape, np.inf)
    return np.where(targets < limit, excess, np.inf)


def eval_W(grid, s):
    """W(s): linear interpolation on the grid, extended past the horizon by its asymptote.

    W and a growing W_theta extend exponentially; a bounded W_theta approaches theta/psi(theta).
    """
    points = np.asarray(s, dtype=float)
    if np.any(points < 0):
        raise DomainError("scale function requires s >= 0")
    result = np.interp(points, grid.nodes, grid.values)
    beyond = points > grid.horizon
    if np.any(beyond):
        excess = np.maximum(points - grid.horizon, 0.0)
        result = np.where(beyond, _tail_values(grid, excess), result)
    return scalar_or_array(result, s)


def invert_W(grid, y):
    """s with W(s) = y, by bisection on the monotone grid plus analytic tail inversion."""
    targets = np.asarray(y, dtype=float)
    if np.any(targets < 1.0):
        raise DomainError("inverse scale function requires y >= 1")
    result = np.interp(targets, grid.values, grid.nodes)
    beyond = targets > grid.values[-1]
    if np.any(beyond):
        tail = grid.horizon + _tail_inverse(grid, np.maximum(targets, grid.values[-1]))
        result = np.where(beyond, tail, result)
    return scalar_or_array(result, y)


@functools.lru_cache(maxsize=16)
def expected_population(grid):
    """f = E[N_t] on the grid nodes, from f = P(V > .) + b f * P(V > .)."""
    if grid.clonal:
        raise DomainError("expected population needs the W grid, not W_theta")
    params = grid.params
    nodes = grid.nodes
    kernel = params.b * _kernel_survival(params, nodes, clonal=False)
    forcing = params.lifespan.survival(nodes)
    return _march_renewal(kernel, np.asarray(forcing, dtype=float), grid.step)


def _check_time(grid, t):
    if t < 0 or t > grid.horizon + 1e-12:
        raise DomainError(f"t={t} outside grid range [0, {grid.horizon}]")


def survival_prob(params, gridW, t):
    """P(N_t > 0) = E[N_t] / W(t)"""
    if params != gridW.params:
        raise DomainError("grid was built for different parameters")
    _check_time(gridW, t)
    f = np.interp(t, gridW.nodes, expected_population(gridW))
    return float(f / eval_W(gridW, t))


def extinction_prob_at(params, gridW, t):
    """P(N_t = 0) = E[W(t - V); V < t] / W(t), summed against the lifespan law."""
    _check_time(gridW, t)
    lifespan = params.lifespan
    if t == 0 or lifespan.kind is LifespanKind.IMMORTAL:
        return 0.0
    if lifespan.kind is LifespanKind.DETERMINISTIC:
        if lifespan.value >= t:
            return 0.0
        return float(eval_W(gridW, t - lifespan.value) / eval_W(gridW, t))

    cells = max(2, int(math.ceil(t / gridW.step)))
    edges = np.linspace(0.0, t, cells + 1)
    mass = -np.diff(lifespan.survival(edges))
    middles = 0.5 * (edges[1:] + edges[:-1])
    return float(np.dot(eval_W(gridW, t - middles), mass) / eval_W(gridW, t))


def survival_ratio(params, gridW, t):
    """P(N_t > 0) / P(non-extinction), which tends to 1"""
    if malthusian_alpha(params) <= 0:
        raise SupercriticalityError()
    return survival_prob(params, gridW, t) / non_extinction_probability(params)


def clonal_scale_asymptote(params, t):
    """Leading behaviour of W_theta(t) as t grows."""
    alpha = malthusian_alpha(params)
    theta = params.theta
    if alpha <= 0 and theta <= 0:
        raise SupercriticalityError()
    if math.isclose(theta, alpha, rel_tol=1e-12):
        return alpha * t / psi_derivative(params, alpha)
    if theta < alpha:
        return math.exp((alpha - theta) * t) * alpha / ((alpha - theta) * psi_derivative(params, alpha))
    return theta / psi(params, theta)


def clonal_decay_rate(params):
    """Exponential decay rate of P_t(Z_0(t) = k)"""
    alpha = malthusian_alpha(params)
    return params.theta if params.theta >= alpha else 2.0 * alpha - params.theta


@functools.lru_cache(maxsize=8)
def _constant_grid(params, tol, h):
    cutoff = math.log(1.0 / tol) / params.theta
    step = max(h, cutoff / Config.MAX_CONSTANT_NODES)
    return build_scale_grid(params, step, cutoff, clonal=True)


def _constant_factors(params, tol, h):
    grid = _constant_grid(params, tol, h)
    nodes = grid.nodes
    weight = params.theta * np.exp(-params.theta * nodes)
    return nodes, weight, 1.0 - 1.0 / grid.values


def clonal_constants(params, K, tol=Config.CONSTANT_TOLERANCE, h=Config.GRID_STEP):
    """c_k = int_0^inf theta e^{-theta s} / W_theta(s)^2 (1 - 1/W_theta(s))^(k-1) ds, k = 1..K.

    The integrand is bounded by theta e^{-theta s}, so truncating at log(1/tol)/theta
    leaves a tail below tol.
    """
    if params.theta <= 0:
        raise DomainError("c_k undefined without mutations")
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    nodes, weight, ratio = _constant_factors(params, tol, h)
    density = weight * (1.0 - ratio) ** 2
    powers = ratio[np.newaxis, :] ** np.arange(K)[:, np.newaxis]
    return integrate.trapezoid(density * powers, nodes, axis=1)


def clonal_constants_tail(params, K, tol=Config.CONSTANT_TOLERANCE, h=Config.GRID_STEP):
    """sum_{k > K} k c_k, integrating the closed-form geometric tail"""
    if params.theta <= 0:
        raise DomainError("c_k undefined without mutations")
    nodes, weight, ratio = _constant_factors(params, tol, h)
    return float(integrate.trapezoid(weight * ratio ** K * (K + 1 - K * ratio), nodes))
