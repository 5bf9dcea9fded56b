"""Distributions and factorial moments of the allelic frequency spectrum.

Conventions: every quantity is conditional on N_t > 0. For a base a >= 0 and a span s
the lower tree is the coalescent point process with branch law W(a)/W(a + s); its size N
is the number of ancestors at time t - a of the population alive at t = a + s, and Z is
how many of those ancestors still carry the ancestral type.
"""
import logging
import math

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln

from config import Config
from engines.scale import build_scale_grid, clonal_constants, eval_W
from models import LimitDescriptor, MomentContext
from utils.errors import ConfigurationError, DomainError, SupercriticalityError
from utils.helpers import geometric_quantile, next_power_of_two, scalar_or_array

logger = logging.getLogger(__name__)

# Sub-grid used by the clonal factor of the joint pgf
MAX_PGF_NODES = 2_000


def build_moment_context(params, horizon, step=Config.GRID_STEP,
                         quadrature_points=Config.QUADRATURE_POINTS,
                         nested_points=Config.NESTED_POINTS,
                         series_radius=Config.SERIES_RADIUS,
                         series_length=Config.SERIES_LENGTH,
                         tail_tolerance=Config.TAIL_TOLERANCE,
                         max_joint_length=Config.MAX_JOINT_LENGTH):
    """Build both scale grids on [0, horizon] and the weighted integrals the moments use."""
    if not 0.0 < series_radius < 1.0:
        raise ConfigurationError(f"series radius must lie in (0, 1), got {series_radius}")
    if series_length < 64:
        raise ConfigurationError(f"series length must be >= 64, got {series_length}")
    if quadrature_points < 2 or nested_points < 2:
        raise ConfigurationError("quadrature needs at least 2 points")

    gridW = build_scale_grid(params, step, horizon)
    if params.theta > 0:
        gridWtheta = build_scale_grid(params, step, horizon, clonal=True)
    else:
        gridWtheta = gridW

    nodes = gridW.nodes
    discount = np.exp(-params.theta * nodes)
    weighted = integrate.cumulative_trapezoid(gridW.values * discount, nodes, initial=0.0)
    weighted_square = integrate.cumulative_trapezoid(gridW.values ** 2 * discount, nodes, initial=0.0)

    return MomentContext(
        params=params,
        gridW=gridW,
        gridWtheta=gridWtheta,
        quadrature_points=int(quadrature_points),
        nested_points=int(nested_points),
        series_radius=float(series_radius),
        series_length=int(series_length),
        tail_tolerance=float(tail_tolerance),
        max_joint_length=int(max_joint_length),
        weighted_integral=weighted,
        weighted_square_integral=weighted_square,
    )


def _check_time(ctx, t):
    times = np.asarray(t, dtype=float)
    if np.any(times < 0) or np.any(times > ctx.horizon + 1e-12):
        raise DomainError(f"time outside [0, {ctx.horizon}]")


def _check_index(k, minimum=1):
    if int(k) != k or k < minimum:
        raise DomainError(f"index must be an integer >= {minimum}, got {k}")


# ---- first order ----

def pmf_population(ctx, k, t):
    """P_t(N_t = k), geometric with parameter 1/W(t)"""
    _check_index(k)
    _check_time(ctx, t)
    W = eval_W(ctx.gridW, t)
    return (1.0 / W) * (1.0 - 1.0 / W) ** (k - 1)


def pmf_clonal(ctx, k, t):
    """P_t(Z_0(t) = k): an atom at 0 and a geometric(1/W_theta) tail scaled by e^{-theta t} W / W_theta"""
    _check_index(k, minimum=0)
    _check_time(ctx, t)
    times = np.asarray(t, dtype=float)
    W = np.asarray(eval_W(ctx.gridW, times))
    Wtheta = np.asarray(eval_W(ctx.gridWtheta, times))
    clonal = np.exp(-ctx.theta * times) * W / Wtheta
    if k == 0:
        result = 1.0 - clonal
    else:
        result = clonal / Wtheta * (1.0 - 1.0 / Wtheta) ** (k - 1)
    return scalar_or_array(result, t)


def _mean_cumulative(ctx, k):
    key = ('mean', k)
    if key not in ctx.memo:
        grid = ctx.gridWtheta
        nodes = grid.nodes
        integrand = (ctx.theta * np.exp(-ctx.theta * nodes) / grid.values ** 2
                     * (1.0 - 1.0 / grid.values) ** (k - 1))
        ctx.memo[key] = integrate.cumulative_trapezoid(integrand, nodes, initial=0.0)
    return ctx.memo[key]


def mean_spectrum(ctx, k, t):
    """E_t[A(k, t)] = W(t) int_0^t theta e^{-theta a} / W_theta(a)^2 (1 - 1/W_theta(a))^(k-1) da"""
    _check_index(k)
    _check_time(ctx, t)
    if ctx.theta == 0:
        return scalar_or_array(np.zeros(np.shape(t)), t)
    cumulative = np.interp(t, ctx.gridWtheta.nodes, _mean_cumulative(ctx, k))
    return scalar_or_array(np.asarray(eval_W(ctx.gridW, t)) * cumulative, t)


# ---- joint law of the lower tree ----

def _shifted_scale(ctx, base, span):
    return eval_W(ctx.gridW, base + span) / eval_W(ctx.gridW, base)


def _clonal_factor(ctx, base, span, u):
    """e^{-theta s} W~(s, u) + theta int_0^s W~(r, u) e^{-theta r} dr for complex u"""
    cells = max(2, min(int(math.ceil(span / ctx.gridW.step)), MAX_PGF_NODES))
    r = np.linspace(0.0, span, cells + 1)
    shifted = eval_W(ctx.gridW, base + r) / eval_W(ctx.gridW, base)
    flat = np.ravel(u)[:, np.newaxis]
    tilted = shifted / (shifted - flat * (shifted - 1.0))
    integral = integrate.trapezoid(tilted * np.exp(-ctx.theta * r), r, axis=1)
    factor = math.exp(-ctx.theta * span) * tilted[:, -1] + ctx.theta * integral
    return factor.reshape(np.shape(u))


def joint_pgf(ctx, a, s, u, v):
    """E[u^N v^Z] for the lower tree of base a and span s.

    Written with (1 - v)/(v + B(u)(1 - v)) so that v = 1 is the removable limit
    F(u, 1) = u W~(s, u) / W~(s).
    """
    if a < 0 or s < 0:
        raise DomainError("base and span must be >= 0")
    _check_time(ctx, a + s)
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    tilde = _shifted_scale(ctx, a, s)
    if tilde > 1.0 and np.any(np.abs(u) >= tilde / (tilde - 1.0)):
        raise DomainError(f"u outside the analyticity disc |u| < {tilde / (tilde - 1.0):g}")

    tilted = tilde / (tilde - u * (tilde - 1.0))
    factor = _clonal_factor(ctx, a, s, u)
    ratio = (1.0 - v) / (v + factor * (1.0 - v))
    value = u * tilted / tilde * (1.0 - math.exp(-ctx.theta * s) * tilted * ratio)
    if value.ndim == 0:
        return complex(value)
    return value


def joint_pmf(ctx, a, t):
    """Table p[n, z] = P(N = n, Z = z) of the lower tree at base a, horizon t.

    Coefficients come from the pgf on a torus of scaled roots of unity. n_max is the
    (1 - 1e-10) quantile of the geometric law of N.
    """
    if not 0 <= a <= t:
        raise DomainError(f"base a={a} must lie in [0, {t}]")
    _check_time(ctx, t)
    span = t - a
    p = float(eval_W(ctx.gridW, a) / eval_W(ctx.gridW, t))
    n_max = geometric_quantile(p, 1e-10)
    if n_max + 1 > ctx.max_joint_length:
        raise ConfigurationError(
            f"joint pmf needs {n_max + 1} coefficients (limit {ctx.max_joint_length})")

    size = max(ctx.series_length, next_power_of_two(n_max + 1))
    radius = ctx.series_radius ** (ctx.series_length / size)
    aliasing = radius ** size * (1.0 - p) ** (size - 1)
    if aliasing > Config.ALIASING_TOLERANCE:
        raise ConfigurationError(f"aliasing bound {aliasing:.3g} exceeds {Config.ALIASING_TOLERANCE:g}")
    logger.debug("joint pmf a=%g t=%g: n_max=%d transform=%d radius=%.6g", a, t, n_max, size, radius)

    roots = radius * np.exp(2j * np.pi * np.arange(size) / size)
    values = joint_pgf(ctx, a, span, roots[:, np.newaxis], roots[np.newaxis, :])
    coefficients = np.fft.fft2(values).real / size ** 2
    index = np.arange(n_max + 1)
    table = coefficients[:n_max + 1, :n_max + 1] / radius ** (index[:, np.newaxis] + index[np.newaxis, :])

    lowest = table.min()
    if lowest < -Config.NEGATIVE_TOLERANCE:
        logger.warning("joint pmf a=%g t=%g: clamping coefficient %.3g", a, t, lowest)
    return np.clip(table, 0.0, None)


def lower_profile(ctx, base, span):
    """(q_z, m_z) = (P(Z = z), E[N; Z = z]) of the lower tree, z = 0, 1, ...

    Both are coefficient sequences of rational functions of v, so they are written in
    closed form and truncated once the geometric tail drops below the tail tolerance.
    """
    if base < 0 or span < 0:
        raise DomainError("base and span must be >= 0")
    _check_time(ctx, base + span)
    theta = ctx.theta
    nodes = ctx.gridW.nodes
    end = base + span
    Wa = eval_W(ctx.gridW, base)
    tilde = eval_W(ctx.gridW, end) / Wa
    discount = math.exp(-theta * span)

    first = np.interp(end, nodes, ctx.weighted_integral) - np.interp(base, nodes, ctx.weighted_integral)
    second = (np.interp(end, nodes, ctx.weighted_square_integral)
              - np.interp(base, nodes, ctx.weighted_square_integral))
    lift = math.exp(theta * base) / Wa
    factor = discount * tilde + theta * lift * first
    factor_slope = discount * tilde * (tilde - 1.0) + theta * (lift / Wa * second - lift * first)

    factor = max(factor, 1.0)
    ratio = (factor - 1.0) / factor
    length = geometric_quantile(1.0 - ratio, ctx.tail_tolerance * (1.0 - ratio)) + 2
    if length > Config.MAX_PROFILE_LENGTH:
        raise ConfigurationError(f"lower profile needs {length} terms")

    z = np.arange(length)
    powers = ratio ** np.maximum(z - 1, 0)
    # h(v) = (1 - v)/(v + B (1 - v)) and its square
    h = np.where(z == 0, 1.0 / factor, -powers / factor ** 2)
    series = (z + 1) * ratio ** z
    h_square = series.copy()
    h_square[1:] -= 2.0 * series[:-1]
    h_square[2:] += series[:-2]
    h_square /= factor ** 2

    q = -discount * tilde * h
    q[0] += 1.0
    slope = -discount * (tilde * (tilde - 1.0) * h - tilde * factor_slope * h_square)
    m = tilde * q + slope
    return q, m


def clonal_composition_matrix(ctx, a, zmax, lmax):
    """g[z, l]: probability that z i.i.d. copies of Z_0(a) sum to l.

    Z_0(a) is zero with probability q0 and otherwise geometric(1/W_theta(a)) on {1, ...};
    j nonzero parts sum to j plus a negative binomial(j, 1/W_theta(a)) count.
    """
    _check_time(ctx, a)
    nonzero = min(max(1.0 - pmf_clonal(ctx, 0, a), 0.0), 1.0)
    success = 1.0 / eval_W(ctx.gridWtheta, a)
    z = np.arange(zmax + 1)[:, np.newaxis]
    parts = np.arange(lmax + 1)
    binomial = stats.binom.pmf(parts[np.newaxis, :], z, nonzero)

    totals = np.arange(lmax + 1)[np.newaxis, :]
    negative = np.zeros((lmax + 1, lmax + 1))
    negative[0, 0] = 1.0
    if lmax:
        negative[1:, :] = stats.nbinom.pmf(totals - parts[1:, np.newaxis], parts[1:, np.newaxis], success)
    return binomial @ negative


def clonal_composition_pmf(ctx, a, z, l):
    """g_l(z)"""
    _check_index(z, minimum=0)
    _check_index(l, minimum=0)
    return float(clonal_composition_matrix(ctx, a, z, l)[z, l])


# ---- mixed and second-order moments ----

def _mixed_terms(ctx, t, lmax, points):
    """Integrand of the mixed means without its theta P_a(Z_0(a) = k) weight, on a in [0, t].

    Row i holds E[(N - Z) g_l(Z) + Z g_l(Z - 1)] for the lower tree at base nodes[i].
    """
    key = ('terms', float(t), int(points), int(lmax))
    if key in ctx.memo:
        return ctx.memo[key]
    nodes = np.linspace(0.0, t, points)
    terms = np.zeros((points, lmax + 1))
    for i, a in enumerate(nodes):
        q, m = lower_profile(ctx, a, t - a)
        z = np.arange(q.size)
        composition = clonal_composition_matrix(ctx, a, q.size - 1, lmax)
        terms[i] = (m - z * q) @ composition + (z * q)[1:] @ composition[:-1]
    ctx.memo[key] = nodes, terms
    return nodes, terms


def mixed_mean_row(ctx, k, t, lmax, points=None):
    """E_t[A(k, t); Z_0(t) = l] for l = 0..lmax"""
    _check_index(k)
    _check_index(lmax, minimum=0)
    _check_time(ctx, t)
    if ctx.theta == 0 or t == 0:
        return np.zeros(lmax + 1)
    nodes, terms = _mixed_terms(ctx, t, lmax, points or ctx.quadrature_points)
    weights = ctx.theta * np.asarray(pmf_clonal(ctx, k, nodes))
    return integrate.trapezoid(weights[:, np.newaxis] * terms, nodes, axis=0)


def mixed_mean(ctx, k, l, t, points=None):
    """E_t[A(k, t) 1{Z_0(t) = l}]"""
    _check_index(l, minimum=0)
    return float(mixed_mean_row(ctx, k, t, l, points)[l])


def _nested_mixed(ctx, t, k, l):
    """mixed_mean(k, l, a) on the nested grid of a in [0, t]"""
    key = ('nested', float(t), ctx.nested_points, k, l)
    if key not in ctx.memo:
        nodes = np.linspace(0.0, t, ctx.nested_points)
        lmax = max(k, l)
        ctx.memo[key] = np.array([
            mixed_mean_row(ctx, k, a, lmax, ctx.nested_points)[l] for a in nodes
        ])
    return ctx.memo[key]


def _lower_moments(ctx, nodes, t):
    """E_t[N^(t)] and E_t[N^(t)(N^(t) - 1)] at each base a, N^(t) geometric(W(a)/W(t))"""
    ratio = eval_W(ctx.gridW, t) / np.asarray(eval_W(ctx.gridW, nodes))
    return ratio, 2.0 * ratio ** 2 * (1.0 - 1.0 / ratio)


def second_order(ctx, k, l, t):
    """E_t[A(k, t) A(l, t)] for k != l, E_t[A(k, t)(A(k, t) - 1)] for k == l"""
    _check_index(k)
    _check_index(l)
    _check_time(ctx, t)
    if ctx.theta == 0 or t == 0:
        return 0.0
    nodes = np.linspace(0.0, t, ctx.nested_points)
    mean, factorial = _lower_moments(ctx, nodes, t)
    pk = np.asarray(pmf_clonal(ctx, k, nodes))
    pl = np.asarray(pmf_clonal(ctx, l, nodes))
    mean_k = np.asarray(mean_spectrum(ctx, k, nodes))
    mean_l = np.asarray(mean_spectrum(ctx, l, nodes))

    integrand = ctx.theta * (
        factorial * (pk * mean_l + pl * mean_k)
        + mean * (_nested_mixed(ctx, t, l, k) + _nested_mixed(ctx, t, k, l))
    )
    return float(integrate.trapezoid(integrand, nodes))


def spectrum_covariance(ctx, k, l, t):
    """Cov_t(A(k, t), A(l, t))"""
    mean_k = mean_spectrum(ctx, k, t)
    mean_l = mean_spectrum(ctx, l, t)
    value = second_order(ctx, k, l, t) - mean_k * mean_l
    return value + mean_k if k == l else value


def product_with_population_terms(ctx, k, t, points=None):
    """The two integral terms of E_t[A(k, t) N_t]."""
    _check_index(k)
    _check_time(ctx, t)
    if ctx.theta == 0 or t == 0:
        return 0.0, 0.0
    nodes = np.linspace(0.0, t, points or ctx.quadrature_points)
    mean, factorial = _lower_moments(ctx, nodes, t)
    pk = np.asarray(pmf_clonal(ctx, k, nodes))
    first = ctx.theta * factorial * np.asarray(eval_W(ctx.gridW, nodes)) * pk

    # E_a[N_a; Z_0(a) = k] from the full tree at horizon a
    population = np.zeros(nodes.size)
    for i, a in enumerate(nodes):
        _, m = lower_profile(ctx, 0.0, a)
        if k < m.size:
            population[i] = m[k]
    second = ctx.theta * mean * population
    return float(integrate.trapezoid(first, nodes)), float(integrate.trapezoid(second, nodes))


def product_with_population(ctx, k, t, points=None):
    """E_t[A(k, t) N_t]"""
    first, second = product_with_population_terms(ctx, k, t, points)
    return first + second


# ---- geometric moments and asymptotics ----

def geometric_factorial_moment(p, r):
    """E[N(N-1)...(N-r+1)] = r! (1-p)^(r-1) / p^r for N geometric(p) on {1, 2, ...}"""
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p must lie in (0, 1], got {p}")
    _check_index(r)
    if p == 1.0:
        return 1.0 if r == 1 else 0.0
    return math.factorial(r) * (1.0 - p) ** (r - 1) / p ** r


def _require_growth(ctx):
    if ctx.gridW.alpha <= 0:
        raise SupercriticalityError()


def asymptotic_factorial_moment(ctx, ks, ns, t):
    """W(t)^|n| |n|! / prod n_i! prod c_{k_i}^{n_i}"""
    _require_growth(ctx)
    ks = [int(k) for k in ks]
    ns = [int(n) for n in ns]
    if len(ks) != len(ns) or not ks:
        raise DomainError("ks and ns must be nonempty and of equal length")
    if any(n < 1 for n in ns):
        raise DomainError("all orders must be >= 1")
    for k in ks:
        _check_index(k)
    constants = clonal_constants(ctx.params, max(ks), h=ctx.gridW.step)
    order = sum(ns)
    log_value = (order * math.log(eval_W(ctx.gridW, t)) + gammaln(order + 1)
                 - sum(gammaln(n + 1) for n in ns)
                 + sum(n * math.log(constants[k - 1]) for k, n in zip(ks, ns)))
    return math.exp(log_value)


def lln_descriptor(ctx, kmax=Config.DEFAULT_KMAX):
    """alpha, psi'(alpha) and the scales c_k / psi'(alpha) of the limits of e^{-alpha t} A(k, t)"""
    _require_growth(ctx)
    if ctx.theta <= 0:
        raise DomainError("limit constants need theta > 0")
    constants = clonal_constants(ctx.params, kmax, h=ctx.gridW.step)
    alpha = ctx.gridW.alpha
    slope = ctx.gridW.psi_prime_alpha
    return LimitDescriptor(alpha=alpha, psi_prime_alpha=slope, constants=constants, scales=constants / slope)


def l2_error_exact(ctx, k, t, constant=None):
    """E_t[(c_k N_t - A(k, t))^2]"""
    if constant is None:
        constant = float(clonal_constants(ctx.params, k, h=ctx.gridW.step)[k - 1])
    W = eval_W(ctx.gridW, t)
    mean = mean_spectrum(ctx, k, t)
    square = second_order(ctx, k, k, t) + mean
    return constant ** 2 * (2.0 * W ** 2 - W) - 2.0 * constant * product_with_population(ctx, k, t) + square


def l2_error_asymptote(ctx, k, t, constant=None):
    """Leading term 2 W(t)^2 (c_k - E_t[A(k, t)]/W(t))^2 of the L2 error"""
    if constant is None:
        constant = float(clonal_constants(ctx.params, k, h=ctx.gridW.step)[k - 1])
    W = eval_W(ctx.gridW, t)
    return 2.0 * W ** 2 * (constant - mean_spectrum(ctx, k, t) / W) ** 2
