"""Replica-parallel Monte Carlo and the theory-versus-simulation battery."""
import concurrent.futures as cf
import logging
import math

import numpy as np
from scipy import integrate

from config import Config
from engines import cpp, forward, moments, scale
from models import (
    Check, ComparisonReport, ConvergenceRow, LifespanKind, non_extinction_probability, psi,
)
from utils.errors import ConfigurationError, InsufficientSamplesError, SupercriticalityError
from utils.helpers import geometric_quantile
from utils.pagination import paginate
from utils.statistics import (
    binomial_z, geometric_to_exponential, gof_discrete, gof_geometric, ks_exponential, ks_statistic,
    mean_and_se, total_variation, two_sample_chisquare, welch_z,
)
from utils.streams import Stream, replica_rng

logger = logging.getLogger(__name__)

# Indices k, l of the mixed and second-order comparisons
PAIR_INDICES = (1, 2)
FORWARD_SPECTRUM = 4


def run_replicas(worker, total, *args, seed, stream, substream=0, workers=1,
                 batch_size=Config.BATCH_SIZE):
    """Call worker(*args, batch, seed=, stream=, substream=) on consecutive replica batches.

    Batches are concatenated in replica order, so the result is the same for any
    number of workers.
    """
    batches = paginate(total, batch_size)
    if not batches:
        raise ConfigurationError("no replicas to run")
    options = {'seed': seed, 'stream': stream, 'substream': substream}
    if workers <= 1 or len(batches) == 1:
        parts = [worker(*args, batch, **options) for batch in batches]
    else:
        with cf.ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(worker, *args, batch, **options) for batch in batches]
            parts = [future.result() for future in futures]
    return np.concatenate(parts)


# ---- batch workers (module level so the process pool can pickle them) ----

def spectrum_batch(gridW, t, theta, kmax, batch, *, seed, stream, substream=0):
    """Rows [N, Z0, conserved, A(1), ..., A(kmax)] of CPP replicas at t"""
    rows = np.zeros((len(batch), 3 + kmax), dtype=np.int64)
    for row, replica in zip(rows, batch):
        sample = cpp.sample_spectrum(gridW, t, theta, replica_rng(seed, replica, stream, substream))
        row[0], row[1], row[2] = sample.N, sample.Z0, sample.is_conserved
        row[3:] = [sample.count(k) for k in range(1, kmax + 1)]
    return rows


def sample_batch(gridW, t, theta, batch, *, seed, stream, substream=0):
    """SpectrumSample objects of CPP replicas at t"""
    samples = np.empty(len(batch), dtype=object)
    for i, replica in enumerate(batch):
        samples[i] = cpp.sample_spectrum(gridW, t, theta, replica_rng(seed, replica, stream, substream))
    return samples


def outcome_batch(params, t, cap, batch, *, seed, stream, substream=0):
    """ForwardOutcome objects of forward replicas at t"""
    outcomes = np.empty(len(batch), dtype=object)
    for i, replica in enumerate(batch):
        outcomes[i] = forward.simulate_forward(params, t, cap, replica_rng(seed, replica, stream, substream))
    return outcomes


def forward_batch(params, t, cap, kmax, batch, *, seed, stream, substream=0):
    """Rows [survived, overflow, N, Z0, A(1), ..., A(kmax)]; overflowing runs carry -1 counts"""
    rows = np.full((len(batch), 4 + kmax), -1, dtype=np.int64)
    for row, replica in zip(rows, batch):
        outcome = forward.simulate_forward(params, t, cap, replica_rng(seed, replica, stream, substream))
        row[0], row[1] = outcome.survived, outcome.overflow
        if outcome.sample is not None:
            row[2], row[3] = outcome.sample.N, outcome.sample.Z0
            row[4:] = [outcome.sample.count(k) for k in range(1, kmax + 1)]
    return rows


def lower_batch(gridW, a, t, theta, batch, *, seed, stream, substream=0):
    """Pairs (N^(t)_{t-a}, Z_0^(t)(a))"""
    pairs = np.zeros((len(batch), 2), dtype=np.int64)
    for row, replica in zip(pairs, batch):
        row[:] = cpp.sample_lower_joint(gridW, a, t, theta, replica_rng(seed, replica, stream, substream))
    return pairs


def graft_batch(gridW, a, t, batch, *, seed, stream, substream=0):
    """Rows [size of the grafted CPP, number of lower branches]"""
    rows = np.zeros((len(batch), 2), dtype=np.int64)
    for row, replica in zip(rows, batch):
        grafted, lower = cpp.graft(gridW, a, t, replica_rng(seed, replica, stream, substream))
        row[:] = grafted.size, lower
    return rows


def descent_batch(params, checkpoint, T, cap, batch, *, seed, stream, substream=0):
    """Rows [survived at T, overflow, count at the checkpoint]"""
    rows = np.zeros((len(batch), 3), dtype=np.int64)
    for row, replica in zip(rows, batch):
        outcome = forward.infinite_descent_counts(
            params, [checkpoint], T, replica_rng(seed, replica, stream, substream), cap)
        row[:] = outcome.survived, outcome.overflow, outcome.counts[0]
    return rows


def lower_size_batch(gridW, span, base, batch, *, seed, stream, substream=0):
    """Sizes of lower CPPs of the given base, i.e. N^(base + span)_span"""
    sizes = np.zeros(len(batch), dtype=np.int64)
    for i, replica in enumerate(batch):
        sizes[i] = cpp.sample_cpp(gridW, span, replica_rng(seed, replica, stream, substream), base=base).size
    return sizes


def residual_batch(params, t, batch, *, seed, stream, substream=0):
    """Overshoot of the leftmost individual alive at t, NaN when the population died out"""
    first = np.full(len(batch), np.nan)
    for i, replica in enumerate(batch):
        overshoots = forward.residual_lifetimes(params, t, replica_rng(seed, replica, stream, substream))
        if overshoots.size:
            first[i] = overshoots[0]
    return first


# ---- report rows ----

def _z_row(check, quantity, t, theory, values):
    if values is None:
        return ComparisonReport(check=check.value, quantity=quantity, t=t, theory=theory)
    estimate, se = mean_and_se(values)
    z = welch_z(estimate, se, theory)
    return ComparisonReport(
        check=check.value, quantity=quantity, t=t, theory=theory, estimate=estimate, std_error=se,
        statistic=z, replicas=int(np.size(values)), passed=bool(abs(z) < Config.Z_THRESHOLD),
    )


def _p_row(check, quantity, t, test, *arguments, replicas=0):
    if test is None:
        return ComparisonReport(check=check.value, quantity=quantity, t=t)
    try:
        p_value = test(*arguments)
    except InsufficientSamplesError as error:
        logger.warning("%s %s: %s", check.value, quantity, error)
        return ComparisonReport(check=check.value, quantity=quantity, t=t, replicas=replicas)
    return ComparisonReport(
        check=check.value, quantity=quantity, t=t, p_value=p_value, replicas=replicas,
        passed=bool(p_value > Config.P_THRESHOLD),
    )


def _identity_row(check, quantity, t, expected, computed, tolerance=Config.IDENTITY_TOLERANCE, relative=True):
    gap = abs(computed - expected)
    if relative and expected:
        gap /= abs(expected)
    return ComparisonReport(
        check=check.value, quantity=quantity, t=t, theory=expected, estimate=computed,
        statistic=gap, passed=bool(gap <= tolerance),
    )


def _trend_row(check, quantity, values):
    """Passes when values strictly decrease"""
    values = [v for v in values if v is not None]
    decreasing = len(values) > 1 and all(b < a for a, b in zip(values, values[1:]))
    return ComparisonReport(check=check.value, quantity=quantity, passed=decreasing if values else None)


class ValidationRun:
    """Theory contexts and shared Monte Carlo samples of one validation experiment."""

    def __init__(self, config):
        self.config = config
        self.params = config.params
        self.sampling = not config.dry_run
        self.ctx = moments.build_moment_context(
            self.params, config.grid_horizon, step=config.grid_step,
            quadrature_points=config.quadrature_points, nested_points=config.nested_points,
        )
        self.kmax = max(config.kmax, max(PAIR_INDICES))
        self._spectra = {}
        self._long_ctx = None

    @property
    def gridW(self):
        return self.ctx.gridW

    @property
    def long_ctx(self):
        """Context covering the long horizons of the asymptotic and limit checks"""
        if self._long_ctx is None:
            horizon = max(Config.LIMIT_TIME, Config.ASYMPTOTIC_MEAN_TIME,
                          max(Config.ASYMPTOTIC_TIMES), max(self.config.converge_times))
            self._long_ctx = moments.build_moment_context(
                self.params, horizon, step=self.config.grid_step,
                quadrature_points=self.config.quadrature_points,
                nested_points=self.config.nested_points,
            )
        return self._long_ctx

    def replicas(self, worker, total, *args, stream, substream=0):
        return run_replicas(
            worker, total, *args, seed=self.config.seed, stream=stream, substream=substream,
            workers=self.config.workers, batch_size=self.config.batch_size,
        )

    def spectra(self, index, t):
        """CPP spectrum rows at times[index], sampled once and shared by the checks"""
        if not self.sampling:
            return None
        if index not in self._spectra:
            logger.info("Sampling %d CPP replicas at t=%g", self.config.reps, t)
            self._spectra[index] = self.replicas(
                spectrum_batch, self.config.reps, self.gridW, t, self.params.theta, self.kmax,
                stream=Stream.CPP, substream=index,
            )
        return self._spectra[index]

    # ---- per-time checks ----

    def check_population(self, index, t):
        name = 'N_t geometric(1/W(t))'
        rows = self.spectra(index, t)
        if rows is None:
            return [_p_row(Check.POPULATION, name, t, None)]
        W = scale.eval_W(self.gridW, t)
        return [_p_row(Check.POPULATION, name, t, gof_geometric, rows[:, 0], 1.0 / W, replicas=len(rows))]

    def check_clonal(self, index, t):
        name = 'Z_0(t) clonal pmf'
        rows = self.spectra(index, t)
        if rows is None:
            return [_p_row(Check.CLONAL, name, t, None)]
        size = geometric_quantile(1.0 / scale.eval_W(self.ctx.gridWtheta, t), 1e-12)
        probabilities = np.array([moments.pmf_clonal(self.ctx, k, t) for k in range(size + 1)])
        return [_p_row(Check.CLONAL, name, t, gof_discrete, rows[:, 1], probabilities, replicas=len(rows))]

    def check_means(self, index, t):
        rows = self.spectra(index, t)
        reports = []
        for k in range(1, self.config.kmax + 1):
            theory = moments.mean_spectrum(self.ctx, k, t)
            reports.append(_z_row(Check.MEANS, f'E[A({k})]', t, theory,
                                  None if rows is None else rows[:, 2 + k]))
        if rows is not None:
            conserved = bool(rows[:, 2].all())
            reports.append(ComparisonReport(
                check=Check.MEANS.value, quantity='conservation Z0 + sum k A(k) = N', t=t,
                estimate=float(rows[:, 2].mean()), replicas=len(rows), passed=conserved,
            ))
        return reports

    def check_identities(self, index, t):
        ctx, params = self.ctx, self.params
        W = scale.eval_W(ctx.gridW, t)
        Wtheta = scale.eval_W(ctx.gridWtheta, t)
        size = min(geometric_quantile(1.0 / Wtheta, 1e-13), 20_000)
        reports = [
            _identity_row(Check.IDENTITIES, 'P(N_t>0) + P(N_t=0)', t, 1.0,
                          scale.survival_prob(params, ctx.gridW, t) + scale.extinction_prob_at(params, ctx.gridW, t)),
            _identity_row(Check.IDENTITIES, 'E[Z_0(t)]', t, math.exp(-params.theta * t) * W,
                          sum(k * moments.pmf_clonal(ctx, k, t) for k in range(1, size + 1))),
        ]
        if params.theta > 0:
            total = sum(k * moments.mean_spectrum(ctx, k, t) for k in range(1, size + 1))
            reports.append(_identity_row(Check.IDENTITIES, 'sum k E[A(k)]', t,
                                         W * (1.0 - math.exp(-params.theta * t)), total, tolerance=1e-3))
            constants = scale.clonal_constants(params, self.config.kmax, h=ctx.gridW.step)
            weighted = float(np.dot(np.arange(1, constants.size + 1), constants))
            weighted += scale.clonal_constants_tail(params, self.config.kmax, h=ctx.gridW.step)
            reports.append(_identity_row(Check.IDENTITIES, 'sum k c_k', None, 1.0, weighted, tolerance=1e-6))
        if ctx.gridW.alpha > 0:
            x = ctx.gridW.alpha + 3.0
            nodes = ctx.gridW.nodes
            horizon = ctx.gridW.horizon
            transform = integrate.trapezoid(np.exp(-x * nodes) * ctx.gridW.values, nodes)
            # exponential tail beyond the grid
            transform += ctx.gridW.values[-1] * math.exp(-x * horizon) / (x - ctx.gridW.alpha)
            reports.append(_identity_row(Check.IDENTITIES, f'Laplace transform of W at {x:g}', None,
                                         1.0 / psi(params, x), transform))
        return reports

    def check_mixed(self, index, t):
        rows = self.spectra(index, t)
        ctx = self.ctx
        reports = []
        for k in PAIR_INDICES:
            for l in PAIR_INDICES:
                values = None if rows is None else rows[:, 2 + k] * (rows[:, 1] == l)
                reports.append(_z_row(Check.MIXED, f'E[A({k}); Z0={l}]', t,
                                      moments.mixed_mean(ctx, k, l, t), values))
        if ctx.theta > 0:
            lmax = geometric_quantile(1.0 / scale.eval_W(ctx.gridWtheta, t), 1e-10)
            for k in PAIR_INDICES:
                total = float(moments.mixed_mean_row(ctx, k, t, lmax).sum())
                reports.append(_identity_row(Check.MIXED, f'sum_l E[A({k}); Z0=l]', t,
                                             moments.mean_spectrum(ctx, k, t), total))
        return reports

    def check_second_order(self, index, t):
        rows = self.spectra(index, t)
        ctx = self.ctx
        reports = []
        for k in PAIR_INDICES:
            for l in PAIR_INDICES:
                if l < k:
                    continue
                values = None
                if rows is not None:
                    first, second = rows[:, 2 + k], rows[:, 2 + l]
                    values = first * (second - 1) if k == l else first * second
                name = f'E[A({k})(A({k})-1)]' if k == l else f'E[A({k})A({l})]'
                reports.append(_z_row(Check.SECOND_ORDER, name, t, moments.second_order(ctx, k, l, t), values))
        forward_pair = moments.second_order(ctx, 1, 2, t)
        reverse_pair = moments.second_order(ctx, 2, 1, t)
        reports.append(_identity_row(Check.SECOND_ORDER, 'symmetry in (k, l)', t,
                                     forward_pair, reverse_pair, tolerance=0.0, relative=False))
        return reports

    def check_product(self, index, t):
        rows = self.spectra(index, t)
        return [
            _z_row(Check.PRODUCT, f'E[A({k}) N]', t, moments.product_with_population(self.ctx, k, t),
                   None if rows is None else rows[:, 2 + k] * rows[:, 0])
            for k in PAIR_INDICES
        ]

    def _graft_depth(self, t):
        depth = self.config.graft_depth
        if depth is None or not 0 < depth < t:
            depth = 0.5 * t
        return depth

    def check_joint_pmf(self, index, t):
        ctx = self.ctx
        a = self._graft_depth(t)
        table = moments.joint_pmf(ctx, a, t)
        p = scale.eval_W(ctx.gridW, a) / scale.eval_W(ctx.gridW, t)
        n = np.arange(table.shape[0])
        geometric = np.where(n >= 1, p * (1.0 - p) ** np.maximum(n - 1, 0), 0.0)
        reports = [
            _identity_row(Check.JOINT_PMF, f'sum p(n,z) at a={a:g}', t, 1.0, float(table.sum()), tolerance=1e-6),
            _identity_row(Check.JOINT_PMF, f'n-marginal vs geometric at a={a:g}', t, 0.0,
                          float(np.abs(table.sum(axis=1) - geometric).max()), tolerance=1e-6, relative=False),
        ]
        if self.sampling:
            pairs = self.replicas(lower_batch, self.config.reps, ctx.gridW, a, t, ctx.theta,
                                  stream=Stream.LOWER, substream=index)
            distance = total_variation(table, pairs)
            reports.append(ComparisonReport(
                check=Check.JOINT_PMF.value, quantity=f'total variation at a={a:g}', t=t, estimate=distance,
                statistic=distance, replicas=len(pairs), passed=bool(distance < Config.TV_THRESHOLD),
            ))
        else:
            reports.append(ComparisonReport(check=Check.JOINT_PMF.value, quantity=f'total variation at a={a:g}', t=t))
        return reports

    def check_forward(self, index, t):
        params, ctx = self.params, self.ctx
        survival = scale.survival_prob(params, ctx.gridW, t)
        expected = float(np.interp(t, ctx.gridW.nodes, scale.expected_population(ctx.gridW)))
        names = ['survival fraction', 'overflowing runs', 'E[N_t] unconditioned',
                 'N_t forward vs CPP', 'N_t forward geometric(1/W(t))']
        if not self.sampling:
            reports = [ComparisonReport(check=Check.FORWARD.value, quantity=name, t=t) for name in names]
            reports[0] = ComparisonReport(check=Check.FORWARD.value, quantity=names[0], t=t, theory=survival)
            reports[2] = ComparisonReport(check=Check.FORWARD.value, quantity=names[2], t=t, theory=expected)
            return reports + [
                ComparisonReport(check=Check.FORWARD.value, quantity=f'forward E[A({k})]', t=t,
                                 theory=moments.mean_spectrum(ctx, k, t))
                for k in range(1, min(FORWARD_SPECTRUM, self.config.kmax) + 1)
            ]

        logger.info("Running %d forward replicas at t=%g", self.config.forward_reps, t)
        rows = self.replicas(forward_batch, self.config.forward_reps, params, t, self.config.cap, self.kmax,
                             stream=Stream.FORWARD, substream=index)
        complete = rows[rows[:, 1] == 0]
        alive = complete[complete[:, 0] == 1]
        overflow = int(rows[:, 1].sum())
        if overflow:
            logger.warning("%d forward runs overflowed and were excluded", overflow)

        z = binomial_z(int(complete[:, 0].sum()), len(complete), survival)
        reports = [
            ComparisonReport(
                check=Check.FORWARD.value, quantity=names[0], t=t, theory=survival,
                estimate=float(complete[:, 0].mean()), statistic=z, replicas=len(complete),
                passed=bool(abs(z) < Config.Z_THRESHOLD),
            ),
            ComparisonReport(check=Check.FORWARD.value, quantity=names[1], t=t,
                             estimate=float(overflow), replicas=len(rows)),
            _z_row(Check.FORWARD, names[2], t, expected, complete[:, 2]),
        ]
        cpp_rows = self.spectra(index, t)
        reports.append(_p_row(Check.FORWARD, names[3], t, two_sample_chisquare, alive[:, 2], cpp_rows[:, 0],
                              replicas=len(alive)))
        reports.append(_p_row(Check.FORWARD, names[4], t, gof_geometric, alive[:, 2],
                              1.0 / scale.eval_W(ctx.gridW, t), replicas=len(alive)))
        for k in range(1, min(FORWARD_SPECTRUM, self.config.kmax) + 1):
            reports.append(_z_row(Check.FORWARD, f'forward E[A({k})]', t,
                                  moments.mean_spectrum(ctx, k, t), alive[:, 3 + k]))
        return reports

    def check_graft(self, index, t):
        ctx = self.ctx
        a = self._graft_depth(t)
        p = scale.eval_W(ctx.gridW, a) / scale.eval_W(ctx.gridW, t)
        names = [f'grafted N_t vs CPP at a={a:g}', f'lower size geometric(W(a)/W(t)) at a={a:g}']
        if not self.sampling:
            return [ComparisonReport(check=Check.GRAFT.value, quantity=name, t=t) for name in names]
        rows = self.replicas(graft_batch, self.config.reps, ctx.gridW, a, t, stream=Stream.GRAFT, substream=index)
        cpp_rows = self.spectra(index, t)
        return [
            _p_row(Check.GRAFT, names[0], t, two_sample_chisquare, rows[:, 0], cpp_rows[:, 0], replicas=len(rows)),
            _p_row(Check.GRAFT, names[1], t, gof_geometric, rows[:, 1], p, replicas=len(rows)),
        ]

    # ---- long-horizon checks ----

    def _require_growth(self, check):
        if self.ctx.gridW.alpha <= 0:
            logger.info("Skipping %s: model is not supercritical", check.value)
            return False
        return True

    def check_asymptotics(self):
        if not self._require_growth(Check.ASYMPTOTICS) or self.params.theta <= 0:
            return [ComparisonReport(check=Check.ASYMPTOTICS.value, quantity='skipped')]
        ctx = self.long_ctx
        k, l = PAIR_INDICES
        constants = scale.clonal_constants(self.params, l, h=ctx.gridW.step)
        deviations = []
        reports = []
        for t in Config.ASYMPTOTIC_TIMES:
            W = scale.eval_W(ctx.gridW, t)
            ratio = moments.spectrum_covariance(ctx, k, l, t) / (W ** 2 * constants[k - 1] * constants[l - 1])
            deviations.append(abs(ratio - 1.0))
            reports.append(ComparisonReport(check=Check.ASYMPTOTICS.value,
                                            quantity=f'|Cov(A({k}),A({l}))/(W^2 c_k c_l) - 1|',
                                            t=t, theory=deviations[-1]))
        reports.append(_trend_row(Check.ASYMPTOTICS, 'covariance ratio deviation decreasing', deviations))

        mean_time = Config.ASYMPTOTIC_MEAN_TIME
        ratio = moments.asymptotic_factorial_moment(ctx, [k], [1], mean_time) / moments.mean_spectrum(ctx, k, mean_time)
        reports.append(_identity_row(Check.ASYMPTOTICS, f'W(t) c_{k} / E[A({k})]', mean_time, 1.0, ratio, tolerance=0.1))

        t = max(Config.ASYMPTOTIC_TIMES)
        values = None
        if self.sampling:
            rows = self.replicas(spectrum_batch, self.config.asymptotic_reps, ctx.gridW, t, self.params.theta, l,
                                 stream=Stream.ASYMPTOTIC)
            values = rows[:, 2 + k] * rows[:, 2 + l]
        prediction = moments.asymptotic_factorial_moment(ctx, [k, l], [1, 1], t)
        reports.append(_z_row(Check.ASYMPTOTICS, f'E[A({k})A({l})] vs order-(1,1) asymptote', t, prediction, values))
        return reports

    def check_limits(self):
        if not self._require_growth(Check.LIMITS):
            return [ComparisonReport(check=Check.LIMITS.value, quantity='skipped')]
        params, config = self.params, self.config
        ctx = self.long_ctx
        gridW = ctx.gridW
        alpha = gridW.alpha
        reports = []

        # counts with descent alive at T are geometric(W(T - s)/W(T))
        checkpoint = Config.DESCENT_TIME
        horizon = max(config.times[0], 2.0 * checkpoint)
        p = forward.descent_transition_probability(gridW, checkpoint, horizon)
        name = f'N^(T) at s={checkpoint:g}, T={horizon:g} geometric'
        if self.sampling:
            rows = self.replicas(descent_batch, config.descent_reps, params, checkpoint, horizon, config.cap,
                                 stream=Stream.DESCENT)
            counts = rows[(rows[:, 0] == 1) & (rows[:, 1] == 0), 2]
            reports.append(_p_row(Check.LIMITS, name, checkpoint, gof_geometric, counts, p, replicas=len(counts)))
        else:
            reports.append(ComparisonReport(check=Check.LIMITS.value, quantity=name, t=checkpoint, theory=p))

        # counts with descent alive at T approach the Yule process of rate alpha
        t = Config.YULE_TIME
        T = forward.immortal_horizon(t, alpha)
        p = math.exp(-alpha * t)
        names = (f'N^(T)_t Yule geometric(e^(-alpha t)), T={T:g}', f'e^(-alpha t) N^(T)_t vs Exp(1), T={T:g}')
        if self.sampling:
            rows = self.replicas(descent_batch, config.descent_reps, params, t, T, config.cap, stream=Stream.YULE)
            counts = rows[(rows[:, 0] == 1) & (rows[:, 1] == 0), 2]
            uniforms = replica_rng(config.seed, 0, Stream.YULE, substream=1).random(counts.size)
            reports.append(_p_row(Check.LIMITS, names[0], t, gof_geometric, counts, p, replicas=len(counts)))
            reports.append(_p_row(Check.LIMITS, names[1], t, ks_exponential,
                                  geometric_to_exponential(counts, p, uniforms), replicas=len(counts)))
        else:
            reports.append(ComparisonReport(check=Check.LIMITS.value, quantity=names[0], t=t, theory=p))
            reports.append(ComparisonReport(check=Check.LIMITS.value, quantity=names[1], t=t))

        # conditional mean of e^{-alpha t} N_t
        t = Config.LIMIT_TIME
        limit = non_extinction_probability(params) / (gridW.psi_prime_alpha * scale.survival_prob(params, gridW, t))
        values = None
        if self.sampling:
            sizes = self.replicas(lower_size_batch, config.asymptotic_reps, gridW, t, 0.0, stream=Stream.LIMIT)
            values = math.exp(-alpha * t) * sizes
        reports.append(_z_row(Check.LIMITS, 'E[e^(-alpha t) N_t]', t, limit, values))

        if params.theta > 0:
            errors = []
            for i, t in enumerate(config.converge_times):
                estimate = None
                if self.sampling:
                    rows = self.replicas(spectrum_batch, config.converge_reps, gridW, t, params.theta, 1,
                                         stream=Stream.CONVERGE, substream=i)
                    constant = scale.clonal_constants(params, 1, h=gridW.step)[0]
                    estimate = math.exp(-2 * alpha * t) * float(np.mean((constant * rows[:, 0] - rows[:, 3]) ** 2))
                errors.append(estimate)
                reports.append(ComparisonReport(check=Check.LIMITS.value, quantity='e^(-2 alpha t) E[(c_1 N - A(1))^2]',
                                                t=t, estimate=estimate, replicas=0 if estimate is None else config.converge_reps))
            reports.append(_trend_row(Check.LIMITS, 'normalized L2 error decreasing', errors))

        if params.lifespan.kind is LifespanKind.EXPONENTIAL:
            t = Config.DESCENT_TIME
            name = 'first residual lifetime vs Exp(rate)'
            if self.sampling:
                overshoots = self.replicas(residual_batch, config.forward_reps, params, t, stream=Stream.RESIDUAL)
                overshoots = overshoots[~np.isnan(overshoots)]
                reports.append(_p_row(Check.LIMITS, name, t, ks_exponential, overshoots,
                                      params.lifespan.mean, replicas=len(overshoots)))
            else:
                reports.append(ComparisonReport(check=Check.LIMITS.value, quantity=name, t=t))
        return reports


PER_TIME_CHECKS = {
    Check.POPULATION: ValidationRun.check_population,
    Check.CLONAL: ValidationRun.check_clonal,
    Check.MEANS: ValidationRun.check_means,
    Check.IDENTITIES: ValidationRun.check_identities,
    Check.MIXED: ValidationRun.check_mixed,
    Check.SECOND_ORDER: ValidationRun.check_second_order,
    Check.PRODUCT: ValidationRun.check_product,
    Check.JOINT_PMF: ValidationRun.check_joint_pmf,
    Check.FORWARD: ValidationRun.check_forward,
    Check.GRAFT: ValidationRun.check_graft,
}

LONG_CHECKS = {
    Check.ASYMPTOTICS: ValidationRun.check_asymptotics,
    Check.LIMITS: ValidationRun.check_limits,
}


def run_validation(config):
    """Run the selected checks; the reports are deterministic given the config and seed."""
    run = ValidationRun(config)
    reports = []
    for check in config.checks:
        logger.info("Check %s started", check.value)
        try:
            if check in PER_TIME_CHECKS:
                for index, t in enumerate(config.times):
                    reports.extend(PER_TIME_CHECKS[check](run, index, t))
            else:
                reports.extend(LONG_CHECKS[check](run))
        except ConfigurationError as error:
            raise ConfigurationError(f"check {check.value}: {error}") from error
        failed = sum(1 for report in reports if report.check == check.value and report.passed is False)
        logger.info("Check %s finished, %d failed", check.value, failed)
    return reports


def validation_failed(reports):
    return any(report.passed is False for report in reports)


def convergence_study(config):
    """Per-t rows tracking the approach of N_t and A(k, t) to their almost-sure limits"""
    params = config.params
    horizon = max(config.converge_times) * Config.HORIZON_FACTOR
    ctx = moments.build_moment_context(params, horizon, step=config.grid_step,
                                       quadrature_points=config.quadrature_points,
                                       nested_points=config.nested_points)
    gridW = ctx.gridW
    if gridW.alpha <= 0:
        raise SupercriticalityError("convergence study requires supercritical")
    alpha = gridW.alpha
    slope = gridW.psi_prime_alpha
    survival_limit = non_extinction_probability(params)
    constants = scale.clonal_constants(params, config.kmax, h=gridW.step) if params.theta > 0 else None
    kmax = config.kmax if params.theta > 0 else 0

    rows = []
    for i, t in enumerate(config.converge_times):
        scaling = math.exp(-alpha * t)
        W = scale.eval_W(gridW, t)
        # mean of the limit law given survival up to t
        corrected = survival_limit / scale.survival_prob(params, gridW, t)
        samples = None
        if config.converge_reps:
            logger.info("Convergence study: %d replicas at t=%g", config.converge_reps, t)
            samples = run_replicas(spectrum_batch, config.converge_reps, gridW, t, params.theta, max(kmax, 1),
                                   seed=config.seed, stream=Stream.CONVERGE, substream=i,
                                   workers=config.workers, batch_size=config.batch_size)
        replicas = 0 if samples is None else len(samples)

        def summary(values):
            return (None, None) if values is None else mean_and_se(values)

        estimate, se = summary(None if samples is None else scaling * samples[:, 0])
        rows.append(ConvergenceRow(t=t, quantity='scaled_population', estimate=estimate, std_error=se,
                                   theory=scaling * W, asymptote=corrected / slope, replicas=replicas))
        for k in range(1, kmax + 1):
            estimate, se = summary(None if samples is None else scaling * samples[:, 2 + k])
            rows.append(ConvergenceRow(
                t=t, quantity=f'scaled_spectrum[{k}]', estimate=estimate, std_error=se,
                theory=scaling * moments.mean_spectrum(ctx, k, t),
                asymptote=corrected * constants[k - 1] / slope, replicas=replicas,
            ))
        if kmax:
            constant = float(constants[0])
            estimate, se = summary(None if samples is None else
                                   scaling ** 2 * (constant * samples[:, 0] - samples[:, 3]) ** 2)
            rows.append(ConvergenceRow(
                t=t, quantity='l2_error[1]', estimate=estimate, std_error=se,
                theory=scaling ** 2 * moments.l2_error_exact(ctx, 1, t, constant),
                asymptote=scaling ** 2 * moments.l2_error_asymptote(ctx, 1, t, constant), replicas=replicas,
            ))
        statistic = None if samples is None else ks_statistic(slope * scaling * samples[:, 0])
        rows.append(ConvergenceRow(t=t, quantity='ks_exp1', estimate=statistic, std_error=None,
                                   theory=None, asymptote=0.0, replicas=replicas))
        statistic = None if samples is None else ks_statistic(slope * scaling * samples[:, 0], corrected)
        rows.append(ConvergenceRow(t=t, quantity='ks_exp1_corrected', estimate=statistic, std_error=None,
                                   theory=None, asymptote=0.0, replicas=replicas))
    return rows
