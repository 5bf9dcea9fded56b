import logging

import click

from config import Config
from engines.moments import (
    build_moment_context, mean_spectrum, mixed_mean_row, pmf_clonal, pmf_population,
    product_with_population, second_order, spectrum_covariance,
)
from schemas.params import ModelParamsSchema, model_data
from schemas.report import MomentRowSchema
from utils.decorators import handles_errors, model_options
from utils.errors import DomainError
from utils.helpers import parse_float_list
from utils.responses import write_table

logger = logging.getLogger(__name__)


def first_order_rows(ctx, t, kmax):
    rows = []
    for k in range(1, kmax + 1):
        rows.append({'t': t, 'quantity': 'P(N=k)', 'k': k, 'value': pmf_population(ctx, k, t)})
    for k in range(0, kmax + 1):
        rows.append({'t': t, 'quantity': 'P(Z0=k)', 'k': k, 'value': pmf_clonal(ctx, k, t)})
    for k in range(1, kmax + 1):
        rows.append({'t': t, 'quantity': 'E[A(k)]', 'k': k, 'value': mean_spectrum(ctx, k, t)})
    return rows


def second_order_rows(ctx, t, kmax):
    rows = []
    for k in range(1, kmax + 1):
        for l in range(k, kmax + 1):
            rows.append({'t': t, 'quantity': 'E[A(k)A(l)]', 'k': k, 'l': l,
                         'value': second_order(ctx, k, l, t)})
            rows.append({'t': t, 'quantity': 'Cov(A(k),A(l))', 'k': k, 'l': l,
                         'value': spectrum_covariance(ctx, k, l, t)})
    for k in range(1, kmax + 1):
        rows.append({'t': t, 'quantity': 'E[A(k)N]', 'k': k, 'value': product_with_population(ctx, k, t)})
        mixed = mixed_mean_row(ctx, k, t, kmax)
        rows.extend({'t': t, 'quantity': 'E[A(k);Z0=l]', 'k': k, 'l': l, 'value': value}
                    for l, value in enumerate(mixed))
    return rows


@click.command('moments')
@model_options
@click.option('--t', 't', default='2', show_default=True, help='Comma separated times.')
@click.option('--kmax', type=int, default=Config.DEFAULT_KMAX, show_default=True)
@click.option('--order', type=click.IntRange(1, 2), default=1, show_default=True,
              help='2 adds the second-order, mixed and covariance tables.')
@click.option('--quadrature-points', type=int, default=Config.QUADRATURE_POINTS, show_default=True)
@click.option('--nested-points', type=int, default=Config.NESTED_POINTS, show_default=True)
@handles_errors
def moments_cmd(b, theta, lifespan, grid_step, horizon, seed, out, t, kmax, order,
                quadrature_points, nested_points):
    """Tabulate the exact moments of N_t, Z_0(t) and the frequency spectrum."""
    params = ModelParamsSchema().load(model_data(b, theta, lifespan))
    times = parse_float_list(t)
    if not times or min(times) < 0:
        raise DomainError("times must be >= 0")
    if kmax < 1:
        raise DomainError("kmax must be >= 1")

    ctx = build_moment_context(
        params,
        horizon or max(Config.HORIZON_FACTOR * max(times), grid_step),
        step=grid_step,
        quadrature_points=quadrature_points,
        nested_points=nested_points,
    )
    rows = []
    for s in times:
        logger.info("Computing order %d moments at t=%g", order, s)
        rows.extend(first_order_rows(ctx, s, kmax))
        if order == 2:
            rows.extend(second_order_rows(ctx, s, kmax))
    write_table(rows, MomentRowSchema(), out, 'moments.csv')
