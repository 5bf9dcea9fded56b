import logging

import click

from config import Config
from engines.moments import build_moment_context, lln_descriptor
from engines.scale import clonal_decay_rate
from models import extinction_probability
from schemas.params import ModelParamsSchema, model_data
from schemas.report import LimitRowSchema
from utils.decorators import handles_errors, model_options
from utils.responses import write_table

logger = logging.getLogger(__name__)


@click.command('limits')
@model_options
@click.option('--kmax', type=int, default=Config.DEFAULT_KMAX, show_default=True)
@handles_errors
def limits_cmd(b, theta, lifespan, grid_step, horizon, seed, out, kmax):
    """Malthusian parameter, extinction probability and the constants c_k."""
    params = ModelParamsSchema().load(model_data(b, theta, lifespan))
    ctx = build_moment_context(params, horizon or max(1.0, grid_step), step=grid_step)
    descriptor = lln_descriptor(ctx, kmax)
    extinction = extinction_probability(params)

    rows = [
        {'quantity': 'alpha', 'value': descriptor.alpha},
        {'quantity': "psi'(alpha)", 'value': descriptor.psi_prime_alpha},
        {'quantity': 'P(Non-ex)', 'value': 1.0 - extinction},
        {'quantity': 'P(ex)', 'value': extinction},
        {'quantity': 'clonal_decay_rate', 'value': clonal_decay_rate(params)},
    ]
    rows.extend({'quantity': 'c_k', 'k': k, 'value': value}
                for k, value in enumerate(descriptor.constants, start=1))
    rows.extend({'quantity': "c_k/psi'(alpha)", 'k': k, 'value': value}
                for k, value in enumerate(descriptor.scales, start=1))
    logger.info("alpha=%.10g, sum of k c_k over k <= %d is %.10g", descriptor.alpha, kmax,
                sum(k * c for k, c in enumerate(descriptor.constants, start=1)))
    write_table(rows, LimitRowSchema(), out, 'limits.csv')
