import logging

import click
import numpy as np

from config import Config
from engines.scale import build_scale_grid, eval_W, expected_population, extinction_prob_at, survival_prob
from schemas.params import ModelParamsSchema, model_data
from schemas.report import ScaleRowSchema
from utils.decorators import handles_errors, model_options
from utils.errors import DomainError
from utils.helpers import parse_float_list
from utils.responses import write_table

logger = logging.getLogger(__name__)


@click.command('scale')
@model_options
@click.option('--t', 't', default=None, help='Comma separated times; every grid node when omitted.')
@click.option('--stride', type=click.IntRange(min=1), default=1, show_default=True,
              help='Write every n-th grid node of the full table.')
@handles_errors
def scale_cmd(b, theta, lifespan, grid_step, horizon, seed, out, t, stride):
    """Tabulate W, W_theta, E[N_t] and the survival of N_t over the grid or at given times."""
    params = ModelParamsSchema().load(model_data(b, theta, lifespan))
    if t is None:
        horizon = horizon or Config.SCALE_HORIZON
    else:
        requested = parse_float_list(t)
        if not requested or min(requested) < 0:
            raise DomainError("times must be >= 0")
        horizon = horizon or max(Config.HORIZON_FACTOR * max(requested), grid_step)

    gridW = build_scale_grid(params, grid_step, horizon)
    gridWtheta = build_scale_grid(params, grid_step, horizon, clonal=True) if params.theta > 0 else gridW
    mean = expected_population(gridW)
    times = gridW.nodes[::stride] if t is None else requested

    rows = [
        {
            't': float(s),
            'W': eval_W(gridW, s),
            'W_theta': eval_W(gridWtheta, s),
            'survival': survival_prob(params, gridW, s),
            'extinction': extinction_prob_at(params, gridW, s),
            'expected_population': float(np.interp(s, gridW.nodes, mean)),
        }
        for s in times
    ]
    logger.info("alpha=%.10g psi'(alpha)=%.10g, %d rows", gridW.alpha, gridW.psi_prime_alpha, len(rows))
    write_table(rows, ScaleRowSchema(), out, 'scale.csv')
