import logging

import click

from config import Config
from engines.harness import outcome_batch, run_replicas
from schemas.params import ModelParamsSchema, model_data
from schemas.report import ForwardRowSchema
from utils.decorators import handles_errors, model_options
from utils.errors import DomainError
from utils.helpers import parse_float_list
from utils.responses import write_table
from utils.streams import Stream

logger = logging.getLogger(__name__)


def forward_row(replica, t, outcome):
    sample = outcome.sample
    return {
        'replica': replica,
        't': t,
        'survived': outcome.survived,
        'overflow': outcome.overflow,
        'N': None if sample is None else sample.N,
        'Z0': None if sample is None else sample.Z0,
        'families': None if sample is None else sample.families,
        'spectrum': None if sample is None else sample.spectrum_text,
    }


@click.command('forward')
@model_options
@click.option('--t', 't', default='2', show_default=True, help='Comma separated times.')
@click.option('--reps', type=int, default=1000, show_default=True)
@click.option('--cap', type=int, default=Config.POPULATION_CAP, show_default=True,
              help='Abort a run once this many individuals are alive.')
@click.option('--workers', type=int, default=Config.WORKERS, show_default=True)
@handles_errors
def forward_cmd(b, theta, lifespan, grid_step, horizon, seed, out, t, reps, cap, workers):
    """Simulate splitting trees forward in time with mutations on the lifetimes."""
    params = ModelParamsSchema().load(model_data(b, theta, lifespan))
    times = parse_float_list(t)
    if not times or min(times) <= 0:
        raise DomainError("times must be > 0")
    if reps < 1:
        raise DomainError("reps must be >= 1")

    rows = []
    for index, s in enumerate(times):
        logger.info("Running %d forward replicas at t=%g", reps, s)
        outcomes = run_replicas(outcome_batch, reps, params, s, cap, seed=seed, stream=Stream.FORWARD,
                                substream=index, workers=workers)
        overflow = sum(outcome.overflow for outcome in outcomes)
        if overflow:
            logger.warning("%d of %d runs at t=%g overflowed the cap", overflow, reps, s)
        rows.extend(forward_row(replica, s, outcome) for replica, outcome in enumerate(outcomes))
    write_table(rows, ForwardRowSchema(), out, 'forward.csv')
