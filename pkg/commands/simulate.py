import logging

import click

from config import Config
from engines.harness import run_replicas, sample_batch
from engines.scale import build_scale_grid
from schemas.params import ModelParamsSchema, model_data
from schemas.report import SpectrumRowSchema
from utils.decorators import handles_errors, model_options
from utils.errors import DomainError
from utils.helpers import parse_float_list
from utils.responses import write_table
from utils.streams import Stream

logger = logging.getLogger(__name__)


@click.command('simulate')
@model_options
@click.option('--t', 't', default='2', show_default=True, help='Comma separated times.')
@click.option('--reps', type=int, default=1000, show_default=True)
@click.option('--workers', type=int, default=Config.WORKERS, show_default=True)
@handles_errors
def simulate_cmd(b, theta, lifespan, grid_step, horizon, seed, out, t, reps, workers):
    """Sample allelic partitions from the coalescent point process."""
    params = ModelParamsSchema().load(model_data(b, theta, lifespan))
    times = parse_float_list(t)
    if not times or min(times) <= 0:
        raise DomainError("times must be > 0")
    if reps < 1:
        raise DomainError("reps must be >= 1")

    gridW = build_scale_grid(params, grid_step, horizon or Config.HORIZON_FACTOR * max(times))
    rows = []
    for index, s in enumerate(times):
        logger.info("Sampling %d CPP replicas at t=%g", reps, s)
        samples = run_replicas(sample_batch, reps, gridW, s, params.theta, seed=seed, stream=Stream.CPP,
                               substream=index, workers=workers)
        rows.extend(
            {'replica': replica, 't': s, 'N': sample.N, 'Z0': sample.Z0,
             'families': sample.families, 'spectrum': sample.spectrum_text}
            for replica, sample in enumerate(samples)
        )
    write_table(rows, SpectrumRowSchema(), out, 'spectra.csv')
