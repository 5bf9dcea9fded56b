import logging
from functools import wraps

import click
from marshmallow import ValidationError

from config import Config
from utils.errors import SplitreeError
from utils.responses import format_errors

logger = logging.getLogger(__name__)


def handles_errors(fn):
    """Decorator turning library errors into an error line on stderr and an exit code"""
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as error:
            message = format_errors(error.messages)
            logger.debug("Validation failed: %s", message)
            click.echo(f"error: {message}", err=True)
            raise click.exceptions.Exit(1)
        except SplitreeError as error:
            logger.debug("%s: %s", type(error).__name__, error)
            click.echo(f"error: {error}", err=True)
            raise click.exceptions.Exit(error.exit_code)
    return wrapper


def model_options(fn):
    """Decorator adding the flags shared by every subcommand"""
    options = [
        click.option('--b', 'b', type=float, default=None, help='Birth rate b > 0.'),
        click.option('--theta', type=float, default=0.0, show_default=True, help='Mutation rate theta >= 0.'),
        click.option('--lifespan', default=None, help='exp:<d> | fixed:<v> | uniform:<lo>,<hi> | immortal'),
        click.option('--grid-step', '--step', 'grid_step', type=float, default=Config.GRID_STEP,
                     show_default=True, help='Step of the scale function grid.'),
        click.option('--horizon', type=float, default=None, help='Grid horizon; defaults to 1.5 max(t).'),
        click.option('--seed', type=int, default=Config.DEFAULT_SEED, show_default=True, help='Master seed.'),
        click.option('--out', default=None, help='Output *.csv file or directory; stdout when omitted.'),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def experiment_options(fn):
    """Decorator adding the replica and battery flags of validate and converge"""
    options = [
        click.option('--t', 't', default='2', show_default=True, help='Comma separated times.'),
        click.option('--reps', type=int, default=Config.DEFAULT_REPS, show_default=True,
                     help='CPP replicas per time; 0 lists the planned checks.'),
        click.option('--checks', default='all', show_default=True, help='Comma separated check names.'),
        click.option('--kmax', type=int, default=Config.DEFAULT_KMAX, show_default=True),
        click.option('--workers', type=int, default=Config.WORKERS, show_default=True),
        click.option('--batch-size', type=int, default=Config.BATCH_SIZE, show_default=True),
        click.option('--cap', type=int, default=Config.POPULATION_CAP, show_default=True,
                     help='Alive population cap of forward runs.'),
        click.option('--forward-reps', type=int, default=Config.FORWARD_REPS, show_default=True),
        click.option('--descent-reps', type=int, default=Config.DESCENT_REPS, show_default=True),
        click.option('--converge-reps', type=int, default=Config.CONVERGE_REPS, show_default=True),
        click.option('--asymptotic-reps', type=int, default=Config.ASYMPTOTIC_REPS, show_default=True),
        click.option('--converge-times', default=','.join(f'{t:g}' for t in Config.CONVERGE_TIMES),
                     show_default=True),
        click.option('--graft-depth', type=float, default=None, help='Base a of the grafting checks.'),
        click.option('--quadrature-points', type=int, default=Config.QUADRATURE_POINTS, show_default=True),
        click.option('--nested-points', type=int, default=Config.NESTED_POINTS, show_default=True),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn
