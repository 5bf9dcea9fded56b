import logging
import sys

import click

from config import Config, load_config_file
from utils.errors import SplitreeError

# Configure logging
logging.basicConfig(level=Config.LOG_LEVEL, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
logger = logging.getLogger(__name__)


class SplitreeGroup(click.Group):
    """Root command mapping usage errors and aborts to exit code 1"""

    def main(self, *args, **kwargs):
        kwargs.pop('standalone_mode', None)
        try:
            code = super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as error:
            error.show()
            code = 1
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            code = 1
        sys.exit(code or 0)


def _load_config(ctx, param, value):
    """Eager --config callback: file values become defaults of every subcommand"""
    if value is None:
        return None
    try:
        values = load_config_file(value)
    except (OSError, SplitreeError) as error:
        raise click.BadParameter(str(error), ctx=ctx, param=param)
    logger.debug("Loaded %d defaults from %s", len(values), value)
    ctx.default_map = {name: dict(values) for name in ctx.command.commands}
    return value


def _set_log_level(ctx, param, value):
    if value is not None:
        logging.getLogger().setLevel(value.upper())
    return value


def create_cli():
    @click.group(cls=SplitreeGroup, context_settings={'help_option_names': ['-h', '--help']})
    @click.option('--config', type=click.Path(exists=True, dir_okay=False), callback=_load_config,
                  is_eager=True, expose_value=False, help='key=value file of default flag values.')
    @click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
                  default=None, callback=_set_log_level, expose_value=False, help='Overrides SPLITREE_LOG_LEVEL.')
    def cli():
        """Splitting trees, coalescent point processes and the allele frequency spectrum."""

    # Register commands
    from commands.scale import scale_cmd
    from commands.simulate import simulate_cmd
    from commands.forward import forward_cmd
    from commands.moments import moments_cmd
    from commands.limits import limits_cmd
    from commands.validate import validate_cmd, converge_cmd

    for command in (scale_cmd, simulate_cmd, forward_cmd, moments_cmd, limits_cmd, validate_cmd, converge_cmd):
        cli.add_command(command)

    return cli


cli = create_cli()
