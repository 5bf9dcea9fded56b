import logging

import click

from engines.harness import convergence_study, run_validation, validation_failed
from schemas.experiment import ExperimentConfigSchema
from schemas.params import model_data
from schemas.report import ComparisonReportSchema, ConvergenceRowSchema
from utils.decorators import experiment_options, handles_errors, model_options
from utils.responses import write_table

logger = logging.getLogger(__name__)


def load_experiment(b, theta, lifespan, **options):
    """ExperimentConfig from the CLI flags; flags left unset fall back to the schema defaults"""
    data = model_data(b, theta, lifespan)
    data.update({name: value for name, value in options.items() if value is not None})
    return ExperimentConfigSchema().load(data)


@click.command('validate')
@model_options
@experiment_options
@handles_errors
def validate_cmd(b, theta, lifespan, **options):
    """Compare the exact formulas with Monte Carlo estimates."""
    config = load_experiment(b, theta, lifespan, **options)
    logger.info("Running %d checks with %d replicas per time", len(config.checks), config.reps)
    reports = run_validation(config)
    write_table(reports, ComparisonReportSchema(), config.out_dir, 'validation.csv')

    failed = [report for report in reports if report.passed is False]
    passed = sum(report.passed is True for report in reports)
    click.echo(f"{passed} passed, {len(failed)} failed, {len(reports) - passed - len(failed)} not judged",
               err=True)
    for report in failed:
        click.echo(f"FAILED {report.check}:{report.quantity} t={report.t}", err=True)
    if validation_failed(reports):
        raise click.exceptions.Exit(2)


@click.command('converge')
@model_options
@experiment_options
@handles_errors
def converge_cmd(b, theta, lifespan, **options):
    """Track the scaled population and spectrum against their almost-sure limits."""
    config = load_experiment(b, theta, lifespan, **options)
    rows = convergence_study(config)
    write_table(rows, ConvergenceRowSchema(), config.out_dir, 'converge.csv')
