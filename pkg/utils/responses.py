import logging

import click
import pandas as pd

from utils.helpers import resolve_output_path

logger = logging.getLogger(__name__)


def table_frame(rows, schema):
    """
    Serialize rows into a DataFrame

    Args:
        rows: Objects or dicts to serialize
        schema: Marshmallow schema whose declared field order gives the columns

    Returns:
        DataFrame with one row per item
    """
    data = schema.dump(rows, many=True)
    return pd.DataFrame(data, columns=list(schema.fields))


def write_table(rows, schema, out=None, default_name='table.csv'):
    """
    Write rows as a UTF-8 CSV with a header row

    Args:
        rows: Objects or dicts to serialize
        schema: Marshmallow schema of one row
        out: A *.csv path, a directory, or None for stdout
        default_name: File name used when out is a directory

    Returns:
        The path written, or None when the table went to stdout
    """
    frame = table_frame(rows, schema)
    path = resolve_output_path(out, default_name)
    if path is None:
        click.echo(frame.to_csv(index=False, lineterminator='\n'), nl=False)
        return None
    frame.to_csv(path, index=False, lineterminator='\n', encoding='utf-8')
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path


def read_table(path):
    """Read a CSV written by write_table, keeping floats bit-exact"""
    return pd.read_csv(path, float_precision='round_trip')


def format_errors(messages):
    """
    Flatten marshmallow error messages into one line

    Args:
        messages: Dict of field errors, list of messages, or a string

    Returns:
        String such as "b: Birth rate must be greater than 0"
    """
    if isinstance(messages, dict):
        return '; '.join(f"{field}: {format_errors(value)}" for field, value in messages.items())
    if isinstance(messages, (list, tuple)):
        return ' '.join(format_errors(value) for value in messages)
    return str(messages)
