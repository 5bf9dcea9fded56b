import math
import os

import numpy as np

from utils.errors import ConfigurationError


def parse_float_list(text, default=None):
    """Parse a comma separated list of floats such as "3,5,7" """
    if text is None or (isinstance(text, str) and not text.strip()):
        return default
    if isinstance(text, (int, float)):
        return [float(text)]
    if not isinstance(text, str):
        return [float(value) for value in text]
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ConfigurationError(f"Invalid number list: {text}")


def parse_name_list(text, default=None):
    """Parse a comma separated list of names"""
    if text is None or not text.strip():
        return default
    return [part.strip() for part in text.split(',') if part.strip()]


def next_power_of_two(n):
    """Smallest power of two >= n"""
    return 1 << max(0, math.ceil(math.log2(max(1, n))))


def geometric_quantile(p, tail):
    """Smallest n with P(N > n) <= tail for N geometric(p) on {1, 2, ...}"""
    if p >= 1.0:
        return 1
    return max(1, math.ceil(math.log(tail) / math.log1p(-p)))


def scalar_or_array(values, like):
    """Return a Python float when the input was a scalar"""
    if np.ndim(like) == 0:
        return values.item() if isinstance(values, np.ndarray) else values
    return values


def resolve_output_path(out, default_name):
    """Map --out to a file: a *.csv path is used as is, anything else is a directory"""
    if out is None:
        return None
    if out.lower().endswith('.csv'):
        parent = os.path.dirname(out)
        if parent:
            os.makedirs(parent, exist_ok=True)
        return out
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, default_name)
