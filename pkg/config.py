import os

from utils.errors import ConfigurationError


class Config:
    # Logging configuration
    LOG_LEVEL = os.environ.get('SPLITREE_LOG_LEVEL', 'INFO').upper()

    # Scale function grid configuration
    GRID_STEP = float(os.environ.get('SPLITREE_GRID_STEP', '1e-3'))
    HORIZON_FACTOR = 1.5
    SCALE_HORIZON = 4.0
    MAX_GRID_NODES = 10_000_000

    # Limit constants c_k
    CONSTANT_TOLERANCE = 1e-10
    MAX_CONSTANT_NODES = 50_000

    # Moment engine configuration
    QUADRATURE_POINTS = int(os.environ.get('SPLITREE_QUADRATURE_POINTS', '400'))
    NESTED_POINTS = int(os.environ.get('SPLITREE_NESTED_POINTS', '160'))
    SERIES_RADIUS = 0.999
    SERIES_LENGTH = 256
    TAIL_TOLERANCE = 1e-12
    ALIASING_TOLERANCE = 1e-9
    NEGATIVE_TOLERANCE = 1e-10
    MAX_JOINT_LENGTH = 1024
    MAX_PROFILE_LENGTH = 1 << 22

    # Simulation configuration
    POPULATION_CAP = int(os.environ.get('SPLITREE_POPULATION_CAP', '1000000'))
    DEFAULT_SEED = int(os.environ.get('SPLITREE_SEED', '20240601'))
    WORKERS = int(os.environ.get('SPLITREE_WORKERS', '1'))
    BATCH_SIZE = 2_000

    # Validation battery configuration
    DEFAULT_REPS = 200_000
    FORWARD_REPS = 20_000
    DESCENT_REPS = 20_000
    CONVERGE_REPS = 2_000
    ASYMPTOTIC_REPS = 100_000
    CONVERGE_TIMES = (3.0, 5.0, 7.0)
    ASYMPTOTIC_TIMES = (4.0, 8.0)
    ASYMPTOTIC_MEAN_TIME = 10.0
    DESCENT_TIME = 1.0
    YULE_TIME = 2.0
    LIMIT_TIME = 8.0
    DEFAULT_KMAX = 6

    # Significance thresholds
    Z_THRESHOLD = 4.0
    P_THRESHOLD = 1e-3
    TV_THRESHOLD = 0.02
    IDENTITY_TOLERANCE = 1e-4


def load_config_file(path):
    """Read a flat key=value file into a dict keyed by CLI parameter names"""
    values = {}
    with open(path, encoding='utf-8') as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigurationError(f"{path}:{number}: expected key=value, got {raw.strip()!r}")
            key, value = line.split('=', 1)
            values[key.strip().lstrip('-').replace('-', '_')] = value.strip()
    return values
