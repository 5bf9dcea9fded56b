from marshmallow import (
    fields, validate, validates, validates_schema, ValidationError, post_load,
)

from config import Config
from models import Check, ExperimentConfig
from schemas.params import ModelFieldsSchema, build_params
from utils.errors import ConfigurationError
from utils.helpers import parse_float_list, parse_name_list


class FloatList(fields.Field):
    """Comma separated numbers such as "3,5,7", or a list of numbers"""

    def _deserialize(self, value, attr, data, **kwargs):
        try:
            values = parse_float_list(value)
        except (ConfigurationError, TypeError, ValueError):
            raise ValidationError(f"Invalid number list: {value}")
        if not values:
            raise ValidationError("At least one value is required")
        return tuple(values)

    def _serialize(self, value, attr, obj, **kwargs):
        if value is None:
            return None
        return ','.join(f'{v:g}' for v in value)


class CheckList(fields.Field):
    """Comma separated check names, or "all" """

    def _deserialize(self, value, attr, data, **kwargs):
        if isinstance(value, str):
            names = parse_name_list(value, default=[])
        else:
            names = [getattr(v, 'value', v) for v in value]
        if not names or names == ['all']:
            return tuple(Check)
        try:
            return tuple(Check(name.lower()) for name in names)
        except ValueError:
            valid = ', '.join(check.value for check in Check)
            raise ValidationError(f"Unknown check in {value!r}; valid checks: {valid}")

    def _serialize(self, value, attr, obj, **kwargs):
        return ','.join(check.value for check in value)


class ExperimentConfigSchema(ModelFieldsSchema):
    t = FloatList(load_default=(2.0,))
    reps = fields.Integer(load_default=Config.DEFAULT_REPS, validate=validate.Range(min=0))
    seed = fields.Integer(load_default=Config.DEFAULT_SEED, validate=validate.Range(min=0, max=2 ** 64 - 1))
    checks = CheckList(load_default=tuple(Check))
    grid_step = fields.Float(load_default=Config.GRID_STEP)
    horizon = fields.Float(load_default=None, allow_none=True)
    quadrature_points = fields.Integer(load_default=Config.QUADRATURE_POINTS, validate=validate.Range(min=2))
    nested_points = fields.Integer(load_default=Config.NESTED_POINTS, validate=validate.Range(min=2))
    workers = fields.Integer(load_default=Config.WORKERS, validate=validate.Range(min=1))
    out = fields.String(load_default=None, allow_none=True)
    kmax = fields.Integer(load_default=Config.DEFAULT_KMAX, validate=validate.Range(min=2))
    cap = fields.Integer(load_default=Config.POPULATION_CAP, validate=validate.Range(min=1))
    forward_reps = fields.Integer(load_default=Config.FORWARD_REPS, validate=validate.Range(min=0))
    descent_reps = fields.Integer(load_default=Config.DESCENT_REPS, validate=validate.Range(min=0))
    converge_reps = fields.Integer(load_default=Config.CONVERGE_REPS, validate=validate.Range(min=0))
    asymptotic_reps = fields.Integer(load_default=Config.ASYMPTOTIC_REPS, validate=validate.Range(min=0))
    converge_times = FloatList(load_default=Config.CONVERGE_TIMES)
    graft_depth = fields.Float(load_default=None, allow_none=True)
    batch_size = fields.Integer(load_default=Config.BATCH_SIZE, validate=validate.Range(min=1))

    @validates('t')
    def validate_t(self, value):
        if any(t <= 0 for t in value):
            raise ValidationError("Times must be greater than 0")

    @validates('converge_times')
    def validate_converge_times(self, value):
        if any(t <= 0 for t in value):
            raise ValidationError("Times must be greater than 0")

    @validates('grid_step')
    def validate_grid_step(self, value):
        if not value > 0:
            raise ValidationError("Grid step must be greater than 0")

    @validates_schema
    def validate_horizon(self, data, **kwargs):
        horizon = data.get('horizon')
        times = data.get('t') or ()
        if horizon is not None and times and max(times) > horizon:
            raise ValidationError("Times must lie within the grid horizon", 'horizon')

    @post_load
    def make_config(self, data, **kwargs):
        params = build_params(data)
        return ExperimentConfig(
            params=params,
            times=data['t'],
            reps=data['reps'],
            seed=data['seed'],
            checks=data['checks'],
            grid_step=data['grid_step'],
            horizon=data['horizon'],
            quadrature_points=data['quadrature_points'],
            nested_points=data['nested_points'],
            workers=data['workers'],
            out_dir=data['out'],
            kmax=data['kmax'],
            cap=data['cap'],
            forward_reps=data['forward_reps'],
            descent_reps=data['descent_reps'],
            converge_reps=data['converge_reps'],
            asymptotic_reps=data['asymptotic_reps'],
            converge_times=data['converge_times'],
            graft_depth=data['graft_depth'],
            batch_size=data['batch_size'],
        )
