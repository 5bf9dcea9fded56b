from marshmallow import Schema, fields, validates, ValidationError, post_load

from models import LifespanDistribution, ModelParams
from utils.errors import ParameterError


def build_params(data):
    return ModelParams(
        b=data['b'],
        theta=data['theta'],
        lifespan=LifespanDistribution.from_spec(data['lifespan']),
    )


class ModelFieldsSchema(Schema):
    b = fields.Float(required=True)
    theta = fields.Float(load_default=0.0)
    lifespan = fields.String(required=True)

    @validates('b')
    def validate_b(self, value):
        if not value > 0:
            raise ValidationError("Birth rate must be greater than 0")

    @validates('theta')
    def validate_theta(self, value):
        if value < 0:
            raise ValidationError("Mutation rate cannot be negative")

    @validates('lifespan')
    def validate_lifespan(self, value):
        try:
            LifespanDistribution.from_spec(value)
        except ParameterError as error:
            raise ValidationError(str(error))


class ModelParamsSchema(ModelFieldsSchema):
    @post_load
    def make_params(self, data, **kwargs):
        return build_params(data)


def model_data(b, theta, lifespan):
    """Raw input for ModelParamsSchema, leaving out flags that were not given"""
    data = {'theta': theta}
    if b is not None:
        data['b'] = b
    if lifespan is not None:
        data['lifespan'] = lifespan
    return data
