from marshmallow import Schema, fields


class ComparisonReportSchema(Schema):
    class Meta:
        ordered = True

    check = fields.String()
    quantity = fields.String()
    t = fields.Float(allow_none=True)
    theory = fields.Float(allow_none=True)
    estimate = fields.Float(allow_none=True)
    std_error = fields.Float(allow_none=True)
    z = fields.Float(allow_none=True, dump_only=True)
    statistic = fields.Float(allow_none=True)
    p_value = fields.Float(allow_none=True)
    replicas = fields.Integer()
    passed = fields.Boolean(allow_none=True)


class ConvergenceRowSchema(Schema):
    class Meta:
        ordered = True

    t = fields.Float()
    quantity = fields.String()
    estimate = fields.Float(allow_none=True)
    std_error = fields.Float(allow_none=True)
    theory = fields.Float(allow_none=True)
    asymptote = fields.Float(allow_none=True)
    replicas = fields.Integer()


class SpectrumRowSchema(Schema):
    class Meta:
        ordered = True

    replica = fields.Integer()
    t = fields.Float()
    N = fields.Integer()
    Z0 = fields.Integer()
    families = fields.Integer()
    spectrum = fields.String()


class ForwardRowSchema(Schema):
    class Meta:
        ordered = True

    replica = fields.Integer()
    t = fields.Float()
    survived = fields.Boolean()
    overflow = fields.Boolean()
    N = fields.Integer(allow_none=True)
    Z0 = fields.Integer(allow_none=True)
    families = fields.Integer(allow_none=True)
    spectrum = fields.String(allow_none=True)


class ScaleRowSchema(Schema):
    class Meta:
        ordered = True

    t = fields.Float()
    W = fields.Float()
    W_theta = fields.Float()
    survival = fields.Float()
    extinction = fields.Float()
    expected_population = fields.Float()


class MomentRowSchema(Schema):
    class Meta:
        ordered = True

    t = fields.Float()
    quantity = fields.String()
    k = fields.Integer(allow_none=True)
    l = fields.Integer(allow_none=True)
    value = fields.Float()


class LimitRowSchema(Schema):
    class Meta:
        ordered = True

    quantity = fields.String()
    k = fields.Integer(allow_none=True)
    value = fields.Float()
