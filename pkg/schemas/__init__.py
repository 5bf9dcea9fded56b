"""Marshmallow schemas for model parameters, experiment configs and report rows."""
