"""Numerical engines: scale functions, samplers, moment formulas and the validation harness."""
