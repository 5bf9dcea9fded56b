"""Errors, decorators, statistics, random streams and CSV output shared by the engines and commands."""
