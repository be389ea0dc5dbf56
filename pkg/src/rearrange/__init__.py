"""Tabletop rearrangement planning: dependency graphs, buffer minimization and task planners."""

__version__ = "0.1.0"
