"""Tunable-compliance legged robots: springs, hopper dynamics, analysis, modes, controllers and navigation."""

__version__ = "0.1.0"
