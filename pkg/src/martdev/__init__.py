"""Deviation inequalities for martingales: bound evaluators, model samplers,
regression bounds and Monte Carlo verification."""

__version__ = "0.1.0"
