"""Additive stochastic heat equation with general Gaussian noise: existence checks,
exact variance, Wong-Zakai simulation, discrete integration by parts and
Littlewood-Paley regularity analysis."""

__version__ = "0.1.0"
