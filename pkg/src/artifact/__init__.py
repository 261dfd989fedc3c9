"""Numerical laboratory for the stochastic heat equation with distributional drift."""
