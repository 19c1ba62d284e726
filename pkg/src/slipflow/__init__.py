"""Finite element solver and optimal control driver for stationary
incompressible flow with nonlinear damping and slip friction on part
of the boundary."""

__version__ = "0.1.0"
