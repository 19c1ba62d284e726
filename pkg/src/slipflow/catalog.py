"""
Benchmark problem configurations on the unit square.

Three tracking-type control problems with increasing model complexity:

1. Navier-Stokes with slip friction (no damping).  The initial control
   is a gradient field, so the initial velocity vanishes and the flow is
   driven entirely by the optimizer.
2. Linear plus cubic damping (alpha, beta > 0, kappa = 0) with a nearly
   constant slip threshold.
3. Full model with a nonmonotone damping pair (beta > 0, kappa < 0,
   r = 3, q = 1.5) and a slowly decaying slip threshold; the velocity
   target is a smooth vortex array with zero trace.

Targets and initial controls are analytic callables of (x, y) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forms import ModelParams
from .friction import SlipLaw
from .optimize import CostWeights


@dataclass(frozen=True)
class Benchmark:
    name: str
    params: ModelParams
    law: SlipLaw
    eta: float                  # Uzawa pressure step
    weights: CostWeights
    u_target: object            # callable (x, y) -> (2, m)
    p_target: object            # callable (x, y) -> (m,)
    f_init: object              # callable (x, y) -> (2, m)


def _ex1_u(x, y):
    return np.array([-x ** 2 * (x - 1) * y * (3 * y - 2),
                     x * (3 * x - 2) * y ** 2 * (y - 1)])


def _ex1_p(x, y):
    return (2 * x - 1) * (2 * y - 1)


def _ex1_f(x, y):
    return np.array([x - 1, y - 1])


def _ex2_u(x, y):
    return np.array([np.sin(np.pi * x) * np.sin(np.pi * y),
                     np.cos(np.pi * x) * np.cos(np.pi * y)])


def _ex2_p(x, y):
    return np.sin(np.pi * x) * np.cos(np.pi * y)


def _ex2_f(x, y):
    return np.array([np.sin(np.pi * x), np.cos(np.pi * y)])


def _ex3_u(x, y):
    return np.array([np.sin(2 * np.pi * y) * (1 - np.cos(2 * np.pi * x)),
                     -np.sin(2 * np.pi * x) * (1 - np.cos(2 * np.pi * y))])


def _ex3_p(x, y):
    return 2 * np.pi * (np.cos(2 * np.pi * y) - np.cos(2 * np.pi * x))


def _ex3_f(x, y):
    return np.array([np.sin(2 * np.pi * y), -np.sin(2 * np.pi * x)])


BENCHMARKS = {
    1: Benchmark(
        name="slip-driven cavity tracking",
        params=ModelParams(mu=1.2, alpha=0.0, beta=0.0, kappa=0.0, r=3.0, q=1.0),
        law=SlipLaw(a=1.55, b=1.53, rho=3.0),
        eta=1.0,
        weights=CostWeights(1.0, 1.2, 0.2),
        u_target=_ex1_u, p_target=_ex1_p, f_init=_ex1_f,
    ),
    2: Benchmark(
        name="damped flow tracking",
        params=ModelParams(mu=1.0, alpha=1.5, beta=1.0, kappa=0.0, r=3.0, q=1.0),
        law=SlipLaw(a=4.01, b=4.00, rho=1.5),
        eta=2.0,
        weights=CostWeights(1.0, 1.0, 0.5),
        u_target=_ex2_u, p_target=_ex2_p, f_init=_ex2_f,
    ),
    3: Benchmark(
        name="nonmonotone damping vortex tracking",
        params=ModelParams(mu=1.0, alpha=0.5, beta=1.0, kappa=-0.5, r=3.0, q=1.5),
        law=SlipLaw(a=3.25, b=3.20, rho=0.5),
        eta=0.1,
        weights=CostWeights(1.0, 0.5, 0.1),
        u_target=_ex3_u, p_target=_ex3_p, f_init=_ex3_f,
    ),
}


def get_benchmark(example: int) -> Benchmark:
    try:
        return BENCHMARKS[int(example)]
    except (KeyError, ValueError):
        raise KeyError(f"unknown example id {example!r}; choose 1, 2 or 3")
