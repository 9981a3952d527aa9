"""Gaussian datum and the d'Alembert solution of the first-order wave system

    u_t + v_x = 0,  v_t + c^2 u_x = 0,  u(0, x) = u0(x),  v(0, x) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

PULSE_CENTER = 1.5
PULSE_SHARPNESS = 100.0


def gaussian_u0(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-PULSE_SHARPNESS * (x - PULSE_CENTER) ** 2)


@dataclass(frozen=True)
class WaveProblem:
    c: float = 0.5
    u0: Callable = gaussian_u0
    T: float = 1.5625

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("wave speed must be positive")


def exact_u(t: float, x, problem: WaveProblem = WaveProblem()):
    if t < 0:
        raise ValueError("time must be non-negative")
    x = np.asarray(x, dtype=float)
    ct = problem.c * t
    return 0.5 * (problem.u0(x - ct) + problem.u0(x + ct))


def exact_v(t: float, x, problem: WaveProblem = WaveProblem()):
    if t < 0:
        raise ValueError("time must be non-negative")
    x = np.asarray(x, dtype=float)
    ct = problem.c * t
    return 0.5 * problem.c * (problem.u0(x - ct) - problem.u0(x + ct))
