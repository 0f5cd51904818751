"""Nominal controllers: per-axis LQR for the double integrator and pure
pursuit for the Dubins car. Neither knows about obstacles; safety is the
filter's job."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from ..dynamics import SystemModel, wrap_angle

LQR_Q_POS = 10.0
LQR_Q_VEL = 1.0
LQR_R = 1.0
PURSUIT_GAIN = 1.5


def riccati_gain_1d(q_pos: float = LQR_Q_POS, q_vel: float = LQR_Q_VEL,
                    r: float = LQR_R, tol: float = 1e-10,
                    max_iters: int = 2_000_000) -> np.ndarray:
    """LQR gain for one double-integrator axis (A=[[0,1],[0,0]], B=[0,1]^T).

    Integrates the continuous Riccati equation to its fixed point:
    P' = A^T P + P A - P B r^-1 B^T P + Q, stopping when the update falls
    below `tol`. Returns K = r^-1 B^T P as a length-2 vector.
    """
    q11, q22 = q_pos, q_vel
    p11, p12, p22 = q11, 0.0, q22
    dt = 0.01
    for _ in range(max_iters):
        # closed forms of A^T P + P A and P B B^T P for this structure
        d11 = -p12 * p12 / r + q11
        d12 = p11 - p12 * p22 / r
        d22 = 2 * p12 - p22 * p22 / r + q22
        p11 += dt * d11
        p12 += dt * d12
        p22 += dt * d22
        if max(abs(d11), abs(d12), abs(d22)) * dt < tol:
            return np.array([p12 / r, p22 / r])
    raise RuntimeError("Riccati iteration did not reach a fixed point")


@lru_cache(maxsize=None)
def _integrator_gain() -> tuple[float, float]:
    k = riccati_gain_1d()
    return (float(k[0]), float(k[1]))


def lqr_nominal(model: SystemModel, x, goal) -> np.ndarray:
    """u = -K (x - x_goal) per axis with x_goal = (goal, 0, 0), clamped."""
    if model.name != "integrator2d":
        raise ValueError("LQR nominal expects the double integrator")
    kp, kv = _integrator_gain()
    ux = -kp * (x[0] - goal[0]) - kv * x[2]
    uy = -kp * (x[1] - goal[1]) - kv * x[3]
    return model.clamp_control(np.array([ux, uy]))


def pursuit_nominal(model: SystemModel, x, goal, gain: float = PURSUIT_GAIN) -> np.ndarray:
    """Heading-error proportional steering toward the goal."""
    if model.name != "dubins":
        raise ValueError("pursuit nominal expects the Dubins car")
    err = wrap_angle(math.atan2(goal[1] - x[1], goal[0] - x[0]) - x[2])
    return model.clamp_control(np.array([gain * err]))
