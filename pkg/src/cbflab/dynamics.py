"""Control-affine robot models: Dubins car and planar double integrator.

Both systems have a constant input matrix g, so the Hamiltonian
max_u p.(f + g u) over a control box is solved exactly by the sign rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

DUBINS_SPEED = 1.0          # m/s, fixed forward speed
DUBINS_OMEGA_MAX = 0.5      # rad/s
INTEGRATOR_V_MAX = 2.0      # m/s per axis
INTEGRATOR_A_MAX = 1.0      # m/s^2 per axis


@dataclass(frozen=True)
class SystemModel:
    name: str
    n: int
    m: int
    u_lo: np.ndarray
    u_hi: np.ndarray
    state_lo: np.ndarray
    state_hi: np.ndarray
    periodic: tuple[bool, ...]
    constants: dict

    def __post_init__(self):
        for attr in ("u_lo", "u_hi", "state_lo", "state_hi"):
            a = np.asarray(getattr(self, attr), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, attr, a)
        if not np.all(self.u_lo < self.u_hi):
            raise ValueError("control box must have u_lo < u_hi componentwise")
        if any(v <= 0 for v in self.constants.values()):
            raise ValueError("model constants must be strictly positive")

    def clamp_control(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.u_lo, self.u_hi)


def dubins_model(speed: float = DUBINS_SPEED, omega_max: float = DUBINS_OMEGA_MAX,
                 pos_bound: float = 3.0) -> SystemModel:
    """Constant-speed unicycle; state (px, py, theta), control omega."""
    return SystemModel(
        name="dubins", n=3, m=1,
        u_lo=[-omega_max], u_hi=[omega_max],
        state_lo=[-pos_bound, -pos_bound, -math.pi],
        state_hi=[pos_bound, pos_bound, math.pi],
        periodic=(False, False, True),
        constants={"v": speed},
    )


def integrator2d_model(v_max: float = INTEGRATOR_V_MAX, a_max: float = INTEGRATOR_A_MAX,
                       pos_bound: float = 3.0) -> SystemModel:
    """Planar double integrator; state (px, py, vx, vy), control (ax, ay)."""
    return SystemModel(
        name="integrator2d", n=4, m=2,
        u_lo=[-a_max, -a_max], u_hi=[a_max, a_max],
        state_lo=[-pos_bound, -pos_bound, -v_max, -v_max],
        state_hi=[pos_bound, pos_bound, v_max, v_max],
        periodic=(False, False, False, False),
        constants={"v_max": v_max, "a_max": a_max},
    )


def model_by_name(name: str, **kwargs) -> SystemModel:
    if name == "dubins":
        return dubins_model(**kwargs)
    if name == "integrator2d":
        return integrator2d_model(**kwargs)
    raise ValueError(f"unknown model '{name}'")


def flow(model: SystemModel, x, u) -> np.ndarray:
    """State derivative f_c(x, u)."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise ValueError("flow requires finite state and control")
    if model.name == "dubins":
        v = model.constants["v"]
        return np.array([v * math.cos(x[2]), v * math.sin(x[2]), u[0]])
    if model.name == "integrator2d":
        return np.array([x[2], x[3], u[0], u[1]])
    raise ValueError(model.name)


def affine_parts(model: SystemModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Drift f(x) and input matrix g(x) with flow = f + g @ u."""
    x = np.asarray(x, dtype=np.float64)
    if model.name == "dubins":
        v = model.constants["v"]
        f = np.array([v * math.cos(x[2]), v * math.sin(x[2]), 0.0])
        g = np.array([[0.0], [0.0], [1.0]])
        return f, g
    if model.name == "integrator2d":
        f = np.array([x[2], x[3], 0.0, 0.0])
        g = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        return f, g
    raise ValueError(model.name)


def control_matrix(model: SystemModel) -> np.ndarray:
    """g(x); constant for both supported models."""
    return affine_parts(model, np.zeros(model.n))[1]


def optimal_hamiltonian(model: SystemModel, x, p) -> tuple[float, np.ndarray]:
    """Exact max_u p.(f + g u) over the control box and its maximizer.

    Affine in u, so each component saturates by the sign of (p^T g)_i;
    ties go to the upper bound.
    """
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError("costate must be finite")
    f, g = affine_parts(model, x)
    b = p @ g
    u_star = np.where(b >= 0.0, model.u_hi, model.u_lo)
    h = float(p @ f + np.maximum(b * model.u_lo, b * model.u_hi).sum())
    return h, u_star


def hamiltonian_costate_bounds(model: SystemModel) -> np.ndarray:
    """Per-axis bounds alpha_i >= max |dH/dp_i| = max |xdot_i| (Lax-Friedrichs
    dissipation coefficients)."""
    if model.name == "dubins":
        v = model.constants["v"]
        return np.array([v, v, float(model.u_hi[0])])
    if model.name == "integrator2d":
        vm, am = model.constants["v_max"], model.constants["a_max"]
        return np.array([vm, vm, am, am])
    raise ValueError(model.name)


def drift_arrays(model: SystemModel, coords: list[np.ndarray]) -> list[np.ndarray]:
    """Drift components f_i over broadcastable coordinate arrays (the
    vectorized counterpart of affine_parts for grid sweeps)."""
    zero = np.zeros(1)
    if model.name == "dubins":
        v = model.constants["v"]
        return [v * np.cos(coords[2]), v * np.sin(coords[2]), zero]
    if model.name == "integrator2d":
        return [coords[2], coords[3], zero, zero]
    raise ValueError(model.name)


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


def rk4_step(model: SystemModel, x, u, dt: float) -> np.ndarray:
    """Classical RK4 with zero-order-hold control.

    Wraps periodic coordinates; clamps integrator velocities to the box
    after the step (the speed limit is not part of the HJ failure set).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    k1 = flow(model, x, u)
    k2 = flow(model, x + 0.5 * dt * k1, u)
    k3 = flow(model, x + 0.5 * dt * k2, u)
    k4 = flow(model, x + dt * k3, u)
    out = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if model.name == "dubins":
        out[2] = wrap_angle(out[2])
    elif model.name == "integrator2d":
        vm = model.constants["v_max"]
        out[2] = min(max(out[2], -vm), vm)
        out[3] = min(max(out[3], -vm), vm)
    return out


def rk4_rollout_batch(model: SystemModel, x0: np.ndarray, controls: np.ndarray,
                      dt: float) -> np.ndarray:
    """Integrate many control sequences from one start state.

    controls: (n_seq, n_steps, m) zero-order-hold inputs. Returns the state
    trace (n_seq, n_steps + 1, n). Vectorized across sequences.
    """
    n_seq, n_steps, _ = controls.shape
    out = np.empty((n_seq, n_steps + 1, model.n))
    out[:, 0] = x0

    def f_batch(xb, ub):
        if model.name == "dubins":
            v = model.constants["v"]
            return np.stack([v * np.cos(xb[:, 2]), v * np.sin(xb[:, 2]), ub[:, 0]], axis=1)
        return np.concatenate([xb[:, 2:4], ub], axis=1)

    xb = np.broadcast_to(x0, (n_seq, model.n)).copy()
    for k in range(n_steps):
        ub = controls[:, k]
        k1 = f_batch(xb, ub)
        k2 = f_batch(xb + 0.5 * dt * k1, ub)
        k3 = f_batch(xb + 0.5 * dt * k2, ub)
        k4 = f_batch(xb + dt * k3, ub)
        xb = xb + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if model.name == "dubins":
            xb[:, 2] = (xb[:, 2] + math.pi) % TWO_PI - math.pi
        else:
            vm = model.constants["v_max"]
            np.clip(xb[:, 2:4], -vm, vm, out=xb[:, 2:4])
        out[:, k + 1] = xb
    return out
