"""Steady-state solution of the avoid-set HJB variational inequality.

The value function is initialized at the failure function F (an SDF lifted
onto the state grid) and stepped backward in pseudo-time with a first-order
upwind Lax-Friedrichs Hamiltonian until the max-norm residual per unit
pseudo-time drops below tolerance:

    V <- min(F, V + dt * (H(x, D0 V) - sum_i alpha_i (D+_i V - D-_i V) / 2))

Its zero-sublevel set is the backward reachable tube; the complement is the
maximal safe set used as the training target and as the oracle CBF.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    SystemModel,
    control_matrix,
    drift_arrays,
    hamiltonian_costate_bounds,
    rk4_rollout_batch,
)
from .grids import SdfGrid, StateGrid, ValueGrid, interpolate_many


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 0.8
    tolerance: float = 1e-3     # value units per unit pseudo-time
    max_iterations: int = 20_000
    check_interval: int = 10
    scheme: str = "upwind-lax-friedrichs-1"

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("CFL number must be in (0, 1]")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class FailureField:
    """F(x) sampled on a state grid; for these systems F depends only on the
    positional coordinates, so values are constant along the other axes."""

    grid: StateGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64).reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("failure field must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def axes(self):
        return self.grid.axes

    def grid_values(self) -> np.ndarray:
        return self.values


def lift_sdf_to_state_grid(sdf: SdfGrid, grid: StateGrid) -> FailureField:
    """Sample F(x) = d(p_x, p_y) on every grid point (broadcast over the
    non-positional axes)."""
    x_lo, x_hi, y_lo, y_hi = sdf.extent
    ax, ay = grid.axes[0], grid.axes[1]
    if ax.lo < x_lo - 1e-9 or ax.hi > x_hi + 1e-9 or ay.lo < y_lo - 1e-9 or ay.hi > y_hi + 1e-9:
        raise ValueError("state grid positional extent exceeds the SDF raster")
    px, py = np.meshgrid(ax.points(), ay.points(), indexing="ij")
    q = np.stack([px.ravel(), py.ravel()], axis=1)
    vals, _ = interpolate_many(sdf, q)
    planar = vals.reshape(ax.count, ay.count)
    full = planar.reshape(planar.shape + (1,) * (grid.dim - 2))
    return FailureField(grid, np.broadcast_to(full, grid.shape).copy())


def _one_sided_diffs(v: np.ndarray, axis: int, spacing: float, periodic: bool):
    """Forward/backward difference quotients with linear-extrapolation ghost
    cells on non-periodic axes (so D+ = D- at the boundary)."""
    if periodic:
        fwd = (np.roll(v, -1, axis=axis) - v) / spacing
        bwd = (v - np.roll(v, 1, axis=axis)) / spacing
        return fwd, bwd
    d = np.diff(v, axis=axis) / spacing
    first = [slice(None)] * v.ndim
    last = [slice(None)] * v.ndim
    first[axis] = slice(0, 1)
    last[axis] = slice(-1, None)
    fwd = np.concatenate([d, d[tuple(last)]], axis=axis)
    bwd = np.concatenate([d[tuple(first)], d], axis=axis)
    return fwd, bwd


def solve_hjb_vi(fail: FailureField, model: SystemModel, cfg: SolverConfig | None = None,
                 on_check=None) -> ValueGrid:
    """Propagate V backward in pseudo-time to its steady state.

    `on_check(iteration, value_array, residual)` is called at every
    convergence check (diagnostics / monotonicity tests). Raises
    ConvergenceError if the residual does not drop below tolerance within
    the iteration budget.
    """
    cfg = cfg or SolverConfig()
    grid = fail.grid
    if grid.dim != model.n:
        raise ValueError(f"grid dim {grid.dim} != model dim {model.n}")
    axes = grid.axes
    spacings = np.array([ax.spacing for ax in axes])
    alpha = hamiltonian_costate_bounds(model)
    dt = cfg.cfl / float(np.sum(alpha / spacings))

    coords = grid.coordinate_arrays()
    drift = drift_arrays(model, coords)
    g_mat = control_matrix(model)

    f_arr = fail.values
    v = f_arr.copy()
    v_at_check = v.copy()
    for itr in range(1, cfg.max_iterations + 1):
        adv = np.zeros_like(v)
        dissip = np.zeros_like(v)
        b = [np.zeros_like(v) for _ in range(model.m)]
        for a in range(model.n):
            fwd, bwd = _one_sided_diffs(v, a, spacings[a], axes[a].periodic)
            central = 0.5 * (fwd + bwd)
            adv += central * drift[a]
            dissip += (0.5 * alpha[a]) * (fwd - bwd)
            for j in range(model.m):
                if g_mat[a, j] != 0.0:
                    b[j] += central * g_mat[a, j]
        ham = adv
        for j in range(model.m):
            ham += np.maximum(b[j] * model.u_lo[j], b[j] * model.u_hi[j])
        # backward step V <- V + dt*H; the LF term enters with + so it acts
        # as forward diffusion (alpha_i * dx_i/2 * V_xx) under the CFL bound.
        # Taking the min with the previous iterate freezes the (boundary
        # extrapolation) transients that would otherwise creep back up,
        # keeping the iterate sequence pointwise nonincreasing.
        v = np.minimum(v, np.minimum(f_arr, v + dt * (ham + dissip)))

        if itr % cfg.check_interval == 0:
            residual = float(np.max(np.abs(v - v_at_check))) / (dt * cfg.check_interval)
            if on_check is not None:
                on_check(itr, v, residual)
            if residual < cfg.tolerance:
                return ValueGrid(grid, v)
            v_at_check = v.copy()
    raise ConvergenceError(
        f"HJB-VI not converged after {cfg.max_iterations} iterations "
        f"(residual {residual:.3e} > {cfg.tolerance:.3e})", residual)


def brt_membership(value: ValueGrid, x) -> bool:
    """True iff x is inside the backward reachable tube (V(x) <= 0).

    Out-of-domain states are treated as unsafe (conservative).
    """
    vals, oob = interpolate_many(value, np.asarray(x, dtype=np.float64)[None, :])
    if oob[0]:
        return True
    return bool(vals[0] <= 0.0)


def _bang_bang_sequences(model: SystemModel, n_segments: int) -> np.ndarray:
    """All piecewise-constant control sequences with per-axis levels in
    {u_lo, 0, u_hi}; shape (n_seq, n_segments, m)."""
    levels = [np.array([model.u_lo[j], 0.0, model.u_hi[j]]) for j in range(model.m)]
    per_segment = np.stack(
        np.meshgrid(*levels, indexing="ij"), axis=-1).reshape(-1, model.m)
    k = per_segment.shape[0]
    idx = np.indices((k,) * n_segments).reshape(n_segments, -1).T
    return per_segment[idx]  # (k**n_segments, n_segments, m)


def rollout_oracle(x, fail: FailureField, model: SystemModel, horizon: float,
                   dt: float = 0.02, n_random: int = 128, seed: int = 0) -> bool:
    """Independent safety check: does any enumerated control keep F > 0?

    Enumerates piecewise-bang-bang sequences (levels in {u_lo, 0, u_hi} per
    axis over equal segments, at most 4 switches) plus random piecewise
    sequences, integrates each with RK4, and samples F along the way.
    Clamped field interpolation outside the grid.
    """
    x = np.asarray(x, dtype=np.float64)
    f0, _ = interpolate_many(fail, x[None, :])
    if f0[0] <= 0.0:
        return False
    n_segments = 5 if model.m == 1 else 3
    seqs = _bang_bang_sequences(model, n_segments)
    rng = np.random.default_rng(seed)
    rand = rng.uniform(model.u_lo, model.u_hi, size=(n_random, n_segments, model.m))
    seqs = np.concatenate([seqs, rand], axis=0)

    steps_per_seg = max(1, round(horizon / n_segments / dt))
    controls = np.repeat(seqs, steps_per_seg, axis=1)
    trace = rk4_rollout_batch(model, x, controls, dt)
    flat = trace.reshape(-1, model.n)
    fvals, _ = interpolate_many(fail, flat)
    min_f = fvals.reshape(trace.shape[0], trace.shape[1]).min(axis=1)
    return bool(np.any(min_f > 0.0))
