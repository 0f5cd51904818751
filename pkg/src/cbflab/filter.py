"""CBF evaluation, exact CBF-QP safety filtering, and the ECBF baseline.

The QP  min 0.5 ||u - u_nom||^2  s.t.  u in box,  Lf h + Lg h . u + k h >= 0
has one halfplane and a box; for m <= 2 the minimizer is found exactly:
either the clipped nominal is feasible, or the optimum lies on the
halfplane boundary and reduces to a 1D projection onto the segment
(halfplane line) ∩ box. No iterative solver, no allocation churn at 200 Hz.

When the halfplane misses the box entirely the filter cannot certify
safety; it returns the box point maximizing Lg h . u (keeping the nominal
on axes that do not matter) and flags the problem infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import SystemModel, affine_parts, wrap_angle
from .grids import SdfGrid, ValueGrid, interpolate_gradient_many, interpolate_many
from .neural.mainnet import MainNetArch, main_forward, main_input_gradient


@dataclass(frozen=True)
class CbfEvaluation:
    h: float
    grad: np.ndarray          # (n,)
    lf: float                 # grad . f(x)
    lg: np.ndarray            # (m,) grad . g(x)
    out_of_domain: bool
    d_hat: float | None = None  # interpolated SDF at x (orn/oracle diagnostics)


@dataclass(frozen=True)
class FilterProblem:
    u_nom: np.ndarray
    evaluation: CbfEvaluation
    gain: float               # linear class-K alpha(h) = gain * h
    u_lo: np.ndarray
    u_hi: np.ndarray

    def __post_init__(self):
        if self.gain < 0:
            raise ValueError("class-K gain must be nonnegative")
        for attr in ("u_nom", "u_lo", "u_hi"):
            a = np.asarray(getattr(self, attr), dtype=np.float64)
            object.__setattr__(self, attr, a)


@dataclass(frozen=True)
class QpResult:
    u: np.ndarray
    feasible: bool
    constraint_active: bool


# ---------------------------------------------------------------------------
# conditioning variants


@dataclass(frozen=True)
class OracleCondition:
    """Interpolates a solved HJ value grid directly."""
    value: ValueGrid
    sdf: SdfGrid | None = None
    variant: str = "oracle"


@dataclass(frozen=True)
class OrnCondition:
    """Residual variant: h = interpolated SDF minus the emitted network's
    (positive) residual; states are taken relative to the observation frame
    center before normalization."""
    sdf: SdfGrid
    arch: MainNetArch
    theta: np.ndarray
    frame_center: np.ndarray  # world position the patch box is relative to
    variant: str = "orn"


@dataclass(frozen=True)
class OnCondition:
    """Ablation: the network output is the CBF value itself."""
    arch: MainNetArch
    theta: np.ndarray
    frame_center: np.ndarray
    variant: str = "on"


def _relative_state(model: SystemModel, x: np.ndarray, frame_center: np.ndarray) -> np.ndarray:
    rel = x.copy()
    rel[0] -= frame_center[0]
    rel[1] -= frame_center[1]
    if model.name == "dubins":
        rel[2] = wrap_angle(rel[2])
    return rel


def evaluate_cbf(model: SystemModel, cond, x) -> CbfEvaluation:
    """CBF value, gradient, and Lie derivatives at state x for the given
    conditioning (oracle | orn | on)."""
    x = np.asarray(x, dtype=np.float64)
    pos = x[None, :2]
    if isinstance(cond, OracleCondition):
        vals, oob = interpolate_many(cond.value, x[None])
        grads, _ = interpolate_gradient_many(cond.value, x[None])
        h, grad, out = float(vals[0]), grads[0], bool(oob[0])
        d_hat = None
        if cond.sdf is not None:
            dv, doob = interpolate_many(cond.sdf, pos)
            d_hat = float(dv[0])
            out = out or bool(doob[0])
    elif isinstance(cond, OrnCondition):
        dv, doob = interpolate_many(cond.sdf, pos)
        dg, _ = interpolate_gradient_many(cond.sdf, pos)
        rel = _relative_state(model, x, cond.frame_center)
        r = main_forward(cond.arch, cond.theta, rel)
        rg = main_input_gradient(cond.arch, cond.theta, rel)
        h = float(dv[0]) - r
        grad = -rg
        grad[0] += dg[0, 0]
        grad[1] += dg[0, 1]
        out = bool(doob[0]) or _outside_patch_box(cond.arch, rel)
        d_hat = float(dv[0])
    elif isinstance(cond, OnCondition):
        rel = _relative_state(model, x, cond.frame_center)
        h = main_forward(cond.arch, cond.theta, rel)
        grad = main_input_gradient(cond.arch, cond.theta, rel)
        out = _outside_patch_box(cond.arch, rel)
        d_hat = None
    else:
        raise TypeError(f"unknown conditioning {type(cond)!r}")
    f, g = affine_parts(model, x)
    return CbfEvaluation(h=h, grad=grad, lf=float(grad @ f), lg=grad @ g,
                         out_of_domain=out, d_hat=d_hat)


def _outside_patch_box(arch: MainNetArch, rel: np.ndarray) -> bool:
    lo = np.asarray(arch.norm_lo)
    hi = np.asarray(arch.norm_hi)
    tol = 1e-9 * (hi - lo)
    return bool(np.any(rel < lo - tol) | np.any(rel > hi + tol))


# ---------------------------------------------------------------------------
# exact box QP


def _best_effort(a: np.ndarray, u_nom: np.ndarray, u_lo: np.ndarray,
                 u_hi: np.ndarray) -> np.ndarray:
    """Box point maximizing a . u; axes with zero coefficient keep the
    clipped nominal (least intervention)."""
    out = np.clip(u_nom, u_lo, u_hi)
    out = np.where(a > 0, u_hi, out)
    out = np.where(a < 0, u_lo, out)
    return out


def solve_halfplane_box_qp(u_nom: np.ndarray, a: np.ndarray, b: float,
                           u_lo: np.ndarray, u_hi: np.ndarray) -> QpResult:
    """Exact minimizer of 0.5||u - u_nom||^2 over {u in box : a.u >= b}."""
    m = u_nom.shape[0]
    tol = 1e-12 * max(1.0, abs(b), float(np.abs(a).sum()))
    clipped = np.clip(u_nom, u_lo, u_hi)
    if a @ clipped >= b - tol:
        return QpResult(clipped, True, False)
    # the clipped nominal violates the halfplane: optimum lies on a.u = b
    if m == 1:
        if a[0] == 0.0:
            return QpResult(_best_effort(a, u_nom, u_lo, u_hi), False, False)
        u = b / a[0]
        if u_lo[0] - 1e-12 <= u <= u_hi[0] + 1e-12:
            return QpResult(np.array([min(max(u, u_lo[0]), u_hi[0])]), True, True)
        return QpResult(_best_effort(a, u_nom, u_lo, u_hi), False, False)
    if m == 2:
        nrm2 = float(a @ a)
        if nrm2 == 0.0:
            return QpResult(_best_effort(a, u_nom, u_lo, u_hi), False, False)
        u_p = u_nom + ((b - a @ u_nom) / nrm2) * a
        d = np.array([-a[1], a[0]]) / np.sqrt(nrm2)
        t_lo, t_hi = -np.inf, np.inf
        feasible_line = True
        for i in range(2):
            if abs(d[i]) > 1e-14:
                c1 = (u_lo[i] - u_p[i]) / d[i]
                c2 = (u_hi[i] - u_p[i]) / d[i]
                t_lo = max(t_lo, min(c1, c2))
                t_hi = min(t_hi, max(c1, c2))
            elif not (u_lo[i] - 1e-12 <= u_p[i] <= u_hi[i] + 1e-12):
                feasible_line = False
        if not feasible_line or t_lo > t_hi + 1e-12:
            return QpResult(_best_effort(a, u_nom, u_lo, u_hi), False, False)
        t = float(np.clip((u_nom - u_p) @ d, t_lo, t_hi))
        u = np.clip(u_p + t * d, u_lo, u_hi)  # final clip absorbs roundoff
        return QpResult(u, True, True)
    raise ValueError("box QP supports m <= 2")


def cbf_qp(problem: FilterProblem) -> QpResult:
    """Minimally-invasive safe control: project the nominal onto the CBF
    constraint within the control box."""
    ev = problem.evaluation
    a = np.asarray(ev.lg, dtype=np.float64).reshape(-1)
    b = -(ev.lf + problem.gain * ev.h)
    return solve_halfplane_box_qp(problem.u_nom, a, b, problem.u_lo, problem.u_hi)


# ---------------------------------------------------------------------------
# ECBF baseline (double integrator, relative degree 2)


ECBF_GAINS = (1.0, 2.0)


def ecbf_filter(model: SystemModel, x, u_nom, sdf: SdfGrid,
                gains: tuple[float, float] = ECBF_GAINS) -> tuple[QpResult, CbfEvaluation]:
    """Second-order exponential CBF on the interpolated SDF:

        LgLf d . u + k1 d + k2 ddot >= 0,

    with d = d_hat(p), ddot = grad d_hat . v, and the multilinear
    interpolant's curvature taken as zero within a cell (Lf^2 d = 0).
    """
    if model.name != "integrator2d":
        raise ValueError("ECBF baseline expects the double integrator model")
    x = np.asarray(x, dtype=np.float64)
    u_nom = np.asarray(u_nom, dtype=np.float64)
    pos = x[None, :2]
    dv, oob = interpolate_many(sdf, pos)
    dg, _ = interpolate_gradient_many(sdf, pos)
    d = float(dv[0])
    grad_d = dg[0]
    d_dot = float(grad_d @ x[2:4])
    k1, k2 = gains
    a = grad_d
    b = -(k1 * d + k2 * d_dot)
    res = solve_halfplane_box_qp(u_nom, a, b, model.u_lo, model.u_hi)
    full_grad = np.array([grad_d[0], grad_d[1], 0.0, 0.0])
    f, g = affine_parts(model, x)
    ev = CbfEvaluation(h=d, grad=full_grad, lf=float(full_grad @ f),
                       lg=full_grad @ g, out_of_domain=bool(oob[0]), d_hat=d)
    return res, ev
