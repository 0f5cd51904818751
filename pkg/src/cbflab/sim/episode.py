"""Closed-loop execution: physics at 1 kHz, CBF-QP at the filter rate,
nominal controller and costmap updates at their own rates.

Observation updates recondition the filter (new SDF, new emitted network,
or re-interpolated oracle grid) and log the post-update margin h_new(x) --
the "critical moment" diagnostic: the robot must still be inside the new
safe set when the observation arrives. Between updates the conditioning is
bit-identical by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..dynamics import SystemModel, rk4_step
from ..filter import (
    CbfEvaluation,
    FilterProblem,
    OnCondition,
    OracleCondition,
    OrnCondition,
    QpResult,
    cbf_qp,
    ecbf_filter,
    evaluate_cbf,
)
from ..grids import SdfGrid, ValueGrid, euclidean_sdf
from ..neural.dataset import ObservationSpec
from .controllers import lqr_nominal, pursuit_nominal
from .environment import Environment, render_local_costmap

SUCCESS_RADIUS = 0.2  # m
DEFAULT_TIMEOUT = 60.0  # s


class ContainmentViolation(AssertionError):
    """Debug harness: h >= 0 while the observed SDF is nonpositive."""


@dataclass(frozen=True)
class RateSchedule:
    filter_hz: float = 200.0
    nominal_hz: float = 20.0
    obs_hz: float = 20.0
    physics_dt: float = 1e-3

    def __post_init__(self):
        if not (self.filter_hz >= self.nominal_hz >= self.obs_hz > 0):
            raise ValueError("rates must satisfy filter >= nominal >= observation")
        for hz in (self.filter_hz, self.nominal_hz, self.obs_hz):
            steps = 1.0 / (hz * self.physics_dt)
            if abs(steps - round(steps)) > 1e-9:
                raise ValueError(f"physics dt must divide the {hz} Hz period")

    def steps(self, hz: float) -> int:
        return round(1.0 / (hz * self.physics_dt))


@dataclass
class FilterStep:
    t: float
    h: float
    u_nom: np.ndarray
    u_star: np.ndarray
    feasible: bool
    out_of_domain: bool


@dataclass
class EpisodeResult:
    outcome: str                      # success | collision | timeout
    trajectory: np.ndarray            # (T, 1 + n): t, state
    filter_log: list[FilterStep]
    margins: list[tuple[float, float]]
    elapsed_sim: float
    latency_mean: float               # per filter call, seconds
    latency_p99: float

    @property
    def min_h(self) -> float:
        return min((s.h for s in self.filter_log), default=np.nan)

    @property
    def n_infeasible(self) -> int:
        return sum(not s.feasible for s in self.filter_log)

    @property
    def min_margin(self) -> float:
        return min((m for _, m in self.margins), default=np.nan)


# ---------------------------------------------------------------------------
# filter-conditioning methods


class OracleMethod:
    """Ground-truth HJ value grid over the world frame. Its conditioning is
    the world map itself (it is the learning-free upper bound), so
    observation ticks only log the margin; no costmap render is needed."""

    name = "oracle"
    uses_observations = True
    needs_costmap = False
    checks_containment = True

    def __init__(self, value: ValueGrid, world_sdf: SdfGrid | None = None):
        self.value = value
        self._cond = OracleCondition(value, sdf=world_sdf)

    def recondition(self, sdf: SdfGrid, center: np.ndarray) -> None:
        pass  # the world-frame grid is the conditioning; nothing to refresh

    def evaluate(self, model: SystemModel, x: np.ndarray) -> CbfEvaluation:
        return evaluate_cbf(model, self._cond, x)

    def filter_control(self, model: SystemModel, x, u_nom, gain: float):
        ev = self.evaluate(model, x)
        res = cbf_qp(FilterProblem(u_nom, ev, gain, model.u_lo, model.u_hi))
        return res, ev

    def conditioning_tag(self):
        return id(self._cond)


class NeuralMethod:
    """Hypernetwork-emitted CBF, regenerated at every observation."""

    uses_observations = True
    needs_costmap = True

    def __init__(self, net, variant: str):
        from ..neural.hypernet import hyper_forward  # torch import stays local
        self._hyper_forward = hyper_forward
        self.net = net
        self.variant = variant
        self.name = variant
        self.checks_containment = variant == "orn"
        self._cond = None

    def recondition(self, sdf: SdfGrid, center: np.ndarray) -> None:
        theta = self._hyper_forward(self.net, sdf.values)
        if self.variant == "orn":
            self._cond = OrnCondition(sdf=sdf, arch=self.net.arch, theta=theta,
                                      frame_center=center.copy())
        else:
            self._cond = OnCondition(arch=self.net.arch, theta=theta,
                                     frame_center=center.copy())

    def evaluate(self, model: SystemModel, x: np.ndarray) -> CbfEvaluation:
        if self._cond is None:
            raise RuntimeError("filter evaluated before the first observation")
        return evaluate_cbf(model, self._cond, x)

    def filter_control(self, model: SystemModel, x, u_nom, gain: float):
        ev = self.evaluate(model, x)
        res = cbf_qp(FilterProblem(u_nom, ev, gain, model.u_lo, model.u_hi))
        return res, ev

    def conditioning_tag(self):
        return None if self._cond is None else self._cond.theta.tobytes()


class EcbfMethod:
    """Second-order exponential CBF directly on the observed SDF."""

    name = "ecbf"
    uses_observations = True
    needs_costmap = True
    checks_containment = False

    def __init__(self, gains=(1.0, 2.0)):
        self.gains = tuple(gains)
        self._sdf: SdfGrid | None = None

    def recondition(self, sdf: SdfGrid, center: np.ndarray) -> None:
        self._sdf = sdf

    def evaluate(self, model: SystemModel, x: np.ndarray) -> CbfEvaluation:
        _, ev = ecbf_filter(model, x, np.zeros(model.m), self._sdf, self.gains)
        return ev

    def filter_control(self, model: SystemModel, x, u_nom, gain: float):
        res, ev = ecbf_filter(model, x, u_nom, self._sdf, self.gains)
        return res, ev

    def conditioning_tag(self):
        return id(self._sdf)


class UnfilteredMethod:
    name = "unfiltered"
    uses_observations = False
    needs_costmap = False
    checks_containment = False

    def recondition(self, sdf, center) -> None:  # pragma: no cover - never called
        pass

    def evaluate(self, model, x) -> CbfEvaluation:
        return CbfEvaluation(h=np.nan, grad=np.zeros(model.n), lf=0.0,
                             lg=np.zeros(model.m), out_of_domain=False)

    def filter_control(self, model: SystemModel, x, u_nom, gain: float):
        u = model.clamp_control(np.asarray(u_nom, dtype=np.float64))
        return QpResult(u, True, False), self.evaluate(model, x)

    def conditioning_tag(self):
        return None


def _nominal_control(model: SystemModel, x, goal) -> np.ndarray:
    if model.name == "dubins":
        return pursuit_nominal(model, x, goal)
    return lqr_nominal(model, x, goal)


def initial_state(model: SystemModel, env: Environment) -> np.ndarray:
    """Start pose: integrator at rest, Dubins facing the goal."""
    sx, sy = env.start
    if model.name == "dubins":
        heading = np.arctan2(env.goal[1] - sy, env.goal[0] - sx)
        return np.array([sx, sy, heading])
    return np.array([sx, sy, 0.0, 0.0])


def run_episode(env: Environment, model: SystemModel, method,
                rates: RateSchedule, obs: ObservationSpec, gain: float,
                timeout: float = DEFAULT_TIMEOUT,
                success_radius: float = SUCCESS_RADIUS,
                x0: np.ndarray | None = None,
                debug_checks: bool = False,
                record_trajectory_every: int = 10) -> EpisodeResult:
    """Deterministic single-threaded closed loop (see module docstring)."""
    dt = rates.physics_dt
    obs_steps = rates.steps(rates.obs_hz)
    nom_steps = rates.steps(rates.nominal_hz)
    filt_steps = rates.steps(rates.filter_hz)
    n_steps = round(timeout / dt)

    x = initial_state(model, env) if x0 is None else np.asarray(x0, dtype=np.float64)
    u_nom = np.zeros(model.m)
    u_star = np.zeros(model.m)
    goal = np.asarray(env.goal)

    traj = [np.concatenate([[0.0], x])]
    filter_log: list[FilterStep] = []
    margins: list[tuple[float, float]] = []
    latencies: list[float] = []
    outcome = "timeout"
    elapsed = timeout

    if env.collides(x[:2]):
        return EpisodeResult("collision", np.array(traj), [], [], 0.0, np.nan, np.nan)

    tag = None
    for k in range(n_steps):
        t = k * dt
        if method.uses_observations and k % obs_steps == 0:
            if method.needs_costmap:
                center = np.clip(x[:2], -env.bound, env.bound)
                costmap = render_local_costmap(env, center, obs)
                method.recondition(euclidean_sdf(costmap, cap=obs.cap), center)
            margins.append((t, method.evaluate(model, x).h))
            tag = method.conditioning_tag()
        if k % nom_steps == 0:
            u_nom = _nominal_control(model, x, goal)
        if k % filt_steps == 0:
            t0 = time.perf_counter()
            res, ev = method.filter_control(model, x, u_nom, gain)
            latencies.append(time.perf_counter() - t0)
            u_star = res.u
            filter_log.append(FilterStep(t, ev.h, u_nom.copy(), u_star.copy(),
                                         res.feasible, ev.out_of_domain))
            if debug_checks:
                if method.conditioning_tag() != tag and method.uses_observations:
                    raise AssertionError("conditioning changed between observations")
                if (method.checks_containment and res.feasible and ev.h >= 0
                        and ev.d_hat is not None and not ev.d_hat > 0):
                    raise ContainmentViolation(
                        f"h={ev.h:.4f} >= 0 but observed SDF {ev.d_hat:.4f} <= 0")
        x = rk4_step(model, x, u_star, dt)
        if (k + 1) % record_trajectory_every == 0:
            traj.append(np.concatenate([[(k + 1) * dt], x]))
        if env.collides(x[:2]):
            outcome, elapsed = "collision", (k + 1) * dt
            break
        if np.hypot(x[0] - goal[0], x[1] - goal[1]) <= success_radius:
            outcome, elapsed = "success", (k + 1) * dt
            break
    traj.append(np.concatenate([[elapsed], x]))
    lat = np.array(latencies) if latencies else np.array([np.nan])
    return EpisodeResult(outcome, np.array(traj), filter_log, margins, elapsed,
                         float(np.mean(lat)), float(np.quantile(lat, 0.99)))
