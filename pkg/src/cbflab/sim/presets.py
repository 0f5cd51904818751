"""Named configurations: observation geometry, state grids, filter rates and
gains per robot model, at reference ("paper") and CI-friendly ("desk") scale.

Reference scale: 6x6 m costmaps at 0.06 m (Dubins) / 0.075 m (integrator)
resolution; state grids 100x100x30 and 80x80x20x20; CBF-QP at 200 Hz with
k = 2.6 / 0.7; costmap updates at 20 Hz / 5 Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..dynamics import SystemModel, model_by_name
from ..grids import GridAxis, StateGrid
from ..neural.dataset import ObservationSpec
from .episode import RateSchedule

MAP_EXTENT = 6.0  # m, square costmap side
WORLD_HALF = 3.5  # m, world half-extent covered by ground-truth solves
_CAP = math.hypot(MAP_EXTENT, MAP_EXTENT)


@dataclass(frozen=True)
class Preset:
    name: str
    model_name: str
    obs: ObservationSpec
    state_grid: StateGrid   # observation-frame grid (training targets)
    world_grid: StateGrid   # world-frame grid (ground-truth oracle solves)
    patch_points: int
    rates: RateSchedule
    qp_gain: float
    # collision buffer subtracted from the SDF before HJ solves (robot
    # radius / costmap inflation stand-in; the point-robot boundary V = 0
    # otherwise sits one interpolation error away from true contact, and
    # the discrete-time filter rides h -> 0 with one-way error drift)
    failure_margin: float = 0.15

    @property
    def model(self) -> SystemModel:
        return model_by_name(self.model_name)


def _dubins_grid(nx: int, ntheta: int, half: float = MAP_EXTENT / 2) -> StateGrid:
    return StateGrid((GridAxis(-half, half, nx), GridAxis(-half, half, nx),
                      GridAxis(-math.pi, math.pi, ntheta, periodic=True)))


def _integrator_grid(nx: int, nv: int, v_max: float = 2.0,
                     half: float = MAP_EXTENT / 2) -> StateGrid:
    return StateGrid((GridAxis(-half, half, nx), GridAxis(-half, half, nx),
                      GridAxis(-v_max, v_max, nv), GridAxis(-v_max, v_max, nv)))


_PRESETS = {
    "dubins-paper": Preset(
        name="dubins-paper", model_name="dubins",
        obs=ObservationSpec(size=100, resolution=0.06, cap=_CAP),
        state_grid=_dubins_grid(100, 30),
        world_grid=_dubins_grid(116, 30, half=WORLD_HALF), patch_points=16,
        rates=RateSchedule(filter_hz=200, nominal_hz=20, obs_hz=20),
        qp_gain=2.6, failure_margin=0.2),
    "dubins-desk": Preset(
        name="dubins-desk", model_name="dubins",
        obs=ObservationSpec(size=60, resolution=0.1, cap=_CAP),
        # 32 theta points (not 20): keeps the LF theta-diffusion bias at
        # head-on minima below the collision buffer, and 32 % 4 == 0 keeps
        # rotation augmentation exact
        state_grid=_dubins_grid(60, 32),
        world_grid=_dubins_grid(70, 32, half=WORLD_HALF), patch_points=16,
        rates=RateSchedule(filter_hz=200, nominal_hz=20, obs_hz=20),
        qp_gain=2.6, failure_margin=0.2),
    "integrator-paper": Preset(
        name="integrator-paper", model_name="integrator2d",
        obs=ObservationSpec(size=80, resolution=0.075, cap=_CAP),
        state_grid=_integrator_grid(80, 20),
        world_grid=_integrator_grid(94, 20, half=WORLD_HALF), patch_points=16,
        rates=RateSchedule(filter_hz=200, nominal_hz=200, obs_hz=5),
        qp_gain=0.7),
    "integrator-desk": Preset(
        name="integrator-desk", model_name="integrator2d",
        obs=ObservationSpec(size=60, resolution=0.1, cap=_CAP),
        state_grid=_integrator_grid(40, 12),
        world_grid=_integrator_grid(46, 12, half=WORLD_HALF), patch_points=16,
        rates=RateSchedule(filter_hz=200, nominal_hz=200, obs_hz=5),
        qp_gain=0.7),
}


def get_preset(name: str) -> Preset:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset '{name}' (have {sorted(_PRESETS)})") from None


def preset_names() -> list[str]:
    return sorted(_PRESETS)
