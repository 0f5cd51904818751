from .environment import Disc, Environment, Rect, generate_forest, render_local_costmap
from .presets import Preset, get_preset
from .controllers import lqr_nominal, pursuit_nominal, riccati_gain_1d
from .episode import EpisodeResult, RateSchedule, run_episode
from .batch import run_batch

__all__ = [
    "Disc", "Environment", "Rect", "generate_forest", "render_local_costmap",
    "Preset", "get_preset",
    "lqr_nominal", "pursuit_nominal", "riccati_gain_1d",
    "EpisodeResult", "RateSchedule", "run_episode",
    "run_batch",
]
