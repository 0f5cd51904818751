"""Batch evaluation: success-rate tables across methods and obstacle-domain
presets, with optional process parallelism (episodes are independent and
seeded, so results merge deterministically by index)."""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..grids import euclidean_sdf, interpolate_many
from ..hj import FailureField, SolverConfig, lift_sdf_to_state_grid, solve_hjb_vi
from .environment import generate_forest, render_world_costmap
from .episode import (
    DEFAULT_TIMEOUT,
    EcbfMethod,
    NeuralMethod,
    OracleMethod,
    UnfilteredMethod,
    initial_state,
    run_episode,
)
from .presets import get_preset

DOMAIN_RADII = {"in": (0.5, 0.5), "out": (0.2, 1.0)}
SAFE_START_MARGIN = 0.25   # value-function clearance required at x0
N_FOREST_OBSTACLES = 10
EVAL_CLEARANCE = 0.8       # start/goal clearance for evaluation forests


@dataclass(frozen=True)
class EpisodeSpec:
    preset_name: str
    method: str                  # oracle | orn | on | ecbf | unfiltered
    domain: str                  # in | out
    episode: int
    seed: int
    model_path: str | None = None
    safe_start: bool = False
    timeout: float = DEFAULT_TIMEOUT
    debug_checks: bool = False
    n_obstacles: int = N_FOREST_OBSTACLES


@lru_cache(maxsize=4)
def _load_bundle(path: str):
    from ..neural.hypernet import load_hypernet
    net, model_name = load_hypernet(path)
    return net, model_name


def solve_world_value(env, preset):
    """Ground-truth HJ value function of the full environment (failure set
    inflated by the preset's collision buffer). Returns (value, world_sdf)."""
    occ = render_world_costmap(env, preset.obs.resolution)
    sdf = euclidean_sdf(occ, cap=preset.obs.cap)
    fail = lift_sdf_to_state_grid(sdf, preset.world_grid)
    if preset.failure_margin:
        fail = FailureField(fail.grid, fail.values - preset.failure_margin)
    return solve_hjb_vi(fail, preset.model, SolverConfig()), sdf


def _safe_start_env(spec: EpisodeSpec, preset):
    """Roll environment seeds until the start state has value-function
    clearance (the filter cannot save a start inside the BRT)."""
    for attempt in range(50):
        env = generate_forest(spec.seed + 100_000 * attempt,
                              n_obstacles=spec.n_obstacles,
                              radius_range=DOMAIN_RADII[spec.domain],
                              clearance=EVAL_CLEARANCE)
        value, sdf = solve_world_value(env, preset)
        x0 = initial_state(preset.model, env)
        v0, oob = interpolate_many(value, x0[None])
        if not oob[0] and v0[0] > SAFE_START_MARGIN:
            return env, value, sdf
    raise RuntimeError(f"no safe start found for seed {spec.seed}")


def run_episode_spec(spec: EpisodeSpec) -> dict:
    preset = get_preset(spec.preset_name)
    value = sdf = None
    if spec.method == "oracle" and spec.safe_start:
        env, value, sdf = _safe_start_env(spec, preset)
    else:
        env = generate_forest(spec.seed, n_obstacles=spec.n_obstacles,
                              radius_range=DOMAIN_RADII[spec.domain],
                              clearance=EVAL_CLEARANCE)

    if spec.method == "oracle":
        if value is None:
            value, sdf = solve_world_value(env, preset)
        method = OracleMethod(value, world_sdf=sdf)
    elif spec.method in ("orn", "on"):
        if spec.model_path is None:
            raise ValueError(f"method '{spec.method}' needs a trained model path")
        net, model_name = _load_bundle(spec.model_path)
        if model_name != preset.model_name:
            raise ValueError(f"model file is for '{model_name}', preset wants "
                             f"'{preset.model_name}'")
        if net.arch.variant != spec.method:
            raise ValueError(f"model file variant '{net.arch.variant}' != '{spec.method}'")
        method = NeuralMethod(net, spec.method)
    elif spec.method == "ecbf":
        if preset.model_name != "integrator2d":
            raise ValueError("ECBF baseline is defined for the integrator only")
        method = EcbfMethod()
    elif spec.method == "unfiltered":
        method = UnfilteredMethod()
    else:
        raise ValueError(f"unknown method '{spec.method}'")

    result = run_episode(env, preset.model, method, preset.rates, preset.obs,
                         preset.qp_gain, timeout=spec.timeout,
                         debug_checks=spec.debug_checks)
    return {
        "episode": spec.episode,
        "method": spec.method,
        "domain": spec.domain,
        "seed": env.seed,
        "outcome": result.outcome,
        "elapsed_s": round(result.elapsed_sim, 4),
        "min_h": None if np.isnan(result.min_h) else round(result.min_h, 5),
        "n_infeasible": result.n_infeasible,
        "min_margin": None if np.isnan(result.min_margin) else round(result.min_margin, 5),
        "n_obs_updates": len(result.margins),
        "latency_mean_ms": round(result.latency_mean * 1e3, 4),
    }


def run_batch(preset_name: str, methods: list[str], domains: list[str],
              n_episodes: int, base_seed: int, model_path: str | None = None,
              safe_start: bool = False, timeout: float = DEFAULT_TIMEOUT,
              workers: int = 1, debug_checks: bool = False,
              n_obstacles: int = N_FOREST_OBSTACLES,
              progress=None) -> tuple[list[dict], dict]:
    """Cross product methods x domains x episodes; same environment seeds
    across methods so comparisons are paired."""
    if n_episodes < 1:
        raise ValueError("need at least one episode")
    specs = [
        EpisodeSpec(preset_name, method, domain, ep, base_seed + ep,
                    model_path=model_path, safe_start=safe_start,
                    timeout=timeout, debug_checks=debug_checks,
                    n_obstacles=n_obstacles)
        for method in methods
        for domain in domains
        for ep in range(n_episodes)
    ]
    if workers > 1:
        # spawn, not fork: a parent that has run torch/OpenMP work holds
        # thread-pool locks that a forked child would inherit mid-flight
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            rows = []
            for row in pool.map(run_episode_spec, specs, chunksize=1):
                rows.append(row)
                if progress is not None:
                    progress(row)
    else:
        rows = []
        for spec in specs:
            rows.append(run_episode_spec(spec))
            if progress is not None:
                progress(rows[-1])

    summary: dict = {}
    for method in methods:
        for domain in domains:
            sub = [r for r in rows if r["method"] == method and r["domain"] == domain]
            n = len(sub)
            summary[f"{method}/{domain}"] = {
                "episodes": n,
                "success_rate": sum(r["outcome"] == "success" for r in sub) / n,
                "collision_rate": sum(r["outcome"] == "collision" for r in sub) / n,
                "timeout_rate": sum(r["outcome"] == "timeout" for r in sub) / n,
            }
    return rows, summary
