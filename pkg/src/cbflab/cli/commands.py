"""Subcommand implementations: data generation, HJ computation, training,
and batch evaluation. The teleop server lives in `teleop`."""

from __future__ import annotations

import csv
import json
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..grids import (
    euclidean_sdf,
    extract_patch,
    interpolate_many,
    load_ogrid,
    save_vgrid,
)
from ..hj import FailureField, SolverConfig, lift_sdf_to_state_grid, solve_hjb_vi
from ..neural.dataset import DatasetRecord, augment_record, load_dataset, save_dataset
from ..sim.batch import run_batch
from ..sim.environment import generate_forest
from ..sim.presets import get_preset
from .config import substream_seed


# ---------------------------------------------------------------------------
# gen-data


def _base_record(preset, env, base_id: int) -> DatasetRecord:
    """Observation centered at the origin, solved to steady state, patched."""
    from ..sim.environment import render_local_costmap

    costmap = render_local_costmap(env, (0.0, 0.0), preset.obs)
    sdf = euclidean_sdf(costmap, cap=preset.obs.cap)
    fail = lift_sdf_to_state_grid(sdf, preset.state_grid)
    if preset.failure_margin:
        fail = FailureField(fail.grid, fail.values - preset.failure_margin)
    value = solve_hjb_vi(fail, preset.model, SolverConfig())
    patch = extract_patch(value, preset.patch_points)
    pos_pts = patch.grid.all_points()[:, :2]
    # d at patch points: positional, broadcast along the remaining axes
    d_flat, _ = interpolate_many(sdf, pos_pts)
    return DatasetRecord(
        raster=sdf.values.astype(np.float32),
        obs=preset.obs,
        patch_grid=patch.grid,
        targets=patch.values.astype(np.float32),
        d_values=d_flat.reshape(patch.grid.shape).astype(np.float32),
        base_id=base_id,
    )


def _gen_one(args) -> str:
    preset_name, cfg, seed_root, base_id, shard_path = args
    shard = Path(shard_path)
    if shard.exists():
        return f"base {base_id}: cached"
    preset = get_preset(preset_name)
    g = cfg["gen_data"]
    env = generate_forest(
        substream_seed(seed_root, "gen-data", base_id),
        n_obstacles=g["n_obstacles"],
        radius_range=tuple(g["radius_range"]),
        start=(0.0, 0.0), goal=(0.0, 0.0),
        clearance=g["center_clearance"],
        obstacle_box=2.5)  # keep training obstacles inside the 6x6 window
    rec = _base_record(preset, env, base_id)
    records = (augment_record(rec, preset.model_name) if g["augment"] else [rec])
    save_dataset(records, shard)
    return f"base {base_id}: {len(records)} records"


def cmd_gen_data(cfg: dict, out_dir: Path, log=print) -> Path:
    preset = get_preset(cfg["preset"])
    g = cfg["gen_data"]
    shard_dir = out_dir / "shards"
    shard_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg["preset"], cfg, cfg["seed"], i, str(shard_dir / f"base_{i:04d}.dset"))
            for i in range(g["n_base_maps"])]
    if g["workers"] > 1:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=g["workers"], mp_context=ctx) as pool:
            for msg in pool.map(_gen_one, jobs):
                log(msg)
    else:
        for job in jobs:
            log(_gen_one(job))
    records = []
    for i in range(g["n_base_maps"]):
        records.extend(load_dataset(shard_dir / f"base_{i:04d}.dset"))
    out = out_dir / "dataset.dset"
    save_dataset(records, out)
    log(f"wrote {out} ({len(records)} records, model {preset.model_name})")
    return out


# ---------------------------------------------------------------------------
# compute-hj


def cmd_compute_hj(model_name: str, grid_preset: str, in_path: str, out_path: str,
                   failure_margin: float = 0.0, log=print) -> None:
    preset = get_preset(grid_preset)
    if preset.model_name != model_name:
        raise ValueError(f"grid preset '{grid_preset}' is for {preset.model_name}, "
                         f"not {model_name}")
    occ = load_ogrid(in_path)
    sdf = euclidean_sdf(occ, cap=preset.obs.cap)
    fail = lift_sdf_to_state_grid(sdf, preset.state_grid)
    if failure_margin:
        fail = FailureField(fail.grid, fail.values - failure_margin)
    value = solve_hjb_vi(fail, preset.model, SolverConfig())
    save_vgrid(value, out_path)
    log(f"wrote {out_path} (grid {value.grid.shape}, "
        f"V in [{value.values.min():.3f}, {value.values.max():.3f}])")


# ---------------------------------------------------------------------------
# train


def cmd_train(cfg: dict, out_dir: Path, log=print) -> Path:
    from ..neural.hypernet import save_hypernet
    from ..neural.training import TrainConfig, evaluate_rwmse, train

    preset = get_preset(cfg["preset"])
    t = cfg["train"]
    dataset_path = Path(t["dataset"])
    if not dataset_path.is_absolute():
        dataset_path = out_dir / dataset_path
    records = load_dataset(dataset_path)
    tc = TrainConfig(
        epochs=t["epochs"], batch_size=t["batch_size"], lr=t["lr"],
        lr_drop_epochs=tuple(t["lr_drop_epochs"]), lr_drop_factor=t["lr_drop_factor"],
        rwmse_beta=t["rwmse_beta"], rwmse_sigma=t["rwmse_sigma"],
        seed=cfg["seed"], holdout_fraction=t["holdout_fraction"])
    result = train(records, tc, variant=t["variant"], model_name=preset.model_name,
                   progress=lambda e: log(
                       f"epoch {e['epoch']:3d} lr {e['lr']:.2e} "
                       f"train {e['train_rwmse']:.5f} holdout {e['holdout_rwmse']:.5f}"))
    model_path = out_dir / f"{t['variant']}_{preset.model_name}.hnet"
    save_hypernet(result.net, model_path, preset.model_name)
    loss_csv = out_dir / "loss_log.csv"
    with open(loss_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "lr", "train_rwmse",
                                                "holdout_rwmse"])
        writer.writeheader()
        writer.writerows(result.loss_log)
    final = result.loss_log[-1]
    log(f"final train RWMSE {final['train_rwmse']:.5f} "
        f"holdout RWMSE {final['holdout_rwmse']:.5f}")
    log(f"wrote {model_path} and {loss_csv}")
    return model_path


# ---------------------------------------------------------------------------
# eval


EVAL_CSV_COLUMNS = ["episode", "method", "domain", "seed", "outcome", "elapsed_s",
                    "min_h", "n_infeasible", "min_margin", "n_obs_updates",
                    "latency_mean_ms"]


def cmd_eval(cfg: dict, out_dir: Path, log=print) -> tuple[Path, Path]:
    e = cfg["eval"]
    for m in ("orn", "on"):
        if m in e["methods"] and not e["model_path"]:
            raise ValueError(f"method '{m}' requires eval.model_path")
    rows, summary = run_batch(
        cfg["preset"], e["methods"], e["domains"], e["n_episodes"],
        base_seed=cfg["seed"], model_path=e["model_path"],
        safe_start=e["safe_start"], timeout=e["timeout"], workers=e["workers"],
        debug_checks=e["debug_checks"], n_obstacles=e["n_obstacles"],
        progress=lambda r: log(f"{r['method']}/{r['domain']} ep {r['episode']}: "
                               f"{r['outcome']} ({r['elapsed_s']}s)"))
    csv_path = out_dir / "episodes.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=EVAL_CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    neg_margins = [r for r in rows
                   if r["min_margin"] is not None and r["min_margin"] < 0]
    summary_full = {
        "rates": summary,
        "episodes_with_negative_margin": [
            {"method": r["method"], "domain": r["domain"], "episode": r["episode"],
             "min_margin": r["min_margin"]} for r in neg_margins],
    }
    json_path = out_dir / "summary.json"
    json_path.write_text(json.dumps(summary_full, indent=2) + "\n")
    for key, val in summary.items():
        log(f"{key}: success {val['success_rate']:.2%} "
            f"collisions {val['collision_rate']:.2%} timeouts {val['timeout_rate']:.2%}")
    log(f"wrote {csv_path} and {json_path}")
    return csv_path, json_path
