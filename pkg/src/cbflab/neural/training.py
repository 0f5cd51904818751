"""Supervised hypernetwork training on (SDF raster, value patch) records.

Each step pushes a batch of rasters through the hypernetwork, evaluates the
emitted main networks on every patch grid point (functional forward, so
gradients flow through the emitted parameters into the hypernetwork), and
minimizes the radially weighted MSE against the solver targets. 32-bit
floats throughout; deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .dataset import DatasetRecord
from .hypernet import HyperNet
from .mainnet import MainNetArch, main_forward_batch, param_count


class TrainingDivergence(RuntimeError):
    def __init__(self, epoch: int, batch: int, lr: float):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch} (lr {lr:g})")
        self.epoch, self.batch, self.lr = epoch, batch, lr


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    lr: float = 1e-4
    lr_drop_epochs: tuple[int, ...] = (85, 95)
    lr_drop_factor: float = 0.1
    rwmse_beta: float = 9.0
    rwmse_sigma: float = 0.25   # meters; weight peak width around the zero level
    seed: int = 0
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if min(self.epochs, self.batch_size) < 1 or self.lr <= 0:
            raise ValueError("epochs, batch size and lr must be positive")
        if not 0 <= self.holdout_fraction < 1:
            raise ValueError("holdout fraction in [0, 1)")


@dataclass
class TrainedModel:
    net: HyperNet
    loss_log: list[dict]        # per-epoch: epoch, lr, train_rwmse, holdout_rwmse
    train_ids: list[int]
    holdout_ids: list[int]


def rwmse_weights(target: np.ndarray, beta: float, sigma: float) -> np.ndarray:
    return 1.0 + beta * np.exp(-np.square(target) / (2.0 * sigma * sigma))


def rwmse_loss(pred: np.ndarray, target: np.ndarray, beta: float = 9.0,
               sigma: float = 0.25) -> float:
    """Radially weighted MSE; weights concentrate near the target's zero
    level set: w(V) = 1 + beta * exp(-V^2 / (2 sigma^2))."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise ValueError("prediction/target length mismatch")
    w = rwmse_weights(target, beta, sigma)
    return float(np.mean(w * np.square(pred - target)))


def assemble_prediction(record: DatasetRecord, arch: MainNetArch,
                        theta: np.ndarray) -> np.ndarray:
    """Predicted value patch for one record: d - r for "orn" (strictly below
    the SDF), raw network output for "on"."""
    pts = record.patch_grid.all_points()
    out = main_forward_batch(arch, theta, pts)
    if arch.variant == "orn":
        return record.d_values.ravel() - out
    return out


def arch_for_patch(record: DatasetRecord, variant: str,
                   omega0: float = 30.0) -> MainNetArch:
    """Main-net arch whose normalization boxes span the record's patch."""
    axes = record.patch_grid.axes
    return MainNetArch(input_dim=record.patch_grid.dim, variant=variant,
                       omega0=omega0,
                       norm_lo=tuple(ax.lo for ax in axes),
                       norm_hi=tuple(ax.hi for ax in axes))


def torch_main_forward(arch: MainNetArch, theta: torch.Tensor,
                       x_norm: torch.Tensor) -> torch.Tensor:
    """Functional forward through emitted parameters.

    theta (B, P); x_norm (N, n) pre-normalized patch points shared across
    the batch. Returns (B, N). Mirrors the numpy runtime bit-for-bit in
    structure (layer-major packing, sin(omega*(Wz+b)), softplus output).
    """
    b = theta.shape[0]
    z = x_norm.unsqueeze(0).expand(b, -1, -1)
    off = 0
    shapes = arch.layer_shapes()
    for k, (o, i) in enumerate(shapes):
        w = theta[:, off:off + o * i].view(b, o, i)
        off += o * i
        bias = theta[:, off:off + o]
        off += o
        z = torch.baddbmm(bias.unsqueeze(1), z, w.transpose(1, 2))
        if k < len(shapes) - 1:
            z = torch.sin(arch.omega0 * z)
    out = z.squeeze(-1)
    if arch.variant == "orn":
        return torch.nn.functional.softplus(out)
    return out


def _stack_records(records: list[DatasetRecord]):
    rasters = torch.from_numpy(np.stack([r.raster for r in records]).astype(np.float32))
    targets = torch.from_numpy(np.stack([r.targets.ravel() for r in records]).astype(np.float32))
    d_vals = torch.from_numpy(np.stack([r.d_values.ravel() for r in records]).astype(np.float32))
    return rasters, targets, d_vals


def split_by_base(records: list[DatasetRecord], holdout_fraction: float,
                  seed: int) -> tuple[list[int], list[int]]:
    """Train/holdout split on base-map ids so augmented variants never leak."""
    bases = sorted({r.base_id for r in records})
    rng = np.random.default_rng(seed)
    rng.shuffle(bases)
    n_hold = int(round(len(bases) * holdout_fraction))
    hold_bases = set(bases[:n_hold])
    train_idx = [i for i, r in enumerate(records) if r.base_id not in hold_bases]
    hold_idx = [i for i, r in enumerate(records) if r.base_id in hold_bases]
    return train_idx, hold_idx


def train(records: list[DatasetRecord], cfg: TrainConfig, variant: str = "orn",
          model_name: str = "", net: HyperNet | None = None,
          progress=None) -> TrainedModel:
    """Minibatch Adam on the RWMSE of assembled predictions vs targets."""
    if not records:
        raise ValueError("empty dataset")
    grid0 = records[0].patch_grid
    if any(r.patch_grid.shape != grid0.shape for r in records):
        raise ValueError("all records must share one patch grid")

    torch.manual_seed(cfg.seed)
    arch = arch_for_patch(records[0], variant)
    if net is None:
        net = HyperNet(arch, records[0].obs, seed=cfg.seed)
    elif net.arch.variant != variant:
        raise ValueError("provided hypernet variant mismatch")

    pts = grid0.all_points()
    lo = np.asarray(arch.norm_lo)
    hi = np.asarray(arch.norm_hi)
    x_norm = torch.from_numpy((2.0 * (pts - lo) / (hi - lo) - 1.0).astype(np.float32))

    train_idx, hold_idx = split_by_base(records, cfg.holdout_fraction, cfg.seed)
    rasters, targets, d_vals = _stack_records(records)
    w_all = torch.from_numpy(
        rwmse_weights(targets.numpy(), cfg.rwmse_beta, cfg.rwmse_sigma).astype(np.float32))

    def batch_loss(idx: torch.Tensor) -> torch.Tensor:
        theta = net(rasters[idx])
        out = torch_main_forward(arch, theta, x_norm)
        pred = d_vals[idx] - out if variant == "orn" else out
        return (w_all[idx] * (pred - targets[idx]).square()).mean()

    # the 0.01-gain head moves the emitted parameters 100x slower than the
    # shared base at equal Adam step size; rescale its lr by 1/gain so the
    # conditioning pathway trains at the same effective rate
    head, rest = [], []
    for name, p in net.named_parameters():
        (head if name.startswith("dense2") else rest).append(p)
    opt = torch.optim.Adam([
        {"params": rest, "lr": cfg.lr},
        {"params": head, "lr": cfg.lr / net.head_gain},
    ])
    sched = torch.optim.lr_scheduler.MultiStepLR(
        opt, milestones=list(cfg.lr_drop_epochs), gamma=cfg.lr_drop_factor)
    gen = torch.Generator().manual_seed(cfg.seed)
    log: list[dict] = []
    train_t = torch.tensor(train_idx, dtype=torch.long)
    for epoch in range(1, cfg.epochs + 1):
        net.train()
        perm = train_t[torch.randperm(len(train_idx), generator=gen)]
        epoch_losses = []
        for b0 in range(0, len(perm), cfg.batch_size):
            idx = perm[b0:b0 + cfg.batch_size]
            opt.zero_grad()
            loss = batch_loss(idx)
            if not torch.isfinite(loss):
                raise TrainingDivergence(epoch, b0 // cfg.batch_size,
                                         opt.param_groups[0]["lr"])
            loss.backward()
            opt.step()
            epoch_losses.append(float(loss))
        net.eval()
        with torch.no_grad():
            hold = (float(batch_loss(torch.tensor(hold_idx, dtype=torch.long)))
                    if hold_idx else math.nan)
        entry = {"epoch": epoch, "lr": opt.param_groups[0]["lr"],
                 "train_rwmse": float(np.mean(epoch_losses)), "holdout_rwmse": hold}
        log.append(entry)
        if progress is not None:
            progress(entry)
        sched.step()
    net.eval()
    return TrainedModel(net=net, loss_log=log, train_ids=train_idx, holdout_ids=hold_idx)


def evaluate_rwmse(net: HyperNet, records: list[DatasetRecord],
                   idx: list[int] | None = None, beta: float = 9.0,
                   sigma: float = 0.25) -> float:
    """Dataset RWMSE of the (possibly untrained) hypernet's predictions."""
    arch = net.arch
    take = records if idx is None else [records[i] for i in idx]
    pts = take[0].patch_grid.all_points()
    lo, hi = np.asarray(arch.norm_lo), np.asarray(arch.norm_hi)
    x_norm = torch.from_numpy((2.0 * (pts - lo) / (hi - lo) - 1.0).astype(np.float32))
    rasters, targets, d_vals = _stack_records(take)
    with torch.no_grad():
        theta = net(rasters)
        out = torch_main_forward(arch, theta, x_norm)
        pred = d_vals - out if arch.variant == "orn" else out
    return rwmse_loss(pred.numpy(), targets.numpy(), beta, sigma)
