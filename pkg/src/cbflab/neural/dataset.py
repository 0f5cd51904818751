"""Training records (SDF raster -> value-function patch) and the DSET1
container, including the flip/rotation augmentation.

Augmentation acts on the raster and the patch targets jointly: rotating the
map by 90/180/270 degrees or flipping it horizontally permutes grid samples
exactly when the positional window is centered and the non-positional axes
transform onto themselves (theta shifted by the rotation angle, velocities
rotated). Fractional theta shifts (odd point counts) fall back to periodic
linear interpolation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..grids import GridAxis, StateGrid


@dataclass(frozen=True)
class ObservationSpec:
    """Geometry of the square costmap the hypernetwork consumes."""
    size: int            # cells per side
    resolution: float    # m/cell
    cap: float           # SDF cap, m

    @property
    def extent(self) -> float:
        return self.size * self.resolution

    @property
    def origin(self) -> tuple[float, float]:
        half = self.extent / 2
        return (-half, -half)


@dataclass(frozen=True)
class DatasetRecord:
    """One observation with its supervision patch (all in the observation
    frame: positional coordinates relative to the frame center)."""
    raster: np.ndarray            # (h, w) float32 SDF, meters, [iy, ix]
    obs: ObservationSpec
    patch_grid: StateGrid
    targets: np.ndarray           # float32, patch_grid.shape
    d_values: np.ndarray          # float32, patch_grid.shape
    base_id: int = 0              # augmented variants share their base id

    def __post_init__(self):
        raster = np.ascontiguousarray(self.raster, dtype=np.float32)
        if raster.shape != (self.obs.size, self.obs.size):
            raise ValueError("raster shape does not match the observation spec")
        targets = np.ascontiguousarray(self.targets, dtype=np.float32).reshape(self.patch_grid.shape)
        d_values = np.ascontiguousarray(self.d_values, dtype=np.float32).reshape(self.patch_grid.shape)
        if np.any(targets > d_values + 1e-5):
            raise ValueError("targets must not exceed the SDF values (V <= F)")
        for name, a in (("raster", raster), ("targets", targets), ("d_values", d_values)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be finite")
            a.setflags(write=False)
        object.__setattr__(self, "raster", raster)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "d_values", d_values)


def _xy(raster: np.ndarray) -> np.ndarray:
    """[iy, ix] -> [ix, iy] view for world-aligned rotations."""
    return raster.T


def _roll_theta(values: np.ndarray, axis: int, shift: float) -> np.ndarray:
    """Periodic shift by a (possibly fractional) number of grid steps."""
    s0 = int(np.floor(shift))
    frac = shift - s0
    rolled = np.roll(values, s0, axis=axis)
    if frac == 0.0:
        return rolled
    return (1.0 - frac) * rolled + frac * np.roll(values, s0 + 1, axis=axis)


def _rot90_state(values: np.ndarray, model_name: str, k: int) -> np.ndarray:
    """Rotate a state-space patch by k*90 degrees about the world origin."""
    out = np.rot90(values, k=k, axes=(0, 1))
    if model_name == "dubins":
        ntheta = values.shape[2]
        out = _roll_theta(out, axis=2, shift=k * ntheta / 4.0)
    elif model_name == "integrator2d":
        out = np.rot90(out, k=k, axes=(2, 3))
    else:
        raise ValueError(model_name)
    return np.ascontiguousarray(out)


def _flip_state(values: np.ndarray, model_name: str) -> np.ndarray:
    """Mirror x -> -x: flip positional x; theta -> pi - theta; vx -> -vx."""
    out = np.flip(values, axis=0)
    if model_name == "dubins":
        ntheta = values.shape[2]
        idx = (ntheta // 2 - np.arange(ntheta)) % ntheta
        if ntheta % 2 != 0:
            raise ValueError("dubins flip augmentation needs an even theta count")
        out = out[:, :, idx]
    elif model_name == "integrator2d":
        out = np.flip(out, axis=2)
    else:
        raise ValueError(model_name)
    return np.ascontiguousarray(out)


def augment_record(record: DatasetRecord, model_name: str) -> list[DatasetRecord]:
    """Original + horizontal flip, each rotated by 0/90/180/270 degrees."""
    variants = []
    raster_xy = _xy(record.raster)
    bases = [(raster_xy, record.targets, record.d_values)]
    bases.append((np.flip(raster_xy, axis=0),
                  _flip_state(record.targets, model_name),
                  _flip_state(record.d_values, model_name)))
    for rxy, tgt, dv in bases:
        for k in range(4):
            variants.append(DatasetRecord(
                raster=np.ascontiguousarray(_xy(np.rot90(rxy, k=k, axes=(0, 1)))),
                obs=record.obs,
                patch_grid=record.patch_grid,
                targets=_rot90_state(tgt, model_name, k),
                d_values=_rot90_state(dv, model_name, k),
                base_id=record.base_id,
            ))
    return variants


# ---------------------------------------------------------------------------
# DSET1 container

_DSET_MAGIC = b"DSET1"


def save_dataset(records: list[DatasetRecord], path) -> None:
    with open(path, "wb") as fh:
        fh.write(_DSET_MAGIC)
        fh.write(struct.pack("<I", len(records)))
        for rec in records:
            fh.write(struct.pack("<IIddI", rec.obs.size, rec.obs.size,
                                 rec.obs.resolution, rec.obs.cap, rec.base_id))
            fh.write(struct.pack("<I", rec.patch_grid.dim))
            for ax in rec.patch_grid.axes:
                fh.write(struct.pack("<ddIB", ax.lo, ax.hi, ax.count, int(ax.periodic)))
            fh.write(rec.raster.astype("<f4").tobytes())
            fh.write(rec.targets.astype("<f4").tobytes())
            fh.write(rec.d_values.astype("<f4").tobytes())


def load_dataset(path) -> list[DatasetRecord]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:5] != _DSET_MAGIC:
        raise ValueError("missing DSET1 magic")
    off = 5
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    records = []
    for _ in range(count):
        h, w, resolution, cap, base_id = struct.unpack_from("<IIddI", blob, off)
        off += struct.calcsize("<IIddI")
        (dim,) = struct.unpack_from("<I", blob, off)
        off += 4
        axes = []
        for _ in range(dim):
            lo, hi, n, periodic = struct.unpack_from("<ddIB", blob, off)
            off += struct.calcsize("<ddIB")
            axes.append(GridAxis(lo, hi, n, bool(periodic)))
        grid = StateGrid(tuple(axes))
        raster = np.frombuffer(blob, dtype="<f4", count=h * w, offset=off).reshape(h, w)
        off += 4 * h * w
        n_pts = grid.n_points
        targets = np.frombuffer(blob, dtype="<f4", count=n_pts, offset=off)
        off += 4 * n_pts
        d_values = np.frombuffer(blob, dtype="<f4", count=n_pts, offset=off)
        off += 4 * n_pts
        records.append(DatasetRecord(
            raster=raster.copy(), obs=ObservationSpec(int(w), resolution, cap),
            patch_grid=grid, targets=targets.copy(), d_values=d_values.copy(),
            base_id=int(base_id)))
    return records
