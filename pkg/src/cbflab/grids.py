"""Occupancy grids, exact signed distance transforms, state-space grids and
multilinear interpolation.

Conventions used throughout:
  * occupancy/SDF rasters are row-major ``(height, width)`` arrays, row 0 at
    the smallest world y; cell ``(ix, iy)`` has its center at
    ``origin + (ix + 0.5, iy + 0.5) * resolution``.
  * signed distances are measured between cell centers, positive in free
    space and negative inside obstacles, capped at ``+-cap`` meters.
  * state grids are rectangular; periodic axes exclude the duplicate
    endpoint (points ``lo + i * (hi - lo) / count``).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dep, but keep a fallback
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


class GridFormatError(ValueError):
    """Malformed OGRID1/VGRID1 payload."""


# ---------------------------------------------------------------------------
# grid types


def _frozen_array(a, dtype) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class OccupancyGrid:
    """Binary occupancy raster (1 = occupied)."""

    width: int
    height: int
    resolution: float
    origin: tuple[float, float]
    cells: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have at least one cell per axis")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        cells = _frozen_array(self.cells, np.uint8)
        if cells.shape != (self.height, self.width):
            raise ValueError(f"cells shape {cells.shape} != (height, width)")
        if cells.size and cells.max() > 1:
            raise ValueError("occupancy cells must be 0 or 1")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """Physical bounds (x_lo, x_hi, y_lo, y_hi) of the raster."""
        ox, oy = self.origin
        return (ox, ox + self.width * self.resolution,
                oy, oy + self.height * self.resolution)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        ox, oy = self.origin
        xs = ox + (np.arange(self.width) + 0.5) * self.resolution
        ys = oy + (np.arange(self.height) + 0.5) * self.resolution
        return xs, ys


@dataclass(frozen=True)
class SdfGrid:
    """Signed Euclidean distance field over the same raster geometry."""

    width: int
    height: int
    resolution: float
    origin: tuple[float, float]
    values: np.ndarray  # (height, width) float64, meters
    cap: float

    def __post_init__(self):
        if not self.cap > 0:
            raise ValueError("cap must be positive")
        vals = _frozen_array(self.values, np.float64)
        if vals.shape != (self.height, self.width):
            raise ValueError(f"values shape {vals.shape} != (height, width)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("SDF values must be finite")
        if vals.size and np.max(np.abs(vals)) > self.cap + 1e-9:
            raise ValueError("SDF values exceed cap")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return (ox, ox + self.width * self.resolution,
                oy, oy + self.height * self.resolution)

    def axes(self) -> tuple["GridAxis", ...]:
        """Interpolation axes over cell centers, (x, y) order."""
        ox, oy = self.origin
        h = 0.5 * self.resolution
        return (
            GridAxis(ox + h, ox + (self.width - 0.5) * self.resolution, self.width, False),
            GridAxis(oy + h, oy + (self.height - 0.5) * self.resolution, self.height, False),
        )

    def grid_values(self) -> np.ndarray:
        """Values indexed as [ix, iy] to match the (x, y) axis order."""
        return self.values.T


@dataclass(frozen=True)
class GridAxis:
    lo: float
    hi: float
    count: int
    periodic: bool = False

    def __post_init__(self):
        if self.count < 3:
            raise ValueError("state grids need at least 3 points per dimension")
        if not self.hi > self.lo:
            raise ValueError("axis upper bound must exceed lower bound")

    @property
    def spacing(self) -> float:
        if self.periodic:
            return (self.hi - self.lo) / self.count
        return (self.hi - self.lo) / (self.count - 1)

    def points(self) -> np.ndarray:
        return self.lo + self.spacing * np.arange(self.count)


@dataclass(frozen=True)
class StateGrid:
    axes: tuple[GridAxis, ...]

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise ValueError("state grid needs at least one axis")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.count for ax in self.axes)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.shape))

    def coordinate_arrays(self) -> list[np.ndarray]:
        """Per-axis point arrays shaped for broadcasting over the grid."""
        out = []
        for i, ax in enumerate(self.axes):
            shape = [1] * self.dim
            shape[i] = ax.count
            out.append(ax.points().reshape(shape))
        return out

    def all_points(self) -> np.ndarray:
        """All grid points, row-major, shape (n_points, dim)."""
        mesh = np.meshgrid(*(ax.points() for ax in self.axes), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class ValueGrid:
    grid: StateGrid
    values: np.ndarray = field(repr=False)  # shape grid.shape

    def __post_init__(self):
        vals = _frozen_array(self.values, np.float64).reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("value grid entries must be finite")
        object.__setattr__(self, "values", vals)

    def axes(self) -> tuple[GridAxis, ...]:
        return self.grid.axes

    def grid_values(self) -> np.ndarray:
        return self.values

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()


# ---------------------------------------------------------------------------
# exact Euclidean distance transform (Felzenszwalb-Huttenlocher)


@njit(cache=True)
def _dt_rows_sq(cost: np.ndarray) -> np.ndarray:
    """Row-wise 1D squared distance transform via the parabola lower envelope.

    `cost[i, j]` is the squared vertical distance to the nearest site in
    column j (or INF); returns full 2D squared distances.
    """
    h, w = cost.shape
    out = np.empty((h, w), dtype=np.float64)
    v = np.empty(w, dtype=np.int64)
    z = np.empty(w + 1, dtype=np.float64)
    for i in range(h):
        f = cost[i]
        k = 0
        v[0] = 0
        z[0] = -np.inf
        z[1] = np.inf
        for q in range(1, w):
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
            while s <= z[k]:
                k -= 1
                s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
        k = 0
        for q in range(w):
            while z[k + 1] < q:
                k += 1
            dq = q - v[k]
            out[i, q] = dq * dq + f[v[k]]
    return out


def _squared_edt(sites: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance (in cells) to the nearest True cell.

    Two separable passes: an O(cells) vertical sweep per column followed by
    the 1D lower-envelope transform along each row.
    """
    h, w = sites.shape
    inf_lin = h + w + 1
    g = np.full((h, w), inf_lin, dtype=np.int64)
    g[sites] = 0
    for i in range(1, h):
        np.minimum(g[i], g[i - 1] + 1, out=g[i])
    for i in range(h - 2, -1, -1):
        np.minimum(g[i], g[i + 1] + 1, out=g[i])
    # (h + w + 1)^2 exceeds any true squared distance, keeping the envelope
    # arithmetic finite (and exact: integers well below 2**53).
    cost = (g.astype(np.float64)) ** 2
    return _dt_rows_sq(cost)


def euclidean_sdf(occ: OccupancyGrid, cap: float | None = None) -> SdfGrid:
    """Exact signed Euclidean distance field of an occupancy grid.

    Distances are between cell centers, in meters: positive at free cells
    (to the nearest occupied center), negative at occupied cells (to the
    nearest free center), both capped at `cap`. Defaults the cap to the
    raster diagonal so obstacle-free maps stay finite.
    """
    if cap is None:
        cap = float(np.hypot(occ.width * occ.resolution, occ.height * occ.resolution))
    if not cap > 0:
        raise ValueError("cap must be positive")
    occupied = occ.cells.astype(bool)
    if not occupied.any():
        vals = np.full((occ.height, occ.width), cap)
    elif occupied.all():
        vals = np.full((occ.height, occ.width), -cap)
    else:
        d_occ = np.sqrt(_squared_edt(occupied)) * occ.resolution
        d_free = np.sqrt(_squared_edt(~occupied)) * occ.resolution
        vals = np.where(occupied, -np.minimum(d_free, cap), np.minimum(d_occ, cap))
    return SdfGrid(occ.width, occ.height, occ.resolution, occ.origin, vals, cap)


# ---------------------------------------------------------------------------
# multilinear interpolation


def _locate(axes, q: np.ndarray):
    """Cell indices / fractions / out-of-domain mask for queries q (B, dim)."""
    b = q.shape[0]
    dim = len(axes)
    i0 = np.empty((b, dim), dtype=np.int64)
    frac = np.empty((b, dim))
    oob = np.zeros(b, dtype=bool)
    for a, ax in enumerate(axes):
        x = q[:, a]
        if ax.periodic:
            period = ax.hi - ax.lo
            f = ((x - ax.lo) % period) / ax.spacing
            idx = np.floor(f).astype(np.int64)
            frac[:, a] = f - idx
            i0[:, a] = idx % ax.count
        else:
            tol = 1e-9 * (ax.hi - ax.lo)
            oob |= (x < ax.lo - tol) | (x > ax.hi + tol)
            f = np.clip((x - ax.lo) / ax.spacing, 0.0, ax.count - 1.0)
            idx = np.minimum(np.floor(f).astype(np.int64), ax.count - 2)
            frac[:, a] = f - idx
            i0[:, a] = idx
    return i0, frac, oob


def _corner_flat_index(axes, i0: np.ndarray, corner: int, strides) -> np.ndarray:
    flat = np.zeros(i0.shape[0], dtype=np.int64)
    for a, ax in enumerate(axes):
        idx = i0[:, a]
        if corner >> a & 1:
            idx = (idx + 1) % ax.count if ax.periodic else idx + 1
        flat += idx * strides[a]
    return flat


def interpolate_many(field, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Multilinear interpolation at queries ``q`` (B, dim).

    Out-of-domain queries are clamped to the boundary; the second return is
    the per-query out-of-domain mask.
    """
    axes = field.axes()
    vals = np.ascontiguousarray(field.grid_values(), dtype=np.float64)
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if q.shape[1] != len(axes):
        raise ValueError(f"query dim {q.shape[1]} != grid dim {len(axes)}")
    i0, frac, oob = _locate(axes, q)
    flat_vals = vals.ravel()
    strides = tuple(int(s) for s in np.array(vals.strides) // vals.itemsize)
    out = np.zeros(q.shape[0])
    for corner in range(1 << len(axes)):
        w = np.ones(q.shape[0])
        for a in range(len(axes)):
            t = frac[:, a]
            w = w * (t if corner >> a & 1 else 1.0 - t)
        out += w * flat_vals[_corner_flat_index(axes, i0, corner, strides)]
    return out, oob


def interpolate_gradient_many(field, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of the multilinear interpolant at each query."""
    axes = field.axes()
    vals = np.ascontiguousarray(field.grid_values(), dtype=np.float64)
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if q.shape[1] != len(axes):
        raise ValueError(f"query dim {q.shape[1]} != grid dim {len(axes)}")
    i0, frac, oob = _locate(axes, q)
    flat_vals = vals.ravel()
    strides = tuple(int(s) for s in np.array(vals.strides) // vals.itemsize)
    grad = np.zeros_like(q)
    for corner in range(1 << len(axes)):
        cv = flat_vals[_corner_flat_index(axes, i0, corner, strides)]
        for a in range(len(axes)):
            w = np.full(q.shape[0], 1.0 / axes[a].spacing)
            if not corner >> a & 1:
                w = -w
            for k in range(len(axes)):
                if k == a:
                    continue
                t = frac[:, k]
                w = w * (t if corner >> k & 1 else 1.0 - t)
            grad[:, a] += w * cv
    return grad, oob


def interpolate(field, q) -> float:
    """Scalar multilinear interpolation (clamped outside the domain)."""
    vals, _ = interpolate_many(field, np.asarray(q, dtype=np.float64)[None, :])
    return float(vals[0])


def interpolate_checked(field, q) -> tuple[float, bool]:
    """As `interpolate`, also returning the out-of-domain flag."""
    vals, oob = interpolate_many(field, np.asarray(q, dtype=np.float64)[None, :])
    return float(vals[0]), bool(oob[0])


def interpolate_gradient(field, q) -> np.ndarray:
    grad, _ = interpolate_gradient_many(field, np.asarray(q, dtype=np.float64)[None, :])
    return grad[0]


# ---------------------------------------------------------------------------
# positional patch extraction


def extract_patch(value: ValueGrid, patch_points: int) -> ValueGrid:
    """Central patch in the first two (positional) dimensions.

    Keeps the full extent of every remaining axis; e.g. a 100x100x30 grid
    with a 16-point patch becomes 16x16x30 over index window [42, 58).
    """
    grid = value.grid
    if grid.dim < 2:
        raise ValueError("patch extraction needs at least two positional axes")
    if patch_points < 2:
        raise ValueError("patch needs at least 2 points per axis")
    new_axes = list(grid.axes)
    slicer: list[slice] = [slice(None)] * grid.dim
    for a in (0, 1):
        ax = grid.axes[a]
        if patch_points > ax.count:
            raise ValueError(f"patch of {patch_points} exceeds axis count {ax.count}")
        start = (ax.count - patch_points) // 2
        pts = ax.points()
        new_axes[a] = GridAxis(float(pts[start]), float(pts[start + patch_points - 1]),
                               patch_points, False)
        slicer[a] = slice(start, start + patch_points)
    return ValueGrid(StateGrid(tuple(new_axes)), value.values[tuple(slicer)])


# ---------------------------------------------------------------------------
# file formats


def save_ogrid(occ: OccupancyGrid, path) -> None:
    """Write the OGRID1 text format (row 0 = smallest y)."""
    lines = ["OGRID1",
             f"{occ.width} {occ.height} {occ.resolution!r} {occ.origin[0]!r} {occ.origin[1]!r}"]
    for row in occ.cells:
        lines.append("".join("1" if c else "0" for c in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_ogrid(path) -> OccupancyGrid:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "OGRID1":
        raise GridFormatError("missing OGRID1 magic")
    parts = lines[1].split()
    if len(parts) != 5:
        raise GridFormatError("OGRID1 header needs 5 fields")
    width, height = int(parts[0]), int(parts[1])
    resolution, ox, oy = float(parts[2]), float(parts[3]), float(parts[4])
    rows = lines[2:2 + height]
    if len(rows) != height:
        raise GridFormatError(f"expected {height} rows, found {len(rows)}")
    cells = np.empty((height, width), dtype=np.uint8)
    for iy, row in enumerate(rows):
        if len(row) != width or set(row) - {"0", "1"}:
            raise GridFormatError(f"bad row {iy}")
        cells[iy] = np.frombuffer(row.encode(), dtype=np.uint8) - ord("0")
    return OccupancyGrid(width, height, resolution, (ox, oy), cells)


_VGRID_MAGIC = b"VGRID1"


def save_vgrid(value: ValueGrid, path) -> None:
    """Write the VGRID1 binary container (little-endian, f32 values)."""
    with open(path, "wb") as fh:
        fh.write(_VGRID_MAGIC)
        fh.write(struct.pack("<I", value.grid.dim))
        for ax in value.grid.axes:
            fh.write(struct.pack("<ddIB", ax.lo, ax.hi, ax.count, int(ax.periodic)))
        fh.write(value.values.astype("<f4").tobytes())


def load_vgrid(path) -> ValueGrid:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:6] != _VGRID_MAGIC:
        raise GridFormatError("missing VGRID1 magic")
    off = 6
    (dim,) = struct.unpack_from("<I", blob, off)
    off += 4
    axes = []
    for _ in range(dim):
        lo, hi, count, periodic = struct.unpack_from("<ddIB", blob, off)
        off += struct.calcsize("<ddIB")
        axes.append(GridAxis(lo, hi, count, bool(periodic)))
    grid = StateGrid(tuple(axes))
    vals = np.frombuffer(blob, dtype="<f4", count=grid.n_points, offset=off)
    if vals.size != grid.n_points:
        raise GridFormatError("value payload truncated")
    return ValueGrid(grid, vals.astype(np.float64).reshape(grid.shape))


def sdf_to_value_grid(sdf: SdfGrid) -> ValueGrid:
    """View an SDF as a 2D value grid over its cell-center axes."""
    return ValueGrid(StateGrid(sdf.axes()), sdf.grid_values())


def sdf_from_value_grid(value: ValueGrid, cap: float | None = None) -> SdfGrid:
    """Rebuild an SdfGrid from a 2D VGRID1 payload (cap defaults to max |v|)."""
    if value.grid.dim != 2:
        raise ValueError("SDF value grids are 2-dimensional")
    ax_x, ax_y = value.grid.axes
    res = ax_x.spacing
    if abs(ax_y.spacing - res) > 1e-9 * res:
        raise ValueError("SDF grids must have square cells")
    if cap is None:
        cap = float(np.max(np.abs(value.values)))
    origin = (ax_x.lo - 0.5 * res, ax_y.lo - 0.5 * res)
    return SdfGrid(ax_x.count, ax_y.count, res, origin, value.values.T, cap)
