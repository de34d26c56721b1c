"""Boxed phase spaces and uniform grid partitions.

A :class:`PhaseBox` is an axis-aligned product of intervals; each axis
either wraps around (``periodic``) or projects onto its bounds
(``clamp``).  Total box volume is normalized to 1, so the cell volumes
reported by :func:`cell_geometry` read directly as probabilities and
histograms over cells are probability vectors.

A :class:`GridSpec` partitions a box into a uniform grid.  Cells are
addressed by a flat integer index in C order (first axis slowest).
"""
from __future__ import annotations

import numpy as np

PERIODIC = "periodic"
CLAMP = "clamp"
_MODES = (PERIODIC, CLAMP)


class PhaseBox:
    """Axis-aligned box with a boundary mode per axis.

    Parameters
    ----------
    lower, upper : array_like
        Per-axis interval bounds, ``lower < upper`` elementwise.
    modes : str or sequence of str
        ``"periodic"`` or ``"clamp"`` per axis; a single string applies
        to every axis.
    """

    def __init__(self, lower, upper, modes):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if isinstance(modes, str):
            modes = (modes,) * self.lower.size
        self.modes = tuple(modes)
        if not (self.lower.size == self.upper.size == len(self.modes)):
            raise ValueError("lower, upper and modes must agree on axis count")
        if not np.all(self.lower < self.upper):
            raise ValueError("every axis needs lower < upper")
        for m in self.modes:
            if m not in _MODES:
                raise ValueError(f"unknown boundary mode {m!r}")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def lengths(self) -> np.ndarray:
        return self.upper - self.lower

    def __repr__(self):
        axes = ", ".join(
            f"[{lo:g},{hi:g}]:{m}" for lo, hi, m in zip(self.lower, self.upper, self.modes)
        )
        return f"PhaseBox({axes})"


class GridSpec:
    """Uniform grid over a box: ``cells_per_axis`` cells along each axis."""

    def __init__(self, cells_per_axis):
        if np.isscalar(cells_per_axis):
            cells_per_axis = (int(cells_per_axis),)
        self.shape = tuple(int(c) for c in cells_per_axis)
        if any(c < 1 for c in self.shape):
            raise ValueError("need at least one cell per axis")
        self.total = int(np.prod(self.shape))
        self._shape_arr = np.asarray(self.shape, dtype=np.int64)

    def __repr__(self):
        return f"GridSpec({'x'.join(str(c) for c in self.shape)})"


def canonicalize(box: PhaseBox, p):
    """Map an arbitrary real vector into the box.

    Periodic axes wrap modulo the axis length, clamp axes project onto
    the interval.  Accepts a single point ``(d,)`` or a batch
    ``(..., d)``; idempotent on points already inside the box.
    """
    q = np.array(p, dtype=float, copy=True)
    if q.shape[-1] != box.dim:
        raise ValueError(f"point dimension {q.shape[-1]} != box dimension {box.dim}")
    for ax, mode in enumerate(box.modes):
        lo = box.lower[ax]
        hi = box.upper[ax]
        if mode == PERIODIC:
            length = hi - lo
            r = np.mod(q[..., ax] - lo, length)
            # float mod may round up to the full length; fold that back to 0
            r = np.where(r >= length, 0.0, r)
            q[..., ax] = lo + r
        else:
            q[..., ax] = np.clip(q[..., ax], lo, hi)
    return q


def locate(box: PhaseBox, grid: GridSpec, p):
    """Flat cell index of a canonical point (or batch of points).

    A point exactly on an interior cell boundary belongs to the cell
    with the larger index along that axis; the upper box edge of a
    clamp axis belongs to the last cell.
    """
    q = np.asarray(p, dtype=float)
    if q.shape[-1] != box.dim:
        raise ValueError(f"point dimension {q.shape[-1]} != box dimension {box.dim}")
    if len(grid.shape) != box.dim:
        raise ValueError("grid dimension does not match box dimension")
    scaled = (q - box.lower) / box.lengths * grid._shape_arr
    idx = np.floor(scaled).astype(np.int64)
    idx = np.clip(idx, 0, grid._shape_arr - 1)
    flat = np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), grid.shape)
    if q.ndim == 1:
        return int(flat)
    return flat


def cell_geometry(box: PhaseBox, grid: GridSpec, cell: int):
    """Center point and normalized volume of one cell."""
    multi = np.unravel_index(int(cell), grid.shape)
    width = box.lengths / grid._shape_arr
    center = box.lower + (np.asarray(multi) + 0.5) * width
    volume = float(np.prod(width) / np.prod(box.lengths))
    return center, volume


def cell_rect(box: PhaseBox, grid: GridSpec, cells):
    """Lower corners and widths for a batch of flat cell indices."""
    cells = np.asarray(cells, dtype=np.int64)
    multi = np.column_stack(np.unravel_index(cells, grid.shape))
    width = box.lengths / grid._shape_arr
    return box.lower + multi * width, np.broadcast_to(width, multi.shape)


def cell_centers(box: PhaseBox, grid: GridSpec) -> np.ndarray:
    """Centers of all cells, shape ``(grid.total, dim)``, in flat order."""
    lo, width = cell_rect(box, grid, np.arange(grid.total))
    return lo + 0.5 * width


def wrap_displacement(box: PhaseBox, delta):
    """Shortest displacement equivalent to ``delta`` under the box topology.

    On periodic axes the difference is reduced to ``[-L/2, L/2)``;
    clamp axes pass through unchanged.  Used for distances between
    canonical points.
    """
    d = np.array(delta, dtype=float, copy=True)
    for ax, mode in enumerate(box.modes):
        if mode == PERIODIC:
            length = box.lengths[ax]
            d[..., ax] = np.mod(d[..., ax] + 0.5 * length, length) - 0.5 * length
    return d


def distance(box: PhaseBox, p, q):
    """Euclidean distance with periodic axes wrapped."""
    d = wrap_displacement(box, np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    return np.sqrt(np.sum(d * d, axis=-1))
