"""Discretised path segments on [-r0, 0] and their sup-norm geometry.

A segment is stored as ``n_lag + 1`` grid samples ``values[i] ~ f(-r0 + i*dt)``
so ``values[-1]`` is the current state ``f(0)`` and ``values[0]`` is the
oldest point ``f(-r0)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, OutOfRangeError, ShapeError

_DIVISIBILITY_RTOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with step ``dt`` covering a delay window of length ``r0``."""

    r0: float
    dt: float
    n_lag: int = field(init=False)

    def __post_init__(self):
        r0, dt = float(self.r0), float(self.dt)
        if not (np.isfinite(r0) and np.isfinite(dt)):
            raise InvalidInputError("r0 and dt must be finite")
        if dt <= 0:
            raise InvalidInputError(f"dt must be > 0, got {dt}")
        if r0 < 0:
            raise InvalidInputError(f"r0 must be >= 0, got {r0}")
        n_lag = int(round(r0 / dt))
        if abs(n_lag * dt - r0) > _DIVISIBILITY_RTOL * max(r0, dt):
            raise InvalidInputError(f"dt={dt} does not divide r0={r0}")
        object.__setattr__(self, "r0", r0)
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "n_lag", n_lag)

    @property
    def length(self) -> int:
        """Number of grid points in one segment."""
        return self.n_lag + 1

    def same_as(self, other: "TimeGrid") -> bool:
        return self.n_lag == other.n_lag and np.isclose(self.dt, other.dt, rtol=1e-12)


def _as_points(values, dim=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None] if dim in (None, 1) else arr.reshape(-1, dim)
    if arr.ndim != 2:
        raise ShapeError(f"expected a (points, d) array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class SegmentPath:
    """An element of C([-r0, 0]; R^d) sampled on ``grid``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        arr = _as_points(self.values)
        if arr.shape[0] != self.grid.length:
            raise ShapeError(
                f"segment needs {self.grid.length} points, got {arr.shape[0]}"
            )
        if arr.shape[1] < 1:
            raise ShapeError("dimension must be positive")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("segment has non-finite coordinates")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def endpoint(self) -> np.ndarray:
        """The current state xi(0)."""
        return self.values[-1]

    @property
    def oldest(self) -> np.ndarray:
        """The delayed state xi(-r0)."""
        return self.values[0]

    @classmethod
    def constant(cls, grid: TimeGrid, value, dim: int | None = None) -> "SegmentPath":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        if dim is not None and v.size == 1:
            v = np.full(dim, float(v[0]))
        return cls(grid, np.tile(v, (grid.length, 1)))

    @classmethod
    def zeros(cls, grid: TimeGrid, dim: int = 1) -> "SegmentPath":
        return cls(grid, np.zeros((grid.length, dim)))

    def __eq__(self, other):
        if not isinstance(other, SegmentPath):
            return NotImplemented
        return (
            self.grid.same_as(other.grid)
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    __hash__ = None


def _max_point_norm(v: np.ndarray) -> float:
    # Rescale per point so tiny or huge coordinates neither underflow nor overflow.
    scale = np.max(np.abs(v), axis=1)
    if v.shape[1] == 1:
        return float(np.max(scale))
    safe = np.where(scale > 0, scale, 1.0)
    return float(np.max(scale * np.sqrt(np.sum((v / safe[:, None]) ** 2, axis=1))))


def sup_norm(s: SegmentPath) -> float:
    """Max over grid points of the Euclidean norm of ``s``."""
    if not np.all(np.isfinite(s.values)):
        raise InvalidInputError("segment has non-finite coordinates")
    return _max_point_norm(s.values)


def sup_distance(s1: SegmentPath, s2: SegmentPath) -> float:
    if not s1.grid.same_as(s2.grid) or s1.dim != s2.dim:
        raise ShapeError("segments live on different grids or dimensions")
    return _max_point_norm(s1.values - s2.values)


class TrajectoryBuffer:
    """Growable path history indexed by time step, starting at step ``-n_lag``.

    The buffer is seeded with an initial segment (steps ``-n_lag .. 0``) and
    grows by one point per :meth:`append`.
    """

    def __init__(self, initial: SegmentPath):
        self.grid = initial.grid
        self.dim = initial.dim
        self._data = np.empty((max(16, 2 * initial.grid.length), self.dim))
        self._size = initial.grid.length
        self._data[: self._size] = initial.values
        self.current_time = 0

    def __len__(self):
        return self._size

    @property
    def values(self) -> np.ndarray:
        """All stored points, oldest first (read-only view)."""
        view = self._data[: self._size]
        view.setflags(write=False)
        return view

    def at(self, step: int) -> np.ndarray:
        idx = step + self.grid.n_lag
        if idx < 0 or idx >= self._size:
            raise OutOfRangeError(f"step {step} not in buffer")
        return self._data[idx].copy()

    def append(self, x) -> "TrajectoryBuffer":
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise ShapeError(f"expected a point in R^{self.dim}, got {x.shape[0]} coords")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("appended point is not finite")
        if self._size == self._data.shape[0]:
            grown = np.empty((2 * self._size, self.dim))
            grown[: self._size] = self._data[: self._size]
            self._data = grown
        self._data[self._size] = x
        self._size += 1
        self.current_time += 1
        return self

    def extract_segment(self, at_step: int | None = None) -> SegmentPath:
        """Window ``[at_step - n_lag, at_step]``; defaults to the current time."""
        if at_step is None:
            at_step = self.current_time
        if at_step < 0 or at_step > self.current_time:
            raise OutOfRangeError(
                f"step {at_step} outside recorded range [0, {self.current_time}]"
            )
        start = at_step  # index of step (at_step - n_lag)
        return SegmentPath(self.grid, self._data[start : start + self.grid.length].copy())


def append(buf: TrajectoryBuffer, x) -> TrajectoryBuffer:
    return buf.append(x)


def extract_segment(buf: TrajectoryBuffer, at_step: int) -> SegmentPath:
    return buf.extract_segment(at_step)
