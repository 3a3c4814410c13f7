"""Empirical probability measures on segment space and Wasserstein geometry.

The ground metric is the discretised sup-norm distance between segments,
matching the uniform norm on C([-r0, 0]; R^d).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CapExceededError, InvalidInputError, ShapeError
from .segments import SegmentPath, TimeGrid

for _key in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_key}", "1")

DEFAULT_EXACT_CAP = 4_000_000
_WEIGHT_TOL = 1e-12


class EmpiricalSegmentMeasure:
    """Weighted finite set of segments sharing one grid and dimension.

    ``values`` has shape ``(n_atoms, n_lag + 1, d)``; weights default to uniform.
    """

    def __init__(self, grid: TimeGrid, values, weights=None):
        arr = np.array(values, dtype=float)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise ShapeError(f"atoms must have shape (n, L, d) with n >= 1, got {arr.shape}")
        if arr.shape[1] != grid.length:
            raise ShapeError(f"atoms need {grid.length} grid points, got {arr.shape[1]}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("atoms contain non-finite coordinates")
        n = arr.shape[0]
        if weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.array(weights, dtype=float).reshape(-1)
            if w.shape[0] != n:
                raise ShapeError(f"{n} atoms but {w.shape[0]} weights")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise InvalidInputError("weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > _WEIGHT_TOL:
                raise InvalidInputError(f"weights sum to {w.sum()!r}, not 1")
        arr.setflags(write=False)
        w.setflags(write=False)
        self.grid = grid
        self.values = arr
        self.weights = w
        self._uniform = weights is None
        self._endpoint_mean = None

    @classmethod
    def from_segments(cls, segments, weights=None) -> "EmpiricalSegmentMeasure":
        segments = list(segments)
        if not segments:
            raise ShapeError("need at least one segment")
        grid, dim = segments[0].grid, segments[0].dim
        for s in segments[1:]:
            if not s.grid.same_as(grid) or s.dim != dim:
                raise ShapeError("all atoms must share grid and dimension")
        return cls(grid, np.stack([s.values for s in segments]), weights)

    @classmethod
    def delta0(cls, grid: TimeGrid, dim: int = 1) -> "EmpiricalSegmentMeasure":
        return cls(grid, np.zeros((1, grid.length, dim)))

    @classmethod
    def point_mass(cls, segment: SegmentPath) -> "EmpiricalSegmentMeasure":
        return cls(segment.grid, segment.values[None])

    @property
    def n_atoms(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @property
    def is_uniform(self) -> bool:
        return self._uniform or bool(np.all(self.weights == self.weights[0]))

    @property
    def atoms(self) -> list[SegmentPath]:
        return [SegmentPath(self.grid, v) for v in self.values]

    def endpoints(self) -> np.ndarray:
        """Current states ``xi_i(0)`` of all atoms, shape ``(n, d)``."""
        return self.values[:, -1, :]

    def endpoint_mean(self) -> np.ndarray:
        if self._endpoint_mean is None:
            self._endpoint_mean = self.weights @ self.endpoints()
        return self._endpoint_mean

    def compatible(self, other: "EmpiricalSegmentMeasure") -> bool:
        return self.grid.same_as(other.grid) and self.dim == other.dim

    def subsample(self, k: int, seed: int) -> "EmpiricalSegmentMeasure":
        """Uniform ``k``-atom approximation; identity when ``n_atoms <= k``.

        Uniform measures are thinned without replacement, weighted ones are
        resampled by weight.
        """
        if self.n_atoms <= k:
            return self
        rng = np.random.Generator(np.random.PCG64(seed))
        if self.is_uniform:
            idx = np.sort(rng.choice(self.n_atoms, size=k, replace=False))
        else:
            idx = rng.choice(self.n_atoms, size=k, replace=True, p=self.weights)
        return EmpiricalSegmentMeasure(self.grid, self.values[idx])

    def to_dict(self) -> dict:
        return {
            "dt": self.grid.dt,
            "r0": self.grid.r0,
            "d": self.dim,
            "atoms": self.values.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EmpiricalSegmentMeasure":
        grid = TimeGrid(float(data["r0"]), float(data["dt"]))
        values = np.array(data["atoms"], dtype=float)
        if values.ndim == 3 and values.shape[2] != int(data["d"]):
            raise ShapeError(f"declared d={data['d']} but atoms have {values.shape[2]}")
        return cls(grid, values, data.get("weights"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "EmpiricalSegmentMeasure":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, EmpiricalSegmentMeasure):
            return NotImplemented
        return (
            self.grid.same_as(other.grid)
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"EmpiricalSegmentMeasure(n_atoms={self.n_atoms}, d={self.dim}, "
            f"r0={self.grid.r0}, dt={self.grid.dt})"
        )


@dataclass(frozen=True)
class CouplingPlan:
    """Sparse transport plan: ``pairs[k] = (i, j, mass)``."""

    pairs: tuple

    def as_matrix(self, n: int, m: int) -> np.ndarray:
        out = np.zeros((n, m))
        for i, j, mass in self.pairs:
            out[i, j] += mass
        return out


@dataclass(frozen=True)
class WassersteinResult:
    distance: float
    plan: CouplingPlan | None = None
    method: str = "exact"


def moment(mu: EmpiricalSegmentMeasure, p: float) -> float:
    """``sum_i w_i * ||xi_i||_inf^p``."""
    norms = kernels.impl.sup_norms(mu.values)
    return float(mu.weights @ norms**p)


def wp_to_delta0(mu: EmpiricalSegmentMeasure, p: float) -> float:
    norms = kernels.impl.sup_norms(mu.values)
    top = float(norms.max())
    if top == 0.0:
        return 0.0
    # Factor out the largest norm so the p-th powers cannot underflow or overflow.
    return top * float(mu.weights @ (norms / top) ** p) ** (1.0 / p)


def cost_matrix(mu: EmpiricalSegmentMeasure, nu: EmpiricalSegmentMeasure, p: float) -> np.ndarray:
    if not mu.compatible(nu):
        raise ShapeError("measures live on different grids or dimensions")
    return kernels.impl.sup_cost(mu.values, nu.values, float(p), kernels.num_threads())


def _emd(a, b, M):
    import ot

    return ot.emd(a, b, M, numItermax=10_000_000)


def wasserstein_p(
    mu: EmpiricalSegmentMeasure,
    nu: EmpiricalSegmentMeasure,
    p: float = 2.0,
    method: str = "exact",
    *,
    cap: int = DEFAULT_EXACT_CAP,
    n_proj: int = 200,
    seed: int = 0,
    return_plan: bool = False,
):
    """W_p between empirical segment measures under the sup-norm metric.

    ``method="exact"`` solves the discrete transport problem with a network
    simplex solver. ``method="sliced"`` is an approximation: the mean of
    one-dimensional quantile costs over ``n_proj`` random directions of the
    flattened segment vectors (it does not use the sup-norm metric).
    With ``return_plan=True`` a :class:`WassersteinResult` is returned.
    """
    if p < 1:
        raise InvalidInputError(f"p must be >= 1, got {p}")
    if not mu.compatible(nu):
        raise ShapeError("measures live on different grids or dimensions")
    if method == "sliced":
        dist = _sliced(mu, nu, p, n_proj, seed)
        return WassersteinResult(dist, None, "sliced") if return_plan else dist
    if method != "exact":
        raise InvalidInputError(f"unknown method {method!r}")
    if mu.n_atoms * nu.n_atoms > cap:
        raise CapExceededError(
            f"{mu.n_atoms}x{nu.n_atoms} cost matrix exceeds cap {cap}; subsample or use method='sliced'"
        )
    M = cost_matrix(mu, nu, p)
    if mu.n_atoms == 1 or nu.n_atoms == 1:
        G = np.outer(mu.weights, nu.weights)
    else:
        G = _emd(np.ascontiguousarray(mu.weights), np.ascontiguousarray(nu.weights), M)
    cost = max(float(np.sum(G * M)), 0.0)
    dist = cost ** (1.0 / p)
    if not return_plan:
        return dist
    rows, cols = np.nonzero(G > 0)
    plan = CouplingPlan(tuple((int(i), int(j), float(G[i, j])) for i, j in zip(rows, cols)))
    return WassersteinResult(dist, plan, "exact")


def _sliced(mu, nu, p, n_proj, seed):
    X = mu.values.reshape(mu.n_atoms, -1)
    Y = nu.values.reshape(nu.n_atoms, -1)
    rng = np.random.Generator(np.random.PCG64(seed))
    dirs = rng.standard_normal((n_proj, X.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    total = 0.0
    for theta in dirs:
        total += wasserstein_1d(X @ theta, Y @ theta, p, mu.weights, nu.weights) ** p
    return (total / n_proj) ** (1.0 / p)


def endpoint_marginal(mu: EmpiricalSegmentMeasure):
    """``(points, weights)`` of the time-0 marginal; points have shape (n, d)."""
    return mu.endpoints().copy(), mu.weights.copy()


def wasserstein_1d(xs, ys, p: float = 1.0, x_weights=None, y_weights=None) -> float:
    """Exact W_p on the real line via the quantile coupling.

    Integrates ``|F^-1(u) - G^-1(u)|^p`` over u in [0, 1]; both quantile
    functions are step functions so the integral is a finite sum.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1)
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if xs.size == 0 or ys.size == 0:
        raise InvalidInputError("both samples must be nonempty")
    wx = np.full(xs.size, 1.0 / xs.size) if x_weights is None else np.asarray(x_weights, float)
    wy = np.full(ys.size, 1.0 / ys.size) if y_weights is None else np.asarray(y_weights, float)
    ox, oy = np.argsort(xs, kind="stable"), np.argsort(ys, kind="stable")
    xs, wx, ys, wy = xs[ox], wx[ox] / wx.sum(), ys[oy], wy[oy] / wy.sum()
    cx, cy = np.cumsum(wx), np.cumsum(wy)
    cx[-1] = cy[-1] = 1.0
    breaks = np.union1d(cx, cy)
    lengths = np.diff(np.concatenate(([0.0], breaks)))
    mids = breaks - 0.5 * lengths
    ix = np.minimum(np.searchsorted(cx, mids, side="right"), xs.size - 1)
    iy = np.minimum(np.searchsorted(cy, mids, side="right"), ys.size - 1)
    return float(np.sum(lengths * np.abs(xs[ix] - ys[iy]) ** p) ** (1.0 / p))
