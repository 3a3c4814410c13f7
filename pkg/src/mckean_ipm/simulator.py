"""Euler-Maruyama particle simulation of frozen and McKean-Vlasov dynamics.

Each particle keeps its last ``n_lag + 1`` states in a ring buffer; step
``k`` draws its Gaussian increment from the counter-based stream keyed by
``(seed, particle index, k)``. Affine catalog models run through the fused
kernel of the active backend; other models are evaluated in batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coefficients import CoefficientModel
from .errors import InvalidInputError, NumericalBlowupError, PreconditionError, ShapeError
from .hypothesis import CHI, FeasibilityPoint, check_membership, moment_bound_terms
from .measures import EmpiricalSegmentMeasure, moment, wasserstein_p
from .segments import SegmentPath, TimeGrid


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    n_particles: int
    seed: int = 0
    scheme: str = "euler_maruyama"

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"dt must be > 0, got {self.dt}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise InvalidInputError(f"t_end must be >= 0, got {self.t_end}")
        if int(self.n_particles) < 1:
            raise InvalidInputError("n_particles must be >= 1")
        if self.scheme != "euler_maruyama":
            raise InvalidInputError(f"unsupported scheme {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        # Guard against t_end/dt landing a hair below an integer.
        return int(math.floor(self.t_end / self.dt + 1e-9))


class ParticleEnsemble:
    """N particles sharing a model and grid; advanced in lock step."""

    def __init__(self, model: CoefficientModel, grid: TimeGrid, ring: np.ndarray, seed: int, indices=None):
        self.model = model
        self.grid = grid
        self.ring = np.ascontiguousarray(ring, dtype=float)
        self.head = self.ring.shape[1] - 1
        self.step_index = 0
        self.seed = int(seed)
        n = self.ring.shape[0]
        self.indices = np.arange(n) if indices is None else np.asarray(indices)
        self.keys = kernels.particle_keys(self.seed, self.indices)

    @property
    def n_particles(self) -> int:
        return self.ring.shape[0]

    @property
    def current_time(self) -> int:
        return self.step_index

    def segments(self) -> np.ndarray:
        """Ordered segments ``(N, L, d)``, oldest point first."""
        L = self.ring.shape[1]
        order = (np.arange(L) + self.head + 1) % L
        return self.ring[:, order, :]

    def endpoints(self) -> np.ndarray:
        return self.ring[:, self.head, :].copy()

    def law(self) -> EmpiricalSegmentMeasure:
        return EmpiricalSegmentMeasure(self.grid, self.segments())

    def segment(self, i: int) -> SegmentPath:
        return SegmentPath(self.grid, self.segments()[i])

    def sup_norms(self) -> np.ndarray:
        return kernels.impl.sup_norms(self.ring)


def _grid_for(model: CoefficientModel, dt: float) -> TimeGrid:
    return TimeGrid(model.constants.r0, dt)


def init_ensemble(model: CoefficientModel, initial_law, cfg: SimConfig, indices=None) -> ParticleEnsemble:
    """Seed ``cfg.n_particles`` buffers from ``initial_law``.

    ``initial_law`` may be an :class:`EmpiricalSegmentMeasure` (each particle
    draws an atom by weight from its own stream), a :class:`SegmentPath`, or
    a constant (scalar or length-d vector) segment value.
    """
    grid = _grid_for(model, cfg.dt)
    n = int(cfg.n_particles)
    d = model.dim_d
    if isinstance(initial_law, EmpiricalSegmentMeasure):
        if not initial_law.grid.same_as(grid) or initial_law.dim != d:
            raise ShapeError("initial law does not match the model grid/dimension")
        ens = ParticleEnsemble(model, grid, np.zeros((n, grid.length, d)), cfg.seed, indices)
        if initial_law.n_atoms == 1:
            ens.ring[:] = initial_law.values[0]
        else:
            u = kernels.impl.uniforms(ens.keys, kernels.INIT_COUNTER)
            cw = np.cumsum(initial_law.weights)
            pick = np.minimum(np.searchsorted(cw, u * cw[-1], side="right"), initial_law.n_atoms - 1)
            ens.ring[:] = initial_law.values[pick]
        return ens
    if isinstance(initial_law, SegmentPath):
        if not initial_law.grid.same_as(grid) or initial_law.dim != d:
            raise ShapeError("initial segment does not match the model grid/dimension")
        seg = initial_law.values
    else:
        seg = SegmentPath.constant(grid, initial_law, dim=d).values
        if seg.shape[1] != d:
            raise ShapeError(f"constant initial value must have dimension {d}")
    ens = ParticleEnsemble(model, grid, np.broadcast_to(seg, (n, grid.length, d)).copy(), cfg.seed, indices)
    return ens


def _affine_shift(ens, measure, mean_endpoint):
    spec = ens.model.affine
    if spec.c_mean == 0:
        return np.zeros(ens.model.dim_d)
    m = measure.endpoint_mean() if mean_endpoint is None else mean_endpoint
    return np.ascontiguousarray(spec.c_mean * m, dtype=float)


def _advance(ens: ParticleEnsemble, measure: EmpiricalSegmentMeasure | None, mean_endpoint=None,
             n_steps: int = 1):
    # n_steps > 1 is only valid when the measure argument is fixed across steps.
    model = ens.model
    dt = ens.grid.dt
    L = ens.ring.shape[1]
    spec = model.affine
    if spec is not None:
        bad, off = kernels.impl.em_run_affine(
            ens.ring, ens.head, ens.keys, ens.step_index + 1, n_steps, dt, spec.rate, spec.c_lag,
            _affine_shift(ens, measure, mean_endpoint), np.ascontiguousarray(spec.S),
            spec.s0, spec.s1, kernels.num_threads(),
        )
        if bad >= 0:
            raise NumericalBlowupError(ens.indices[bad], ens.step_index + off, "state")
        ens.head = (ens.head + n_steps) % L
        ens.step_index += n_steps
        return ens
    for _ in range(n_steps):
        counter = ens.step_index + 1
        nxt = (ens.head + 1) % L
        segs = ens.segments()
        b = model.drift_batch(segs, measure)
        sig = model.diffusion_batch(segs, measure)
        for what, arr in (("drift", b), ("diffusion", sig)):
            finite = np.isfinite(arr).reshape(len(arr), -1).all(axis=1)
            if not finite.all():
                raise NumericalBlowupError(ens.indices[np.argmin(finite)], ens.step_index, what)
        z = kernels.impl.normals(ens.keys, counter, model.dim_m)
        x = ens.ring[:, ens.head, :]
        new = x + dt * b + math.sqrt(dt) * np.einsum("ndm,nm->nd", sig, z)
        finite = np.isfinite(new).all(axis=1)
        if not finite.all():
            raise NumericalBlowupError(ens.indices[np.argmin(finite)], ens.step_index, "state")
        ens.ring[:, nxt, :] = new
        ens.head = nxt
        ens.step_index += 1
    return ens


def step_frozen(ens: ParticleEnsemble, frozen: EmpiricalSegmentMeasure, n_steps: int = 1) -> ParticleEnsemble:
    """Advance every particle ``n_steps`` steps with the measure argument held at ``frozen``."""
    if not frozen.grid.same_as(ens.grid) or frozen.dim != ens.model.dim_d:
        raise ShapeError("frozen measure does not match the ensemble grid/dimension")
    if n_steps < 0:
        raise InvalidInputError("n_steps must be >= 0")
    if n_steps == 0:
        return ens
    return _advance(ens, frozen, n_steps=n_steps)


def step_mckean(ens: ParticleEnsemble) -> ParticleEnsemble:
    """Advance one step using the ensemble's own empirical segment law.

    The law is captured once, before any particle is written.
    """
    spec = ens.model.affine
    if spec is not None:
        if spec.c_mean == 0:
            return _advance(ens, None)
        return _advance(ens, None, mean_endpoint=ens.ring[:, ens.head, :].mean(axis=0))
    if not ens.model.measure_dependent:
        return _advance(ens, None)
    return _advance(ens, EmpiricalSegmentMeasure(ens.grid, ens.segments()))


@dataclass
class SimulationResult:
    final_law: EmpiricalSegmentMeasure
    p: float
    times: np.ndarray
    moments: np.ndarray
    stderrs: np.ndarray
    snapshots: dict = field(default_factory=dict)


def _moment_stats(ens: ParticleEnsemble, p: float):
    vals = ens.sup_norms() ** p
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return float(vals.mean()), se


def run(ens: ParticleEnsemble, cfg: SimConfig, frozen: EmpiricalSegmentMeasure | None = None,
        *, p: float | None = None, record_every: int = 1, snapshot_times=()) -> SimulationResult:
    """Advance ``floor(t_end / dt)`` steps (frozen if ``frozen`` is given,
    McKean otherwise), recording the Monte Carlo estimate of E||X_t||^p every
    ``record_every`` steps and endpoint snapshots at ``snapshot_times``."""
    if record_every < 1:
        raise InvalidInputError("record_every must be >= 1")
    p = ens.model.constants.p if p is None else p
    n_steps = cfg.n_steps
    snap_steps = {int(round(t / cfg.dt)): float(t) for t in snapshot_times}
    times, moms, ses, snaps = [], [], [], {}

    def record(k):
        if k % record_every == 0 or k == n_steps:
            m, se = _moment_stats(ens, p)
            times.append(ens.step_index * cfg.dt)
            moms.append(m)
            ses.append(se)
        if k in snap_steps:
            snaps[snap_steps[k]] = ens.endpoints()

    record(0)
    if frozen is not None:
        events = sorted({k for k in range(record_every, n_steps + 1, record_every)} | {n_steps}
                        | {k for k in snap_steps if 0 < k <= n_steps})
        k = 0
        for e in events:
            step_frozen(ens, frozen, e - k)
            k = e
            record(k)
    else:
        for k in range(1, n_steps + 1):
            step_mckean(ens)
            record(k)
    return SimulationResult(ens.law(), p, np.array(times), np.array(moms), np.array(ses), snaps)


def simulate(model: CoefficientModel, initial_law, cfg: SimConfig, frozen=None, **kw) -> SimulationResult:
    return run(init_ensemble(model, initial_law, cfg), cfg, frozen, **kw)


# --- empirical checks of the stability and moment lemmas ---------------------


@dataclass
class BoundCheckRow:
    t: float
    estimate: float
    stderr: float
    bound: float
    ratio: float
    violated: bool


@dataclass
class BoundCheckReport:
    rows: list
    constant: float | None = None
    wp: float | None = None

    @property
    def any_violation(self) -> bool:
        return any(r.violated for r in self.rows)


def _row(t, est, se, bound):
    ratio = est / bound if bound > 0 else (0.0 if est == 0 else math.inf)
    return BoundCheckRow(float(t), est, se, float(bound), ratio, bool(est > bound + 3 * se))


def lemma21_constant(K: float, p: float) -> float:
    return 2 * (CHI**2 + 1) * K * p**2


def verify_lemma21(model: CoefficientModel, mu, nu1: EmpiricalSegmentMeasure, nu2: EmpiricalSegmentMeasure,
                   cfg: SimConfig, times) -> BoundCheckReport:
    """Synchronously coupled frozen runs under ``nu1`` and ``nu2``.

    Both runs share the seed (hence initial draws and Brownian increments).
    Reports E||X_t^{nu1} - X_t^{nu2}||^p against ``C W_p^p t e^{Ct}`` with
    ``C = 2(chi^2 + 1) K p^2``; a violation needs the estimate to exceed the
    bound by more than 3 standard errors.
    """
    c = model.constants
    C = lemma21_constant(c.K, c.p)
    wp = wasserstein_p(nu1, nu2, c.p)
    e1, e2 = init_ensemble(model, mu, cfg), init_ensemble(model, mu, cfg)
    targets = sorted((int(round(t / cfg.dt)), float(t)) for t in times)
    rows = []
    k = 0
    for step, t in targets:
        if step > k:
            step_frozen(e1, nu1, step - k)
            step_frozen(e2, nu2, step - k)
            k = step
        diff = kernels.impl.sup_norms(e1.ring - e2.ring) ** c.p
        se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else 0.0
        bound = C * wp**c.p * t * math.exp(C * t) if wp > 0 else 0.0
        rows.append(_row(t, float(diff.mean()), se, bound))
    return BoundCheckReport(rows, C, wp)


def verify_lemma22(model: CoefficientModel, pt: FeasibilityPoint, mu, nu: EmpiricalSegmentMeasure,
                   cfg: SimConfig, times) -> BoundCheckReport:
    """Compare Monte Carlo E||X_t||^p of the nu-frozen SDE with the explicit bound."""
    c = model.constants
    rep = check_membership(c, pt)
    if pt.gamma3 is None or not rep.in_U or not (rep.phi is not None and rep.phi < 0):
        raise PreconditionError(
            f"point must lie in U with phi < 0 (in_U={rep.in_U}, phi={rep.phi})"
        )
    from .measures import wp_to_delta0

    ens = init_ensemble(model, mu, cfg)
    mu_law = mu if isinstance(mu, EmpiricalSegmentMeasure) else ens.law()
    terms = moment_bound_terms(c, pt, wp_to_delta0(nu, c.p) ** c.p)
    mu_mom = moment(mu_law, c.p)
    targets = sorted((int(round(t / cfg.dt)), float(t)) for t in times)
    rows = []
    k = 0
    for step, t in targets:
        if step > k:
            step_frozen(ens, nu, step - k)
            k = step
        est, se = _moment_stats(ens, c.p)
        rows.append(_row(t, est, se, float(terms.at(mu_mom, t))))
    return BoundCheckReport(rows)
