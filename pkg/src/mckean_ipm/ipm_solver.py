"""Fixed-point iteration nu -> (stationary law of the nu-frozen SDE).

Each outer step freezes the measure argument at ``nu_k``, relaxes the frozen
dynamics for ``burn_in``, then pools the segments of every particle every
``snapshot_stride`` steps over ``sample_window`` into ``nu_{k+1}``. The
iteration stops when ``W_p(nu_{k+1}, nu_k) <= tol``.

Pooled laws keep their atoms in snapshot-major order (row ``s*N + i`` is
particle ``i`` at snapshot ``s``) so per-particle batch means are available
for honest standard errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coefficients import CoefficientModel
from .errors import ConfigError, InvalidInputError
from .measures import EmpiricalSegmentMeasure, moment, wasserstein_p
from .simulator import SimConfig, init_ensemble, step_frozen, step_mckean

# Sub-seed tags; see kernels.derive_seed.
_TAG_OUTER = 1
_TAG_SUBSAMPLE = 2
_TAG_NOISE = 3
_TAG_STATIONARITY = 4

CONVERGED = "converged"
MAX_ITERATIONS = "max-iterations"
DIVERGED = "diverged"


@dataclass(frozen=True)
class SolverConfig:
    sim: SimConfig
    burn_in: float
    sample_window: float
    snapshot_stride: int
    tol: float
    max_outer: int
    p: float = 2.0
    ot_max_atoms: int = 1000
    common_seed: bool = False
    warm_start: bool = True
    divergence_factor: float = 1e6
    admissible_q: float | None = None
    admissible_M: float | None = None

    def __post_init__(self):
        if not self.tol >= 0:
            raise InvalidInputError("tol must be >= 0")
        if self.burn_in < 0 or self.sample_window < 0:
            raise InvalidInputError("burn_in and sample_window must be >= 0")
        if self.max_outer < 1:
            raise InvalidInputError("max_outer must be >= 1")
        if self.snapshot_stride < 1:
            raise InvalidInputError("snapshot_stride must be >= 1")
        if self.p < 1:
            raise InvalidInputError("p must be >= 1")
        if self.ot_max_atoms < 1:
            raise InvalidInputError("ot_max_atoms must be >= 1")

    def steps(self, t: float) -> int:
        return int(math.floor(t / self.sim.dt + 1e-9))

    @property
    def n_snapshots(self) -> int:
        return self.steps(self.sample_window) // self.snapshot_stride


def frozen_stationary_law(model: CoefficientModel, nu: EmpiricalSegmentMeasure, scfg: SolverConfig,
                          *, seed: int | None = None, init_law=None) -> EmpiricalSegmentMeasure:
    """Time-and-ensemble pooled long-run law of the nu-frozen dynamics.

    Particles start from ``init_law`` (default ``nu``).
    """
    n_snap = scfg.n_snapshots
    if n_snap < 1:
        raise ConfigError("sample_window is shorter than one snapshot stride", "solver.sample_window")
    cfg = scfg.sim if seed is None else SimConfig(scfg.sim.dt, scfg.sim.t_end, scfg.sim.n_particles, seed)
    ens = init_ensemble(model, nu if init_law is None else init_law, cfg)
    step_frozen(ens, nu, scfg.steps(scfg.burn_in))
    pool = np.empty((n_snap, ens.n_particles, ens.grid.length, model.dim_d))
    for s in range(n_snap):
        step_frozen(ens, nu, scfg.snapshot_stride)
        pool[s] = ens.segments()
    return EmpiricalSegmentMeasure(ens.grid, pool.reshape(-1, ens.grid.length, model.dim_d))


def pooled_endpoint_mean(law: EmpiricalSegmentMeasure, n_particles: int):
    """Endpoint mean of a pooled law and its standard error from per-particle batch means."""
    ends = law.endpoints().reshape(-1, n_particles, law.dim)
    per_particle = ends.mean(axis=0)
    mean = per_particle.mean(axis=0)
    se = per_particle.std(axis=0, ddof=1) / math.sqrt(n_particles) if n_particles > 1 else np.zeros(law.dim)
    return mean, se


def _gap(a: EmpiricalSegmentMeasure, b: EmpiricalSegmentMeasure, scfg: SolverConfig, seed: int) -> float:
    a_s = a.subsample(scfg.ot_max_atoms, kernels.derive_seed(seed, 0))
    b_s = b.subsample(scfg.ot_max_atoms, kernels.derive_seed(seed, 1))
    return wasserstein_p(a_s, b_s, scfg.p)


def admissibility_gate(law: EmpiricalSegmentMeasure, q: float, M: float) -> bool:
    """True iff the q-th sup-norm moment of ``law`` is at most ``M``."""
    if q < 2:
        raise InvalidInputError(f"q must be >= 2, got {q}")
    if not M > 0:
        raise InvalidInputError(f"M must be > 0, got {M}")
    return moment(law, q) <= M


@dataclass
class IPMSolveState:
    iterates: list
    gaps: list = field(default_factory=list)
    moments: list = field(default_factory=list)
    admissible: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    status: str = MAX_ITERATIONS

    @property
    def final_law(self) -> EmpiricalSegmentMeasure:
        return self.iterates[-1]

    @property
    def n_outer(self) -> int:
        return len(self.gaps)

    def to_report(self, scfg: SolverConfig | None = None, extra: dict | None = None) -> dict:
        out = {
            "status": self.status,
            "n_outer": self.n_outer,
            "gaps": list(self.gaps),
            "moments": list(self.moments),
            "admissible": list(self.admissible),
            "inner_seeds": [str(s) for s in self.seeds],
            "atoms_per_iterate": [it.n_atoms for it in self.iterates],
        }
        if scfg is not None:
            out["config"] = {
                "dt": scfg.sim.dt,
                "n_particles": scfg.sim.n_particles,
                "seed": str(scfg.sim.seed),
                "burn_in": scfg.burn_in,
                "sample_window": scfg.sample_window,
                "snapshot_stride": scfg.snapshot_stride,
                "tol": scfg.tol,
                "max_outer": scfg.max_outer,
                "p": scfg.p,
                "ot_max_atoms": scfg.ot_max_atoms,
                "common_seed": scfg.common_seed,
                "warm_start": scfg.warm_start,
            }
        if extra:
            out.update(extra)
        return out


def _admissible(law, scfg):
    if scfg.admissible_M is None:
        return None
    q = scfg.admissible_q if scfg.admissible_q is not None else max(scfg.p, 2.0)
    return admissibility_gate(law, q, scfg.admissible_M)


def solve_ipm(model: CoefficientModel, nu0: EmpiricalSegmentMeasure, scfg: SolverConfig) -> IPMSolveState:
    """Iterate ``nu_{k+1} = frozen_stationary_law(model, nu_k)`` until the W_p gap
    drops to ``tol`` (converged), ``max_outer`` refreshes were made
    (max-iterations), or the p-th moment exceeds
    ``divergence_factor * (1 + moment(nu0))`` (diverged).

    Inner run ``k`` uses seed ``derive_seed(seed, 1, k)``, or the base seed
    itself with ``common_seed``. Gaps are computed on seeded subsamples of at
    most ``ot_max_atoms`` atoms.
    """
    base = scfg.sim.seed
    m0 = moment(nu0, scfg.p)
    guard = scfg.divergence_factor * (1.0 + m0)
    state = IPMSolveState(iterates=[nu0], moments=[m0], admissible=[_admissible(nu0, scfg)])
    nu = nu0
    for k in range(scfg.max_outer):
        seed_k = base if scfg.common_seed else kernels.derive_seed(base, _TAG_OUTER, k)
        state.seeds.append(seed_k)
        nxt = frozen_stationary_law(model, nu, scfg, seed=seed_k, init_law=nu if scfg.warm_start else nu0)
        gap = _gap(nxt, nu, scfg, kernels.derive_seed(base, _TAG_SUBSAMPLE, k))
        mom = moment(nxt, scfg.p)
        state.iterates.append(nxt)
        state.gaps.append(gap)
        state.moments.append(mom)
        state.admissible.append(_admissible(nxt, scfg))
        nu = nxt
        if not math.isfinite(mom) or mom > guard:
            state.status = DIVERGED
            return state
        if gap <= scfg.tol:
            state.status = CONVERGED
            return state
    state.status = MAX_ITERATIONS
    return state


def noise_floor(model: CoefficientModel, nu: EmpiricalSegmentMeasure, scfg: SolverConfig, reps: int = 2) -> float:
    """Mean W_p gap between independent pooled laws of the same nu-frozen dynamics.

    This is the Monte Carlo floor below which successive-iterate gaps cannot
    be pushed at the current pool and subsample sizes.
    """
    base = scfg.sim.seed
    gaps = []
    for r in range(reps):
        a = frozen_stationary_law(model, nu, scfg, seed=kernels.derive_seed(base, _TAG_NOISE, 2 * r))
        b = frozen_stationary_law(model, nu, scfg, seed=kernels.derive_seed(base, _TAG_NOISE, 2 * r + 1))
        gaps.append(_gap(a, b, scfg, kernels.derive_seed(base, _TAG_NOISE, 1000 + r)))
    return float(np.mean(gaps))


@dataclass
class StationarityReport:
    times: list
    gaps: list

    @property
    def max_gap(self) -> float:
        return max(self.gaps)

    def to_dict(self) -> dict:
        return {"times": list(self.times), "gaps": list(self.gaps)}


def stationarity_check(model: CoefficientModel, law: EmpiricalSegmentMeasure, horizon: float,
                       scfg: SolverConfig, n_checkpoints: int = 5) -> StationarityReport:
    """Run the full McKean-Vlasov particle system from ``law`` and report
    ``W_p(law, ensemble law)`` at ``n_checkpoints`` equally spaced times in
    (0, horizon]."""
    base = scfg.sim.seed
    cfg = SimConfig(scfg.sim.dt, horizon, scfg.sim.n_particles, kernels.derive_seed(base, _TAG_STATIONARITY))
    ens = init_ensemble(model, law, cfg)
    total = cfg.n_steps
    marks = sorted({max(1, int(round(total * (j + 1) / n_checkpoints))) for j in range(n_checkpoints)})
    times, gaps = [], []
    k = 0
    for j, mark in enumerate(marks):
        while k < mark:
            step_mckean(ens)
            k += 1
        times.append(k * cfg.dt)
        gaps.append(_gap(ens.law(), law, scfg, kernels.derive_seed(base, _TAG_STATIONARITY, 100 + j)))
    return StationarityReport(times, gaps)


def delta0_moment(model: CoefficientModel, q: float, dt: float, n_particles: int, seed: int = 0) -> float:
    """Monte Carlo E||X_{r0}||^q for the frozen SDE started at and frozen at delta_0."""
    cfg = SimConfig(dt, model.constants.r0, n_particles, seed)
    ens = init_ensemble(model, 0.0, cfg)
    d0 = EmpiricalSegmentMeasure.delta0(ens.grid, model.dim_d)
    step_frozen(ens, d0, cfg.n_steps)
    return float(np.mean(ens.sup_norms() ** q))
