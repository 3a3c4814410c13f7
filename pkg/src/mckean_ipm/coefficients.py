"""Coefficient pairs (b, sigma), their declared structural constants, the
built-in model catalog and the closed-form speed-measure oracle.

Coefficients are evaluated in batch: ``drift_batch(values, mu)`` maps an
``(N, L, d)`` stack of segments to ``(N, d)`` and ``diffusion_batch`` to
``(N, d, m)``. Models in the catalog are affine,

    b(xi, mu)     = -rate * xi(0) + c_lag * xi(-r0) + c_mean * mean_mu[xi(0)]
    sigma(xi, mu) = S * sqrt(s0 + s1 * |xi(0)|^2),

which lets the simulator run them through the fused compiled step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
from scipy import integrate

from .errors import DomainError, InvalidInputError, ShapeError
from .segments import SegmentPath


@dataclass(frozen=True)
class StructuralConstants:
    """Declared constants of the growth/monotonicity hypotheses.

    ``K`` bounds the one-sided Lipschitz pairing; ``lambda0..lambda5`` enter
    the dissipativity bounds on ``2<xi(0), b>`` and ``||sigma||_HS^2``.
    """

    p: float = 2.0
    r0: float = 0.0
    K: float = 1.0
    lambda0: float = 0.0
    lambda1: float = 1.0
    lambda2: float = 0.0
    lambda3: float = 0.0
    lambda4: float = 0.0
    lambda5: float = 0.0

    def __post_init__(self):
        for name in ("p", "r0", "K", "lambda0", "lambda1", "lambda2", "lambda3", "lambda4", "lambda5"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidInputError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.p < 2:
            raise InvalidInputError(f"p must be >= 2, got {self.p}")
        if self.r0 < 0:
            raise InvalidInputError(f"r0 must be >= 0, got {self.r0}")
        if self.K <= 0:
            raise InvalidInputError(f"K must be > 0, got {self.K}")
        if self.lambda1 <= 0:
            raise InvalidInputError(f"lambda1 must be > 0, got {self.lambda1}")
        for name in ("lambda0", "lambda2", "lambda3", "lambda4", "lambda5"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0")

    @property
    def lambdas(self) -> tuple:
        return (self.lambda0, self.lambda1, self.lambda2, self.lambda3, self.lambda4, self.lambda5)

    def with_p(self, p: float) -> "StructuralConstants":
        return replace(self, p=float(p))


@dataclass(frozen=True)
class AffineSpec:
    rate: float
    c_lag: float
    c_mean: float
    S: np.ndarray
    s0: float
    s1: float


DriftFn = Callable[[np.ndarray, "object"], np.ndarray]


@dataclass(frozen=True, eq=False)
class CoefficientModel:
    """A coefficient pair with declared constants.

    For user models, ``drift_fn`` / ``diffusion_fn`` take ``(values, mu)``
    with ``values`` of shape ``(N, L, d)`` and must be pure.
    """

    name: str
    dim_d: int
    dim_m: int
    constants: StructuralConstants
    drift_fn: DriftFn
    diffusion_fn: DriftFn
    measure_dependent: bool = True
    affine: AffineSpec | None = None
    params: Mapping = field(default_factory=dict)

    def drift_batch(self, values, mu) -> np.ndarray:
        return np.asarray(self.drift_fn(values, mu), dtype=float).reshape(len(values), self.dim_d)

    def diffusion_batch(self, values, mu) -> np.ndarray:
        return np.asarray(self.diffusion_fn(values, mu), dtype=float).reshape(
            len(values), self.dim_d, self.dim_m
        )

    def drift(self, segment: SegmentPath, mu) -> np.ndarray:
        return self.drift_batch(segment.values[None], mu)[0]

    def diffusion(self, segment: SegmentPath, mu) -> np.ndarray:
        return self.diffusion_batch(segment.values[None], mu)[0]


def _affine_model(name, spec: AffineSpec, constants, params) -> CoefficientModel:
    d, m = spec.S.shape

    def drift(values, mu):
        x = values[:, -1, :]
        shift = spec.c_mean * mu.endpoint_mean() if spec.c_mean != 0 else np.zeros(d)
        return -spec.rate * x + spec.c_lag * values[:, 0, :] + shift

    def diffusion(values, mu):
        x = values[:, -1, :]
        if spec.s1 == 0:
            return np.broadcast_to(math.sqrt(spec.s0) * spec.S, (len(x), d, m)).copy()
        r2 = x[:, 0] * x[:, 0]
        for k in range(1, d):
            r2 = r2 + x[:, k] * x[:, k]
        scale = np.sqrt(spec.s0 + spec.s1 * r2)
        return scale[:, None, None] * spec.S[None]

    return CoefficientModel(
        name=name,
        dim_d=d,
        dim_m=m,
        constants=constants,
        drift_fn=drift,
        diffusion_fn=diffusion,
        measure_dependent=spec.c_mean != 0,
        affine=spec,
        params=dict(params),
    )


BUILTIN_MODELS = ("speed_measure", "ou", "delayed_linear", "mean_field_ou")

_PARAMS = {
    "speed_measure": {"lambda1", "sigma"},
    "ou": {"lambda1", "sigma", "d"},
    "delayed_linear": {"lambda1", "sigma", "c", "d"},
    "mean_field_ou": {"lambda1", "sigma", "c", "d"},
}


def _noise_matrix(sigma, d) -> np.ndarray:
    S = np.asarray(sigma, dtype=float)
    if S.ndim == 0:
        return float(S) * np.eye(d)
    if S.ndim != 2 or S.shape[0] != d:
        raise ShapeError(f"sigma must be a scalar or a {d}xm matrix")
    return S.copy()


def builtin_model(name: str, params: Mapping, *, r0: float = 0.0, p: float = 2.0, constants: Mapping | None = None) -> CoefficientModel:
    """Catalog model with structural constants derived by hand.

    ``params["lambda1"]`` is the drift rate a in ``-a*xi(0)``; the declared
    dissipativity constant lambda1 is then ``2a`` (minus ``|c|`` for the
    coupled models), since ``2<x, -a x> = -2a|x|^2``. Derived constants
    (per model):

    * speed_measure: sigma(xi) = sigma*sqrt(xi(0)^2 + 1), so
      ``||sigma||^2 <= sigma^2 + sigma^2 ||xi||^2``: lambda0 = lambda4 = sigma^2.
    * ou: lambda0 = ||S||_HS^2.
    * delayed_linear: ``2<x, c y> <= |c|(|x|^2 + ||xi||^2)``: lambda2 = |c|.
    * mean_field_ou: ``|mean_mu xi(0)| <= W_p(mu, delta_0)``: lambda3 = |c|.

    K is the derived one-sided Lipschitz constant, or 1.0 when the pairing
    vanishes identically (any K > 0 is then valid). ``constants`` overrides
    any derived value.
    """
    if name not in _PARAMS:
        raise InvalidInputError(f"unknown model {name!r}; choose from {BUILTIN_MODELS}")
    unknown = set(params) - _PARAMS[name]
    if unknown:
        raise InvalidInputError(f"unknown parameters for {name}: {sorted(unknown)}")
    for req in ("lambda1", "sigma"):
        if req not in params:
            raise InvalidInputError(f"{name} requires parameter {req!r}")
    rate = float(params["lambda1"])
    if not (math.isfinite(rate) and rate > 0):
        raise InvalidInputError(f"lambda1 must be > 0, got {rate}")
    c = float(params.get("c", 0.0))
    d = int(params.get("d", 1))
    if d < 1:
        raise InvalidInputError("d must be >= 1")

    if name == "speed_measure":
        sig = float(params["sigma"])
        if not sig > 0:
            raise InvalidInputError("speed_measure needs sigma > 0")
        spec = AffineSpec(rate, 0.0, 0.0, np.array([[sig]]), 1.0, 1.0)
        derived = dict(lambda0=sig**2, lambda1=2 * rate, lambda4=sig**2, K=sig**2)
    else:
        S = _noise_matrix(params["sigma"], d)
        hs2 = float(np.sum(S * S))
        c_lag = c if name == "delayed_linear" else 0.0
        c_mean = c if name == "mean_field_ou" else 0.0
        spec = AffineSpec(rate, c_lag, c_mean, S, 1.0, 0.0)
        derived = dict(lambda0=hs2, lambda1=2 * rate - abs(c))
        if name == "delayed_linear":
            derived.update(lambda2=abs(c), K=2 * abs(c))
        elif name == "mean_field_ou":
            derived.update(lambda3=abs(c), K=abs(c))
        if derived["lambda1"] <= 0 and not (constants and "lambda1" in constants):
            raise InvalidInputError(
                f"derived lambda1 = 2*rate - |c| = {derived['lambda1']} is not positive; declare constants explicitly"
            )
    if derived.get("K", 0.0) <= 0:
        derived["K"] = 1.0
    derived.update(dict(constants or {}))
    sc = StructuralConstants(p=p, r0=r0, **{k: float(v) for k, v in derived.items()})
    return _affine_model(name, spec, sc, params)


def custom_model(name, dim_d, dim_m, constants, drift_fn, diffusion_fn, measure_dependent=True) -> CoefficientModel:
    return CoefficientModel(name, dim_d, dim_m, constants, drift_fn, diffusion_fn, measure_dependent)


# --- speed-measure oracle --------------------------------------------------


@dataclass(frozen=True)
class SpeedMeasureOracle:
    """Stationary law of ``dX = -lambda1 X dt + sigma sqrt(X^2 + 1) dW``.

    Density proportional to ``(x^2 + 1)^(-lambda1/sigma^2 - 1)``.
    """

    lambda1: float
    sigma: float

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.sigma > 0):
            raise InvalidInputError("lambda1 and sigma must be > 0")

    @property
    def exponent(self) -> float:
        return self.lambda1 / self.sigma**2 + 1.0

    def unnormalized(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("x must be finite")
        return (x * x + 1.0) ** (-self.exponent)

    @cached_property
    def normalizer(self) -> float:
        a = self.exponent
        val, _ = integrate.quad(lambda x: (x * x + 1.0) ** (-a), -np.inf, np.inf, epsabs=0, epsrel=1e-10, limit=200)
        return val

    def density(self, x):
        return self.unnormalized(x) / self.normalizer

    def moment_finite(self, p: float) -> bool:
        if p < 0:
            raise DomainError("p must be >= 0")
        return self.lambda1 > 0.5 * (p - 1) * self.sigma**2

    def moment(self, k: int) -> float:
        if k < 0 or int(k) != k:
            raise DomainError("k must be a nonnegative integer")
        k = int(k)
        if not self.moment_finite(k):
            raise DomainError(f"moment {k} is infinite: needs lambda1 > (k-1)*sigma^2/2")
        if k % 2 == 1:
            return 0.0
        a = self.exponent
        half, _ = integrate.quad(lambda x: x**k * (x * x + 1.0) ** (-a), 0, np.inf, epsabs=0, epsrel=1e-10, limit=200)
        return 2 * half / self.normalizer

    @cached_property
    def _quantile_table(self):
        # In theta = arctan(x) the density is cos(theta)^(2a - 2): bounded and smooth.
        theta = np.linspace(-np.pi / 2, np.pi / 2, 2**17 + 1)
        g = np.cos(theta) ** (2 * self.exponent - 2)
        g[0] = g[-1] = 0.0
        cdf = integrate.cumulative_trapezoid(g, theta, initial=0.0)
        return cdf / cdf[-1], theta

    def quantile(self, u):
        cdf, theta = self._quantile_table
        return np.tan(np.interp(np.asarray(u, dtype=float), cdf, theta))

    def samples(self, n: int, seed: int | None = None) -> np.ndarray:
        """``n`` inverse-CDF samples; midpoint-stratified when ``seed`` is None."""
        if seed is None:
            u = (np.arange(n) + 0.5) / n
        else:
            u = np.random.Generator(np.random.PCG64(seed)).random(n)
        return self.quantile(u)


def oracle_density(o: SpeedMeasureOracle, x):
    return o.density(x)


def oracle_moment_finite(o: SpeedMeasureOracle, p: float) -> bool:
    return o.moment_finite(p)


def oracle_moment(o: SpeedMeasureOracle, k: int) -> float:
    return o.moment(k)


# --- hypothesis probe ------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    drift_violation: np.ndarray
    diffusion_violation: np.ndarray

    @property
    def max_drift_violation(self) -> float:
        return float(np.max(self.drift_violation))

    @property
    def max_diffusion_violation(self) -> float:
        return float(np.max(self.diffusion_violation))

    @property
    def max_violation(self) -> float:
        return max(self.max_drift_violation, self.max_diffusion_violation)


def probe_h3(model: CoefficientModel, samples) -> ProbeReport:
    """Evaluate both dissipativity inequalities on ``(segment, measure)`` pairs.

    Violation = LHS - RHS; all values <= 0 means the declared constants are
    consistent on the probe set (a falsification check, not a proof).
    """
    from .measures import wp_to_delta0

    samples = list(samples)
    if not samples:
        raise InvalidInputError("need at least one probe sample")
    c = model.constants
    w4, w5 = [], []
    for seg, mu in samples:
        x0 = seg.endpoint
        b = model.drift(seg, mu)
        sig = model.diffusion(seg, mu)
        sup2 = float(np.max(np.sum(seg.values**2, axis=1)))
        wp2 = wp_to_delta0(mu, c.p) ** 2
        lhs4 = 2.0 * float(x0 @ b)
        rhs4 = c.lambda0 - c.lambda1 * float(x0 @ x0) + c.lambda2 * sup2 + c.lambda3 * wp2
        lhs5 = float(np.sum(sig * sig))
        rhs5 = c.lambda0 + c.lambda4 * sup2 + c.lambda5 * wp2
        w4.append(lhs4 - rhs4)
        w5.append(lhs5 - rhs5)
    return ProbeReport(np.array(w4), np.array(w5))


def random_probe_samples(model: CoefficientModel, grid, n: int, seed: int = 0, low=-10.0, high=10.0, max_atoms=4):
    """Random segments and small empirical measures with coordinates in [low, high]."""
    from .measures import EmpiricalSegmentMeasure

    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for _ in range(n):
        seg = SegmentPath(grid, rng.uniform(low, high, size=(grid.length, model.dim_d)))
        k = int(rng.integers(1, max_atoms + 1))
        w = rng.random(k) + 0.1
        w /= w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        mu = EmpiricalSegmentMeasure(grid, rng.uniform(low, high, size=(k, grid.length, model.dim_d)), w)
        out.append((seg, mu))
    return out
