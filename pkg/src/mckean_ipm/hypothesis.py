"""Closed-form feasibility conditions for existence of an invariant measure.

All evaluators accept numpy arrays for the point coordinates so the grid
search in :func:`find_feasible` is vectorised. Power factors of the form
``((p - 2) / (p * gamma)) ** ((p - 2) / 2)`` are taken to be exactly 1 at
``p == 2`` (0**0 = 1).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .coefficients import StructuralConstants
from .errors import InvalidInputError, PreconditionError

CHI = 1.30693
"""One-sided BDG constant: smallest positive root of the confluent
hypergeometric function with parameter 1, frozen at five decimals."""


def chi() -> float:
    return CHI


@dataclass(frozen=True)
class FeasibilityPoint:
    eps: float
    alpha: float
    gamma1: float
    gamma2: float
    gamma3: float | None = None

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise InvalidInputError(f"eps must lie in (0, 1), got {self.eps}")
        for name in ("alpha", "gamma1", "gamma2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be > 0, got {v}")
        if self.gamma3 is not None and not (math.isfinite(self.gamma3) and self.gamma3 > 0):
            raise InvalidInputError(f"gamma3 must be > 0, got {self.gamma3}")

    def with_gamma3(self, gamma3: float) -> "FeasibilityPoint":
        return FeasibilityPoint(self.eps, self.alpha, self.gamma1, self.gamma2, gamma3)


def _power_factor(p, gamma):
    if p == 2:
        return 1.0
    return ((p - 2) / (p * np.asarray(gamma, dtype=float))) ** ((p - 2) / 2)


def eval_psi(c: StructuralConstants, eps, alpha, gamma1, gamma2):
    p = c.p
    l0, l1, l2, l3, l4, l5 = c.lambdas
    braces = alpha - p * l1 / 2 + p * gamma1 / 2 * (l2 + l4 * (p - 1)) + p * gamma2 / 2 * (l3 + l5 * (p - 1))
    return (1 - eps) / eps * braces + CHI**2 * p**2 / (2 * eps**2) * (l4 * gamma1 + l5 * gamma2)


def eval_kappa1(c: StructuralConstants, eps, gamma1):
    p = c.p
    return 1 / eps * (c.lambda2 + c.lambda4 * ((1 + CHI**2 / eps) * p - 1)) * _power_factor(p, gamma1)


def eval_kappa2(c: StructuralConstants, eps, gamma2):
    p = c.p
    return 1 / eps * (c.lambda3 + c.lambda5 * ((1 + CHI**2 / eps) * p - 1)) * _power_factor(p, gamma2)


def eval_kappa3(c: StructuralConstants, eps, gamma3):
    p = c.p
    return p * c.lambda0 / eps * (1 + CHI**2 / eps) * _power_factor(p, gamma3)


def eval_phi(c: StructuralConstants, eps, alpha, gamma1, gamma2, gamma3):
    p = c.p
    extra = 0.5 * ((1 - eps) / eps + CHI**2 / eps**2) * p**2 * gamma3 * c.lambda0
    return eval_psi(c, eps, alpha, gamma1, gamma2) + extra


def eval_theta(c: StructuralConstants, alpha, gamma1, gamma2, gamma3):
    p = c.p
    l0, l1, l2, l3, l4, l5 = c.lambdas
    return (
        alpha
        - p * l1 / 2
        + p**2 * l0 * gamma3 / 2
        + p * gamma1 / 2 * (l2 + l4 * (p - 1))
        + p * gamma2 / 2 * (l3 + l5 * (p - 1))
    )


@dataclass(frozen=True)
class FeasibilityReport:
    point: FeasibilityPoint
    p: float
    r0: float
    psi: float
    kappa1: float
    kappa2: float
    gap_A: float
    gap_U: float
    in_A: bool
    in_U: bool
    kappa3: float | None = None
    phi: float | None = None
    theta: float | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["point"] = asdict(self.point)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FeasibilityReport":
        data = dict(data)
        data["point"] = FeasibilityPoint(**data["point"])
        return cls(**data)


def check_membership(c: StructuralConstants, pt: FeasibilityPoint) -> FeasibilityReport:
    """Evaluate every feasibility quantity at ``pt`` and decide A / U membership."""
    psi = float(eval_psi(c, pt.eps, pt.alpha, pt.gamma1, pt.gamma2))
    k1 = float(eval_kappa1(c, pt.eps, pt.gamma1))
    k2 = float(eval_kappa2(c, pt.eps, pt.gamma2))
    growth = math.exp(pt.alpha * c.r0)
    gap_A = pt.alpha - 2 * growth * (k1 + k2)
    gap_U = pt.alpha - 2 * growth * k1
    k3 = phi = theta = None
    if pt.gamma3 is not None:
        k3 = float(eval_kappa3(c, pt.eps, pt.gamma3))
        phi = float(eval_phi(c, pt.eps, pt.alpha, pt.gamma1, pt.gamma2, pt.gamma3))
        theta = float(eval_theta(c, pt.alpha, pt.gamma1, pt.gamma2, pt.gamma3))
    return FeasibilityReport(
        point=pt,
        p=c.p,
        r0=c.r0,
        psi=psi,
        kappa1=k1,
        kappa2=k2,
        gap_A=gap_A,
        gap_U=gap_U,
        in_A=bool(gap_A > 0 and psi < 0),
        in_U=bool(gap_U > 0 and psi < 0),
        kappa3=k3,
        phi=phi,
        theta=theta,
    )


EPS_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))
LOG_GRID = tuple(float(v) for v in np.logspace(-3, 3, 13))
DEFAULT_BUDGET = len(EPS_GRID) * len(LOG_GRID) ** 3


def choose_gamma3(c: StructuralConstants, pt: FeasibilityPoint) -> float | None:
    """Half of the largest gamma3 keeping phi < 0, so phi = psi / 2 there.

    Returns None when psi >= 0 (no gamma3 works). With lambda0 = 0 the
    gamma3 term vanishes and 1.0 is returned.
    """
    psi = float(eval_psi(c, pt.eps, pt.alpha, pt.gamma1, pt.gamma2))
    if psi >= 0:
        return None
    slope = 0.5 * ((1 - pt.eps) / pt.eps + CHI**2 / pt.eps**2) * c.p**2 * c.lambda0
    if slope == 0:
        return 1.0
    return 0.5 * (-psi) / slope


def find_feasible(c: StructuralConstants, budget: int = DEFAULT_BUDGET) -> FeasibilityPoint | None:
    """Deterministic grid search for a point of A.

    Traverses eps in {0.1, ..., 0.9} (outermost), then alpha, gamma1, gamma2
    over 13 log-spaced values in [1e-3, 1e3]. Of the first ``budget`` points,
    returns the A-member with the largest ``gap_A`` (lowest traversal index on
    ties), with gamma3 from :func:`choose_gamma3`. ``None`` only means the
    budget was exhausted, not that A is empty.
    """
    if budget < 1:
        raise InvalidInputError("budget must be >= 1")
    E, A, G1, G2 = (
        g.ravel()[:budget]
        for g in np.meshgrid(
            np.array(EPS_GRID), np.array(LOG_GRID), np.array(LOG_GRID), np.array(LOG_GRID), indexing="ij"
        )
    )
    with np.errstate(over="ignore", invalid="ignore"):
        psi = eval_psi(c, E, A, G1, G2)
        k1 = eval_kappa1(c, E, G1)
        k2 = eval_kappa2(c, E, G2)
        gap_A = A - 2 * np.exp(A * c.r0) * (k1 + k2)
    ok = (gap_A > 0) & (psi < 0)
    if not ok.any():
        return None
    idx = int(np.argmax(np.where(ok, gap_A, -np.inf)))
    pt = FeasibilityPoint(float(E[idx]), float(A[idx]), float(G1[idx]), float(G2[idx]))
    g3 = choose_gamma3(c, pt)
    return pt.with_gamma3(g3) if g3 is not None else pt


@dataclass(frozen=True)
class MomentBound:
    steady_term: float
    transient_coeff: float
    decay_rate: float

    def at(self, mu_moment: float, t):
        return self.steady_term + self.transient_coeff * mu_moment * np.exp(-self.decay_rate * np.asarray(t))


def moment_bound_terms(c: StructuralConstants, pt: FeasibilityPoint, nu_moment: float) -> MomentBound:
    """Constants of the explicit p-th moment bound for the frozen SDE.

    Requires ``2 kappa1 e^{alpha r0} < alpha``, ``psi < 0`` and, with
    gamma3, ``phi < 0``.
    """
    if pt.gamma3 is None:
        raise PreconditionError("gamma3 is required for the moment bound")
    rep = check_membership(c, pt)
    if not rep.gap_U > 0:
        raise PreconditionError(f"2*kappa1*e^(alpha*r0) < alpha fails (gap_U={rep.gap_U:.6g})")
    if not rep.psi < 0:
        raise PreconditionError(f"psi < 0 fails (psi={rep.psi:.6g})")
    if not rep.phi < 0:
        raise PreconditionError(f"phi < 0 fails (phi={rep.phi:.6g})")
    growth = math.exp(pt.alpha * c.r0)
    steady = 2 * growth / rep.gap_U * (rep.kappa3 + rep.kappa2 * nu_moment)
    transient = growth * (1 + 4 / pt.eps + 4 * rep.kappa1 * c.r0 * growth)
    return MomentBound(steady, transient, rep.gap_U)


def moment_bound(c: StructuralConstants, pt: FeasibilityPoint, nu_moment: float, mu_moment: float, t):
    """Upper bound on E||X_t||_inf^p; ``nu_moment`` is W_p(nu, delta_0)^p."""
    return moment_bound_terms(c, pt, nu_moment).at(mu_moment, t)


def admissible_m0(c: StructuralConstants, pt: FeasibilityPoint, q: float, delta0_moment: float) -> float:
    """Radius M_0 of the invariant moment ball, evaluated at order ``q``.

    ``delta0_moment`` is the caller's estimate of E||X_{r0}||_inf^q for the
    frozen SDE started at and frozen at delta_0.
    """
    if pt.gamma3 is None:
        raise PreconditionError("gamma3 is required for M_0")
    cq = c.with_p(q)
    rep = check_membership(cq, pt)
    if not rep.gap_A > 0:
        raise PreconditionError(f"alpha - 2e^(alpha r0)(kappa1 + kappa2) > 0 fails at q={q} (gap={rep.gap_A:.6g})")
    first = 2 * rep.kappa3 * math.exp(pt.alpha * c.r0) / rep.gap_A
    return max(first, float(delta0_moment))
