import math

import numpy as np
import pytest

from mckean_ipm.coefficients import StructuralConstants
from mckean_ipm.errors import InvalidInputError, PreconditionError
from mckean_ipm.hypothesis import (
    CHI,
    DEFAULT_BUDGET,
    FeasibilityPoint,
    FeasibilityReport,
    admissible_m0,
    check_membership,
    chi,
    choose_gamma3,
    eval_kappa1,
    eval_kappa2,
    eval_kappa3,
    eval_phi,
    eval_psi,
    eval_theta,
    find_feasible,
    moment_bound,
    moment_bound_terms,
)

HALF = FeasibilityPoint(0.5, 1.0, 1.0, 1.0)


def consts(p=2.0, r0=0.0, **lam):
    return StructuralConstants(p=p, r0=r0, **lam)


def random_constants(rng, p=None):
    return StructuralConstants(
        p=float(p if p is not None else rng.uniform(2, 8)),
        r0=float(rng.uniform(0, 2)),
        K=1.0,
        lambda0=float(rng.uniform(0, 2)),
        lambda1=float(rng.uniform(0.01, 50)),
        **{f"lambda{i}": float(rng.uniform(0, 1) * 10 ** rng.uniform(-4, 0)) for i in range(2, 6)},
    )


def random_point(rng, with_gamma3=False):
    return FeasibilityPoint(
        float(rng.uniform(0.01, 0.99)),
        *(float(10 ** rng.uniform(-3, 2)) for _ in range(3)),
        float(10 ** rng.uniform(-3, 2)) if with_gamma3 else None,
    )


class TestChi:
    def test_value(self):
        assert chi() == 1.30693
        assert chi() > 1
        assert chi() ** 2 == pytest.approx(1.70807, abs=1e-4)


class TestPoint:
    @pytest.mark.parametrize("args", [(0.0, 1, 1, 1), (1.0, 1, 1, 1), (0.5, 0, 1, 1), (0.5, 1, -1, 1), (0.5, 1, 1, 1, 0)])
    def test_domain(self, args):
        with pytest.raises(InvalidInputError):
            FeasibilityPoint(*args)


class TestFormulas:
    def test_psi_witness(self):
        assert eval_psi(consts(lambda1=10.0), 0.5, 1.0, 1.0, 1.0) == -9.0

    def test_psi_zero_at_balance(self):
        c = consts(p=3.0, lambda1=4.0)
        assert eval_psi(c, 0.3, 3.0 * 4.0 / 2, 2.0, 5.0) == 0.0

    def test_kappa_examples(self):
        assert eval_kappa1(consts(lambda2=1.0), 0.5, 7.0) == 2.0
        assert eval_kappa2(consts(lambda3=1.0), 0.5, 7.0) == 2.0
        assert eval_kappa1(consts(), 0.3, 2.0) == 0.0
        assert eval_kappa2(consts(), 0.3, 2.0) == 0.0

    def test_kappa_symmetry(self, rng):
        for _ in range(50):
            a, b = rng.uniform(0, 3, size=2)
            p, eps, g = rng.uniform(2, 6), rng.uniform(0.05, 0.95), rng.uniform(0.1, 5)
            k1 = eval_kappa1(consts(p=p, lambda2=a, lambda4=b), eps, g)
            k2 = eval_kappa2(consts(p=p, lambda3=a, lambda5=b), eps, g)
            assert k1 == k2

    def test_kappa3_example_and_linearity(self):
        assert eval_kappa3(consts(), 0.5, 1.0) == 0.0
        expected = 4 * (1 + 2 * CHI**2)
        assert eval_kappa3(consts(lambda0=1.0), 0.5, 1.0) == pytest.approx(expected, rel=1e-15)
        assert expected == pytest.approx(17.665, abs=1e-3)
        assert eval_kappa3(consts(p=3.0, lambda0=3.0), 0.4, 2.0) == pytest.approx(
            3 * eval_kappa3(consts(p=3.0, lambda0=1.0), 0.4, 2.0), rel=1e-15
        )

    def test_zero_power_convention_at_p2(self, rng):
        # At p = 2 the gamma power factor is exactly 1, so gamma drops out.
        for _ in range(100):
            c = random_constants(rng, p=2.0)
            eps = float(rng.uniform(0.01, 0.99))
            g, h = (float(10 ** rng.uniform(-3, 3)) for _ in range(2))
            assert eval_kappa1(c, eps, g) == eval_kappa1(c, eps, h) == 1 / eps * (
                c.lambda2 + c.lambda4 * ((1 + CHI**2 / eps) * 2 - 1)
            )
            assert eval_kappa2(c, eps, g) == eval_kappa2(c, eps, h)
            assert eval_kappa3(c, eps, g) == 2 * c.lambda0 / eps * (1 + CHI**2 / eps)

    def test_phi(self):
        assert eval_phi(consts(lambda1=10.0), 0.5, 1.0, 1.0, 1.0, 3.0) == -9.0
        phi = eval_phi(consts(lambda0=1.0, lambda1=10.0), 0.5, 1.0, 1.0, 1.0, 1.0)
        assert phi == pytest.approx(-9 + 2 * (1 + 4 * CHI**2), rel=1e-14)
        assert phi == pytest.approx(6.665, abs=1e-3)

    def test_phi_dominates_psi(self, rng):
        for _ in range(200):
            c, pt = random_constants(rng), random_point(rng, True)
            assert eval_phi(c, pt.eps, pt.alpha, pt.gamma1, pt.gamma2, pt.gamma3) >= eval_psi(
                c, pt.eps, pt.alpha, pt.gamma1, pt.gamma2
            )

    def test_theta(self):
        assert eval_theta(consts(lambda0=1.0, lambda1=10.0), 1.0, 1.0, 1.0, 1.0) == -7.0
        assert eval_theta(consts(p=4.0, lambda1=2.0), 4.0, 3.0, 3.0, 3.0) == 0.0
        c = consts(p=3.0, lambda0=0.7, lambda1=2.0)
        slope = eval_theta(c, 1.0, 1.0, 1.0, 2.0) - eval_theta(c, 1.0, 1.0, 1.0, 1.0)
        assert slope == pytest.approx(9 * 0.7 / 2, rel=1e-13)

    def test_psi_strictly_decreasing_in_lambda1(self, rng):
        for _ in range(1000):
            c, pt = random_constants(rng), random_point(rng)
            h = 1e-3 * c.lambda1
            up = StructuralConstants(**{**c.__dict__, "lambda1": c.lambda1 + h})
            d = eval_psi(up, pt.eps, pt.alpha, pt.gamma1, pt.gamma2) - eval_psi(c, pt.eps, pt.alpha, pt.gamma1, pt.gamma2)
            assert d < 0
            assert d / h == pytest.approx(-(1 - pt.eps) * c.p / (2 * pt.eps), rel=1e-6)

    def test_kappas_nonincreasing_in_gamma(self, rng):
        for _ in range(300):
            c = random_constants(rng, p=float(rng.uniform(2.01, 8)))
            eps = float(rng.uniform(0.05, 0.95))
            g = float(10 ** rng.uniform(-2, 2))
            assert eval_kappa1(c, eps, 1.01 * g) <= eval_kappa1(c, eps, g)
            assert eval_kappa2(c, eps, 1.01 * g) <= eval_kappa2(c, eps, g)

    def test_kappas_vanish_as_p_grows(self):
        vals1 = [eval_kappa1(consts(p=p, lambda2=1.0, lambda4=1.0), 0.5, 2.0) for p in (4, 10, 50)]
        vals2 = [eval_kappa2(consts(p=p, lambda3=1.0, lambda5=1.0), 0.5, 2.0) for p in (4, 10, 50)]
        for vals in (vals1, vals2):
            assert vals[0] > vals[1] > vals[2] > 0
        assert vals1[2] < 1e-3 * vals1[0]


class TestMembership:
    def test_witness(self):
        rep = check_membership(consts(r0=1.0, lambda1=10.0), HALF)
        assert rep.in_A and rep.in_U
        assert (rep.kappa1, rep.kappa2, rep.gap_A, rep.psi) == (0.0, 0.0, 1.0, -9.0)

    def test_tiny_lambda1(self):
        rep = check_membership(consts(lambda1=1e-6, lambda4=1.0), HALF)
        assert rep.psi > 0 and not rep.in_A and not rep.in_U

    def test_definitions_and_inclusion(self, rng):
        hits = 0
        for _ in range(1000):
            c, pt = random_constants(rng), random_point(rng)
            rep = check_membership(c, pt)
            assert rep.in_A == (rep.gap_A > 0 and rep.psi < 0)
            assert rep.in_U == (rep.gap_U > 0 and rep.psi < 0)
            assert rep.kappa2 >= 0 and rep.kappa1 >= 0
            if rep.in_A:
                hits += 1
                assert rep.in_U
        assert hits > 0

    def test_report_round_trip(self):
        rep = check_membership(consts(lambda0=0.3, lambda1=10.0), HALF.with_gamma3(0.2))
        assert FeasibilityReport.from_dict(rep.to_dict()) == rep


class TestSearch:
    def test_finds_witness_region(self):
        c = consts(r0=1.0, lambda1=10.0)
        pt = find_feasible(c)
        assert pt is not None and check_membership(c, pt).in_A

    def test_budget_exhausted(self):
        c = consts(p=4.0, lambda1=1e-6, lambda4=1.0)
        assert find_feasible(c) is None
        # grid-scan oracle: psi is positive at every grid point
        from mckean_ipm.hypothesis import EPS_GRID, LOG_GRID

        for e in EPS_GRID:
            for a in LOG_GRID:
                psi = eval_psi(c, e, a, np.array(LOG_GRID)[:, None], np.array(LOG_GRID)[None, :])
                assert np.all(psi > 0)

    def test_doubling_lambda1_keeps_feasibility(self, rng):
        for _ in range(200):
            c, pt = random_constants(rng), random_point(rng)
            if check_membership(c, pt).in_A:
                up = StructuralConstants(**{**c.__dict__, "lambda1": 2 * c.lambda1})
                assert check_membership(up, pt).in_A

    def test_gamma3_choice_makes_phi_negative(self):
        c = consts(lambda0=1.0, lambda1=10.0)
        g3 = choose_gamma3(c, HALF)
        rep = check_membership(c, HALF.with_gamma3(g3))
        assert rep.phi == pytest.approx(rep.psi / 2, rel=1e-12) and rep.phi < 0

    def test_default_budget(self):
        assert DEFAULT_BUDGET == 9 * 13**3
        with pytest.raises(InvalidInputError):
            find_feasible(consts(), 0)


class TestMomentBound:
    C = consts(p=2.0, r0=0.5, lambda0=1.0, lambda1=10.0, lambda2=0.1)
    PT = FeasibilityPoint(0.5, 1.0, 1.0, 1.0, 0.1)

    def test_limit_is_steady_term(self):
        terms = moment_bound_terms(self.C, self.PT, 0.7)
        assert moment_bound(self.C, self.PT, 0.7, 3.0, 1e6) == pytest.approx(terms.steady_term, abs=1e-12)

    def test_monotone_continuous(self):
        ts = np.linspace(0, 20, 2001)
        vals = moment_bound(self.C, self.PT, 0.7, 3.0, ts)
        assert np.all(np.diff(vals) <= 0)
        terms = moment_bound_terms(self.C, self.PT, 0.7)
        lipschitz = terms.transient_coeff * 3.0 * terms.decay_rate
        assert np.max(np.abs(np.diff(vals))) <= lipschitz * (ts[1] - ts[0]) * (1 + 1e-12)

    def test_all_sources_zero(self):
        c = consts(p=2.0, r0=0.5, lambda1=10.0)
        assert moment_bound(c, self.PT, 0.0, 0.0, np.array([0.0, 1.0, 5.0])).tolist() == [0.0, 0.0, 0.0]

    def test_closed_form(self):
        rep = check_membership(self.C, self.PT)
        g = math.exp(self.PT.alpha * self.C.r0)
        terms = moment_bound_terms(self.C, self.PT, 0.7)
        assert terms.steady_term == pytest.approx(2 * g / rep.gap_U * (rep.kappa3 + rep.kappa2 * 0.7), rel=1e-14)
        assert terms.transient_coeff == pytest.approx(g * (1 + 4 / 0.5 + 4 * rep.kappa1 * 0.5 * g), rel=1e-14)
        assert terms.decay_rate == rep.gap_U > 0

    def test_preconditions(self):
        with pytest.raises(PreconditionError, match="phi"):
            moment_bound_terms(consts(lambda0=1.0, lambda1=10.0), HALF.with_gamma3(1.0), 0.0)
        with pytest.raises(PreconditionError, match="psi"):
            moment_bound_terms(consts(lambda1=1e-6), HALF.with_gamma3(1.0), 0.0)
        with pytest.raises(PreconditionError, match="kappa1"):
            moment_bound_terms(consts(lambda1=1e-6, lambda4=1.0), HALF.with_gamma3(1.0), 0.0)
        with pytest.raises(PreconditionError, match="gamma3"):
            moment_bound_terms(self.C, HALF, 0.0)

    def test_admissible_radius(self):
        m0 = admissible_m0(self.C, self.PT, 2.0, 0.01)
        rep = check_membership(self.C, self.PT)
        assert m0 == pytest.approx(2 * rep.kappa3 * math.exp(0.5) / rep.gap_A, rel=1e-14)
        assert admissible_m0(self.C, self.PT, 2.0, 1e9) == 1e9
