"""CARA preference layer: utility normalization, willingness-to-pay and its
partials, participation, critical types, profitability margins.

Finite differences are the oracle for every analytic derivative.
"""

import math

import numpy as np
import pytest

from commrate.errors import DomainError
from commrate.preference import (
    ContractQuote,
    MarketPrimitives,
    critical_theta,
    participation_gap,
    profitability_margin,
    utility,
    wtp,
    wtp_dr,
    wtp_dtheta,
)
from commrate.typedist import TypeMeasure

PRIM = MarketPrimitives(rho=5.0, loss=1.0)

TRIPLES = [
    (0.5, 1.0, 0.3), (1.0, 1.0, 1.0), (2.0, 0.8, 0.5), (5.0, 1.0, 0.8),
    (5.0, 0.6, 0.6), (10.0, 1.0, 0.9), (20.0, 1.0, 0.5), (50.0, 1.0, 0.95),
    (0.1, 0.5, 0.4), (3.0, 0.9, 0.2), (7.5, 1.0, 0.7), (15.0, 0.7, 0.3),
    (1.5, 1.0, 0.99), (30.0, 1.0, 0.2), (4.0, 0.4, 0.35), (8.0, 1.0, 0.6),
    (2.5, 1.0, 0.45), (12.0, 0.85, 0.8), (0.7, 1.0, 0.65), (6.0, 0.95, 0.9),
]


class TestPrimitives:
    def test_validation(self):
        with pytest.raises(DomainError):
            MarketPrimitives(rho=0.0)
        with pytest.raises(DomainError):
            MarketPrimitives(rho=1.0, loss=0.0)
        with pytest.raises(DomainError):
            MarketPrimitives(rho=1.0, loss=1.5)


class TestUtility:
    def test_normalization(self):
        assert utility(PRIM, 0.0) == 0.0
        assert utility(PRIM, 1.0) == pytest.approx(1.0, rel=1e-15)

    def test_known_value(self):
        p = MarketPrimitives(rho=1.0)
        assert utility(p, 0.5) == pytest.approx(
            (1.0 - math.exp(-0.5)) / (1.0 - math.exp(-1.0)), rel=1e-14
        )
        assert utility(p, 0.5) == pytest.approx(0.62246, abs=5e-6)

    def test_increasing_concave(self):
        w = np.linspace(0.0, 1.0, 200)
        vals = utility(PRIM, w)
        assert np.all(np.diff(vals) > 0.0)
        assert np.all(np.diff(vals, 2) < 0.0)

    def test_constant_absolute_risk_aversion(self):
        # -u''/u' recovered by finite differences equals rho everywhere
        for rho in (0.5, 2.0, 10.0):
            p = MarketPrimitives(rho=rho)
            h = 1e-5
            for w in (0.2, 0.5, 0.8):
                u1 = (utility(p, w + h) - utility(p, w - h)) / (2.0 * h)
                u2 = (utility(p, w + h) - 2.0 * utility(p, w) + utility(p, w - h)) / h**2
                assert -u2 / u1 == pytest.approx(rho, rel=1e-5)

    def test_negative_wealth_rejected(self):
        with pytest.raises(DomainError):
            utility(PRIM, -0.1)


class TestWtp:
    def test_endpoints(self):
        for rho, l, r in TRIPLES[:8]:
            p = MarketPrimitives(rho=rho, loss=l)
            assert wtp(p, 0.0, r) == pytest.approx(0.0, abs=1e-13)
            assert wtp(p, 1.0, r) == pytest.approx(r, rel=1e-12)

    def test_known_value(self):
        p = MarketPrimitives(rho=1.0, loss=1.0)
        assert wtp(p, 0.5, 1.0) == pytest.approx(
            math.log(0.5 * math.e + 0.5), rel=1e-13
        )
        assert wtp(p, 0.5, 1.0) == pytest.approx(0.62012, abs=1e-5)

    def test_direct_formula(self):
        # unstabilized textbook form, evaluable at moderate rho
        for rho, l, r in TRIPLES:
            if rho * l > 200.0:
                continue
            p = MarketPrimitives(rho=rho, loss=l)
            for th in (0.1, 0.5, 0.9):
                direct = (
                    math.log(
                        (th * math.exp(rho * l) + 1.0 - th)
                        / (th * math.exp(rho * (l - r)) + 1.0 - th)
                    )
                    / rho
                )
                assert wtp(p, th, r) == pytest.approx(direct, rel=1e-11)

    def test_increasing_in_theta_and_r(self):
        p = PRIM
        ths = np.linspace(0.0, 1.0, 100)
        vals = wtp(p, ths, 0.8)
        assert np.all(np.diff(vals) > 0.0)
        for th in (0.2, 0.6):
            rs = np.linspace(0.01, 1.0, 50)
            vv = np.array([wtp(p, th, float(r)) for r in rs])
            assert np.all(np.diff(vv) > 0.0)

    def test_concave_in_theta(self):
        # second differences stay non-positive for 20 (rho, l, r) triples
        ths = np.linspace(0.0, 1.0, 1000)
        for rho, l, r in TRIPLES:
            p = MarketPrimitives(rho=rho, loss=l)
            vals = wtp(p, ths, r)
            assert np.max(np.diff(vals, 2)) <= 1e-8

    def test_above_actuarial_value(self):
        ths = np.linspace(0.0, 1.0, 500)
        for rho, l, r in TRIPLES:
            p = MarketPrimitives(rho=rho, loss=l)
            assert np.all(wtp(p, ths, r) - ths * r >= -1e-12)

    def test_risk_neutral_limit(self):
        p = MarketPrimitives(rho=1e-6, loss=1.0)
        ths = np.linspace(0.0, 1.0, 1000)
        assert np.max(np.abs(wtp(p, ths, 0.7) - ths * 0.7)) <= 1e-5

    def test_neutral_guard_exact(self):
        p = MarketPrimitives(rho=1e-9, loss=1.0)
        assert wtp(p, 0.3, 0.5) == 0.3 * 0.5
        assert wtp_dtheta(p, 0.3, 0.5) == 0.5
        assert wtp_dr(p, 0.3, 0.5) == 0.3

    def test_huge_rho_no_overflow(self):
        p = MarketPrimitives(rho=5000.0, loss=1.0)
        v = wtp(p, 0.5, 0.9)
        assert math.isfinite(v) and 0.0 < v <= 0.9
        # infinitely risk-averse agents pay the full indemnity
        assert v == pytest.approx(0.9, abs=1e-2)


class TestWtpPartials:
    def test_zero_cases(self):
        assert wtp_dtheta(PRIM, 0.4, 0.0) == pytest.approx(0.0, abs=1e-15)
        assert wtp_dr(PRIM, 0.0, 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_positive_interior(self):
        ths = np.linspace(0.05, 0.95, 20)
        assert np.all(wtp_dtheta(PRIM, ths, 0.8) > 0.0)
        assert np.all(wtp_dr(PRIM, ths, 0.8) > 0.0)

    def test_matches_finite_differences(self):
        # relative agreement to 1e-6 across the triple set
        h = 1e-6
        for rho, l, r in TRIPLES:
            if rho > 100.0:
                continue
            p = MarketPrimitives(rho=rho, loss=l)
            for th in (0.1, 0.3, 0.7):
                fd_th = (wtp(p, th + h, r) - wtp(p, th - h, r)) / (2.0 * h)
                # the difference quotient cannot resolve derivatives below
                # ~1e-10 (wtp increments fall under float rounding)
                assert wtp_dtheta(p, th, r) == pytest.approx(fd_th, rel=1e-6, abs=1e-10)
                if h < r < l - h:
                    fd_r = (wtp(p, th, r + h) - wtp(p, th, r - h)) / (2.0 * h)
                    assert wtp_dr(p, th, r) == pytest.approx(fd_r, rel=1e-6, abs=1e-10)

    def test_spec_point_fd(self):
        p = MarketPrimitives(rho=5.0, loss=1.0)
        h = 1e-6
        fd = (wtp(p, 0.3 + h, 0.6) - wtp(p, 0.3 - h, 0.6)) / (2.0 * h)
        assert wtp_dtheta(p, 0.3, 0.6) == pytest.approx(fd, rel=1e-6)

    def test_boundary_derivative_closed_form(self):
        # d wtp/d theta at theta = 1 equals e^{-rho(l-r)}(1-e^{-rho r})/rho,
        # confirmed against a one-sided difference
        for rho, l, r in TRIPLES:
            if rho > 100.0:
                continue
            p = MarketPrimitives(rho=rho, loss=l)
            closed = math.exp(-rho * (l - r)) * (1.0 - math.exp(-rho * r)) / rho
            assert wtp_dtheta(p, 1.0, r) == pytest.approx(closed, rel=1e-12)
            h = 1e-7
            fd = (wtp(p, 1.0, r) - wtp(p, 1.0 - h, r)) / h
            assert wtp_dtheta(p, 1.0, r) == pytest.approx(fd, rel=1e-4, abs=1e-10)


class TestParticipation:
    def test_null_contract(self):
        assert participation_gap(PRIM, 0.4, 0.0, 0.0) == 0.0

    def test_indifference_at_wtp(self):
        for rho, l, r in TRIPLES[:10]:
            p = MarketPrimitives(rho=rho, loss=l)
            for th in (0.2, 0.5, 0.9):
                prem = wtp(p, th, r)
                assert abs(participation_gap(p, th, prem, r)) <= 1e-10

    def test_sign_around_wtp(self):
        th, r = 0.4, 0.7
        prem = wtp(PRIM, th, r)
        assert participation_gap(PRIM, th, prem - 1e-6, r) > 0.0
        assert participation_gap(PRIM, th, prem + 1e-6, r) < 0.0

    def test_wealth_guard(self):
        p = MarketPrimitives(rho=2.0, loss=1.0)
        with pytest.raises(DomainError):
            participation_gap(p, 0.5, 0.9, 0.2)  # damage-state wealth < 0


class TestCriticalTheta:
    def test_root_property(self):
        for rho, l, r in TRIPLES[:12]:
            p = MarketPrimitives(rho=rho, loss=l)
            for prem_frac in (0.1, 0.5, 0.9):
                prem = prem_frac * r
                if prem <= 0.0 or prem >= r:
                    continue
                th = critical_theta(p, prem, r)
                assert 0.0 < th < 1.0
                assert wtp(p, th, r) == pytest.approx(prem, abs=1e-9)

    def test_limits(self):
        th_small = critical_theta(PRIM, 1e-9, 0.8)
        assert th_small < 1e-6
        th_big = critical_theta(PRIM, 0.8 - 1e-9, 0.8)
        assert th_big > 1.0 - 1e-6

    def test_spec_point(self):
        # rho=5, l=1, r=0.8, premium=0.2: root-finding oracle on wtp
        p = MarketPrimitives(rho=5.0, loss=1.0)
        th = critical_theta(p, 0.2, 0.8)
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if wtp(p, mid, 0.8) < 0.2:
                lo = mid
            else:
                hi = mid
        assert th == pytest.approx(0.5 * (lo + hi), abs=1e-9)

    def test_inadmissible(self):
        with pytest.raises(DomainError):
            critical_theta(PRIM, 0.5, 0.5)
        with pytest.raises(DomainError):
            critical_theta(PRIM, 0.6, 0.5)

    def test_huge_rho_stable(self):
        p = MarketPrimitives(rho=200.0, loss=1.0)
        th = critical_theta(p, 0.3, 0.8)
        assert 0.0 < th < 1.0
        assert wtp(p, th, 0.8) == pytest.approx(0.3, abs=1e-9)

    def test_underflowing_root_clamped(self):
        # at extreme risk aversion the root lies below the float range;
        # the smallest positive float is returned rather than zero
        p = MarketPrimitives(rho=5000.0, loss=1.0)
        assert 0.0 < critical_theta(p, 0.3, 0.8) <= 1e-300


class TestProfitabilityMargin:
    def test_small_rho_negative(self):
        # margin -> r (Z - 1) < 0 as rho -> 0
        m = TypeMeasure.from_ez(0.05, 0.989)
        p = MarketPrimitives(rho=1e-7, loss=1.0)
        r = 0.5
        assert profitability_margin(p, m, r) == pytest.approx(r * (m.Z - 1.0), abs=1e-7)
        assert profitability_margin(p, m, r) < 0.0

    def test_large_rho_positive(self):
        m = TypeMeasure.from_ez(0.05, 0.989)
        p = MarketPrimitives(rho=50.0, loss=1.0)
        assert profitability_margin(p, m, 0.5) > 0.0

    def test_uniform_small_rho_negative(self):
        m = TypeMeasure.from_ab(1.0, 1.0)
        p = MarketPrimitives(rho=0.1, loss=1.0)
        assert profitability_margin(p, m, 0.5) < 0.0

    def test_monotone_in_rho(self):
        # the boundary derivative decreases in rho, so the margin increases
        m = TypeMeasure.from_ez(0.05, 0.989)
        vals = [
            profitability_margin(MarketPrimitives(rho=rho), m, 0.8)
            for rho in (0.5, 1.0, 2.0, 5.0, 10.0, 40.0)
        ]
        assert all(v2 > v1 for v1, v2 in zip(vals, vals[1:]))


class TestContractQuote:
    def test_reservation_quote(self):
        q = ContractQuote.at_reservation(PRIM, 0.3, 0.8)
        assert q.premium == pytest.approx(wtp(PRIM, 0.3, 0.8))
        assert q.premium <= q.r

    def test_invalid(self):
        with pytest.raises(DomainError):
            ContractQuote(theta=0.5, r=0.5, premium=0.6)
        with pytest.raises(DomainError):
            ContractQuote(theta=1.5, r=0.5, premium=0.1)
