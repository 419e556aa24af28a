"""Market functionals: costs, profit, elasticity, segment integrals,
optimality residuals.

The CDF-space quadrature is cross-checked against scipy's independent
adaptive quadrature on the raw theta-space integral, including measures
with endpoint-singular densities.
"""

import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from commrate.errors import DomainError, QuadratureWarning
from commrate.market import MarketModel, QuadratureSpec, segment_integrals_batch
from commrate.preference import MarketPrimitives, wtp, wtp_dtheta
from commrate.typedist import TypeMeasure

BENCH = TypeMeasure.from_ez(0.05, 0.989)


def model(E=0.05, Z=0.989, rho=5.0, loss=1.0, **quad_kwargs) -> MarketModel:
    return MarketModel(
        measure=TypeMeasure.from_ez(E, Z),
        prim=MarketPrimitives(rho=rho, loss=loss),
        quad=QuadratureSpec(**quad_kwargs) if quad_kwargs else QuadratureSpec(),
    )


def model_ab(a, b, rho=5.0, loss=1.0) -> MarketModel:
    return MarketModel(
        measure=TypeMeasure.from_ab(a, b),
        prim=MarketPrimitives(rho=rho, loss=loss),
    )


def adaptive_reference(mm: MarketModel, theta: float, r: float) -> float:
    """Independent oracle: adaptive quadrature on the raw theta-space
    integral of wtp against the density."""
    a, b = mm.measure.alpha, mm.measure.beta
    lnb = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)

    def integrand(x):
        f = math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - lnb)
        return f * wtp(mm.prim, x, r)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(integrand, theta, 1.0, limit=400, epsabs=1e-13, epsrel=1e-13)
    return val


class TestQuadratureSpec:
    def test_defaults(self):
        q = QuadratureSpec()
        assert q.nodes == 129 and q.abs_tol == 1e-10

    def test_validation(self):
        with pytest.raises(DomainError):
            QuadratureSpec(nodes=8)
        with pytest.raises(DomainError):
            QuadratureSpec(nodes=128)  # must be odd
        with pytest.raises(DomainError):
            QuadratureSpec(abs_tol=0.0)


class TestCosts:
    def test_marginal_cost(self):
        assert MarketModel.marginal_cost(0.5, 0.8) == pytest.approx(0.4)

    def test_uniform_closed_forms(self):
        mm = model_ab(1.0, 1.0)
        assert mm.total_cost(0.5, 1.0) == pytest.approx(0.375, abs=1e-12)
        assert mm.avg_cost(0.5, 1.0) == pytest.approx(0.75, abs=1e-12)

    def test_natural_monopoly(self):
        # AC - MC = r * m(theta) > 0 on interior grids for several measures
        grid = np.linspace(0.02, 0.98, 49)
        for mm in (model(), model_ab(0.5, 0.5), model_ab(2.0, 3.0), model_ab(3.0, 0.7)):
            r = 0.8 * mm.prim.loss
            gap = mm.avg_cost(grid, r) - mm.marginal_cost(grid, r)
            assert np.all(gap > 0.0)
            assert np.allclose(gap, r * mm.measure.mean_residual(grid), rtol=1e-12)


class TestProfit:
    def test_zero_at_one(self):
        assert model().profit(1.0, 0.8) == 0.0

    def test_risk_neutral_nonpositive(self):
        mm = model(rho=1e-9)
        ths = np.linspace(0.0, 1.0, 201)
        for r in (0.2, 0.6, 1.0):
            assert np.max(mm.profit(ths, r)) <= 0.0

    def test_uniform_risk_neutral_value(self):
        mm = model_ab(1.0, 1.0, rho=1e-9)
        assert mm.profit(0.0, 1.0) == pytest.approx(-0.5, abs=1e-12)

    def test_sign_matches_margin(self):
        mm = model()
        for th in (0.01, 0.05, 0.3):
            assert math.copysign(1, mm.profit(th, 0.8)) == math.copysign(
                1, mm.avg_profit(th, 0.8)
            )


class TestElasticity:
    def test_two_forms_agree(self):
        # hazard-based form vs quantity-slope form on a dense grid
        mm = model()
        r = 0.8
        ths = np.linspace(0.002, 0.3, 1000)
        for th in ths[::37]:
            th = float(th)
            eps = mm.elasticity(th, r)
            f = mm.measure.pdf(th)
            Q = mm.measure.survival(th)
            alt = -f / wtp_dtheta(mm.prim, th, r) * wtp(mm.prim, th, r) / Q
            assert eps == pytest.approx(alt, abs=1e-10, rel=1e-10)

    def test_uniform_oracle(self):
        mm = model_ab(1.0, 1.0)
        th, r = 0.5, 0.8
        eps = mm.elasticity(th, r)
        oracle = -(
            mm.measure.hazard(th) * wtp(mm.prim, th, r) / wtp_dtheta(mm.prim, th, r)
        )
        assert eps == pytest.approx(oracle, rel=1e-12)
        assert eps < 0.0

    def test_endpoint_signal(self):
        mm = model()
        with pytest.raises(DomainError):
            mm.elasticity(0.0, 0.8)
        with pytest.raises(DomainError):
            mm.elasticity(1.0, 0.8)


class TestSegmentIntegrals:
    def test_r_zero(self):
        assert model().expected_wtp(0.3, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_theta_one_limits(self):
        mm = model()
        assert mm.surplus(1.0 - 1e-9, 0.8) == pytest.approx(0.0, abs=1e-9)
        assert mm.welfare(1.0 - 1e-9, 0.8) == pytest.approx(0.0, abs=1e-9)

    def test_against_adaptive_oracle_benchmark(self):
        mm = model()
        got = mm.expected_wtp(0.0285, 0.8598)
        assert got == pytest.approx(adaptive_reference(mm, 0.0285, 0.8598), abs=1e-8)

    def test_uniform_against_oracle(self):
        mm = model_ab(1.0, 1.0, rho=1.0)
        got = mm.expected_wtp(0.0, 1.0)
        assert got == pytest.approx(adaptive_reference(mm, 0.0, 1.0), abs=1e-9)

    def test_cross_check_50_random_tuples(self):
        # includes alpha < 1 and beta < 1 endpoint-singular densities
        rng = np.random.default_rng(2024)
        count = 0
        while count < 50:
            a = 10.0 ** rng.uniform(math.log10(0.25), 2.0)
            b = 10.0 ** rng.uniform(math.log10(0.25), 2.0)
            rho = 10.0 ** rng.uniform(-0.3, 1.3)
            l = rng.uniform(0.5, 1.0)
            r = rng.uniform(0.1, l)
            th = rng.uniform(0.0, 0.8)
            mm = MarketModel(
                measure=TypeMeasure.from_ab(a, b),
                prim=MarketPrimitives(rho=rho, loss=l),
            )
            if mm.measure.survival(th) < 1e-8:
                continue  # empty segment: nothing to compare
            got = mm.segment_integrals(th, r, check=False).expected_wtp
            ref = adaptive_reference(mm, th, r)
            assert got == pytest.approx(ref, abs=1e-8), (a, b, rho, l, r, th)
            count += 1

    def test_welfare_decomposition(self):
        # sw = profit + surplus to 1e-10 everywhere sampled
        rng = np.random.default_rng(77)
        for _ in range(40):
            mm = model(
                E=rng.uniform(0.05, 0.8),
                Z=rng.uniform(0.2, 0.98),
                rho=10.0 ** rng.uniform(-0.3, 1.3),
            )
            th = rng.uniform(0.0, 0.9)
            r = rng.uniform(0.1, 1.0)
            seg = mm.segment_integrals(th, r, check=False)
            pi = mm.profit(th, r)
            assert abs(seg.welfare - (pi + seg.surplus)) <= 1e-10

    def test_surplus_nonnegative(self):
        rng = np.random.default_rng(99)
        for _ in range(60):
            mm = model(
                E=rng.uniform(0.05, 0.8),
                Z=rng.uniform(0.2, 0.98),
                rho=10.0 ** rng.uniform(-0.3, 1.3),
            )
            th = rng.uniform(0.0, 0.95)
            r = rng.uniform(0.05, 1.0)
            assert mm.segment_integrals(th, r, check=False).surplus >= -1e-12

    def test_node_doubling_warning_fires(self):
        # 9 nodes cannot resolve the benchmark segment: the doubled budget
        # disagrees and the public call must warn
        mm = model(nodes=9, abs_tol=1e-12)
        with pytest.warns(QuadratureWarning):
            mm.expected_wtp(0.0285, 0.8598)

    def test_no_warning_at_default_budget(self):
        mm = model()
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            mm.expected_wtp(0.0285, 0.8598)

    def test_batch_matches_pointwise(self):
        mm = model()
        thetas = np.array([0.01, 0.03, 0.1, 0.4])
        rs = np.array([0.5, 0.7, 0.8, 0.9])
        sw_batch, sp_batch = segment_integrals_batch(mm, thetas, rs, mm.quad.nodes)
        for j in range(len(thetas)):
            seg = mm.segment_integrals(float(thetas[j]), float(rs[j]), check=False)
            assert sw_batch[j] == pytest.approx(seg.welfare, abs=1e-12)
            assert sp_batch[j] == pytest.approx(seg.surplus, abs=1e-12)


class TestResiduals:
    def test_lerner_identity_form(self):
        mm = model()
        th, r = 0.05, 0.8
        eps = mm.elasticity(th, r)
        p = wtp(mm.prim, th, r)
        assert mm.lerner_residual(th, r) == pytest.approx(
            p * (1.0 + 1.0 / eps) - th * r, rel=1e-12
        )

    def test_nonzero_off_optimum(self):
        mm = model()
        th, r = 0.15, 0.8  # profitable but far from the optimum
        assert mm.avg_profit(th, r) > 0.0
        assert abs(mm.foc_residual_a(th, r)) > 1e-3
        assert abs(mm.foc_residual_b(th, r)) > 1e-3
        assert abs(mm.lerner_residual(th, r)) > 1e-5

    def test_division_guard(self):
        mm = model(rho=1e-9)  # никогда profitable: margins nonpositive
        with pytest.raises(DomainError):
            mm.foc_residual_a(0.3, 0.8)

    def test_foc_r_formula(self):
        mm = model()
        th, r = 0.05, 0.7
        direct = (
            wtp(mm.prim, th, r + 1e-7) - wtp(mm.prim, th, r - 1e-7)
        ) / 2e-7 - mm.measure.avg_damage(th)
        assert mm.foc_residual_r(th, r) == pytest.approx(direct, abs=1e-6)


class TestFirstBest:
    def test_uniform_closed_form(self):
        mm = model_ab(1.0, 1.0)
        assert mm.first_best_deficit(0.5, 1.0) == pytest.approx(-0.125, abs=1e-12)

    def test_always_deficit(self):
        rng = np.random.default_rng(55)
        for _ in range(30):
            mm = model(E=rng.uniform(0.05, 0.9), Z=rng.uniform(0.1, 0.98))
            th = rng.uniform(0.01, 0.99)
            r = rng.uniform(0.05, 1.0)
            assert mm.first_best_deficit(th, r) < 0.0

    def test_vanishes_toward_one(self):
        mm = model()
        vals = [mm.first_best_deficit(th, 0.8) for th in (0.9, 0.99, 0.999)]
        assert vals[0] < vals[1] < vals[2] < 0.0
