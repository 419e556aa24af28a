"""Economic functionals over a (type measure, preferences) pair.

Costs, profit, elasticity, surplus, welfare, the first-order-condition
residuals, and the marginal-cost-pricing deficit.  Everything is pure given
an immutable MarketModel; grid evaluation across theta or r is the intended
hot path, so the theta argument of the cost/profit functions may be an
ndarray.

Integrals against the type measure are evaluated in CDF space: substituting
u = F(x) turns  int_theta^1 g(x) f(x) dx  into  int_{F(theta)}^1 g(F^{-1}(u)) du,
which removes the density poles of alpha < 1 / beta < 1 measures.  The
quantile itself still has algebraic endpoint behavior (x ~ 1 - c (1-u)^{1/beta}
near u = 1, and the mirror image at u = 0), so the fixed node budget is laid
out as one large central Gauss-Legendre panel plus short geometrically graded
panels at both ends.  The budget is a deterministic function of the node
count alone, and a doubled-budget evaluation cross-checks every public
integral call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import preference, specfn
from .errors import DomainError, QuadratureWarning
from .preference import MarketPrimitives
from .typedist import TypeMeasure

_PANEL_RATIO = 0.1


@dataclass(frozen=True)
class QuadratureSpec:
    """Fixed node budget and disagreement tolerance for segment integrals."""

    nodes: int = 129
    abs_tol: float = 1e-10

    def __post_init__(self):
        if self.nodes < 9 or self.nodes % 2 == 0:
            raise DomainError(f"nodes must be odd and >= 9, got {self.nodes}")
        if not self.abs_tol > 0.0:
            raise DomainError(f"abs_tol must be positive, got {self.abs_tol}")


_gl_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    if m not in _gl_cache:
        _gl_cache[m] = np.polynomial.legendre.leggauss(m)
    return _gl_cache[m]


_unit_rule_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _unit_rule(n_total: int) -> tuple[np.ndarray, np.ndarray]:
    """Node/weight rule on [0, 1]: central Gauss-Legendre panel flanked by
    geometric panels (ratio 0.1) at both endpoints.  Affine-mapped onto
    [F(theta), 1] by callers.  Total node count is exactly ``n_total``."""
    if n_total in _unit_rule_cache:
        return _unit_rule_cache[n_total]
    if n_total >= 100:
        k_panels, m_tail = 5, 8
    elif n_total >= 56:
        k_panels, m_tail = 4, 5
    else:
        k_panels, m_tail = 0, 0
    sig = _PANEL_RATIO
    left = [sig**k for k in range(k_panels, 0, -1)]
    right = [1.0 - sig**k for k in range(1, k_panels + 1)]
    bps = [0.0] + left + right + [1.0]
    m_central = n_total - 2 * k_panels * m_tail
    nodes, weights = [], []
    central_idx = k_panels  # the [sig, 1-sig] stretch
    for i, (lo, hi) in enumerate(zip(bps[:-1], bps[1:])):
        m = m_central if i == central_idx else m_tail
        t, w = _gauss_legendre(m)
        nodes.append(lo + 0.5 * (t + 1.0) * (hi - lo))
        weights.append(0.5 * w * (hi - lo))
    rule = (np.concatenate(nodes), np.concatenate(weights))
    _unit_rule_cache[n_total] = rule
    return rule


@dataclass(frozen=True)
class SegmentIntegrals:
    """Expected willingness-to-pay, surplus, and welfare over [theta, 1],
    sharing one set of quadrature nodes so the welfare decomposition
    sw = profit + sp holds to rounding."""

    expected_wtp: float
    surplus: float
    welfare: float
    take_up: float


@dataclass(frozen=True)
class MarketModel:
    measure: TypeMeasure
    prim: MarketPrimitives
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    # -- cost side ----------------------------------------------------------

    def total_cost(self, theta, r: float):
        """Expected claims cost of segment [theta, 1]: r A(theta) Q(theta)."""
        self._check(theta, r)
        return r * self.measure.avg_damage(theta) * self.measure.survival(theta)

    def avg_cost(self, theta, r: float):
        """Cost per contract sold: r A(theta)."""
        self._check(theta, r)
        return r * self.measure.avg_damage(theta)

    @staticmethod
    def marginal_cost(theta, r: float):
        """Cost of the marginal contract: theta r."""
        return theta * r

    # -- profit side ----------------------------------------------------------

    def avg_profit(self, theta, r: float):
        """Per-contract margin: wtp(theta, r) - r A(theta)."""
        self._check(theta, r)
        return preference.wtp(self.prim, theta, r) - r * self.measure.avg_damage(theta)

    def profit(self, theta, r: float):
        """Total profit: [wtp - r A] Q.  Zero at theta = 1."""
        return self.avg_profit(theta, r) * self.measure.survival(theta)

    def elasticity(self, theta: float, r: float) -> float:
        """Demand elasticity at the cutoff: -H(theta) wtp / (d wtp/d theta).
        Defined on the open interval with a positive premium."""
        if not 0.0 < theta < 1.0:
            raise DomainError(f"elasticity requires theta in (0, 1), got {theta}")
        if not 0.0 < r <= self.prim.loss + 1e-15:
            raise DomainError(f"elasticity requires r in (0, loss], got {r}")
        p = preference.wtp(self.prim, theta, r)
        if not p > 0.0:
            raise DomainError("elasticity requires a positive premium")
        return -self.measure.hazard(theta) * p / preference.wtp_dtheta(self.prim, theta, r)

    # -- segment integrals ---------------------------------------------------

    def _segment_core(
        self, theta: float, r: float, n: int, x_seed: np.ndarray | None = None
    ) -> tuple[SegmentIntegrals, np.ndarray | None]:
        """One quadrature pass; also returns the solved quantile nodes so a
        caller stepping through nearby segments can warm-start the next."""
        measure, prim = self.measure, self.prim
        u_lo = measure.cdf(theta)
        take_up = 1.0 - u_lo
        if take_up <= 0.0:
            return SegmentIntegrals(0.0, 0.0, 0.0, 0.0), None
        s, w = _unit_rule(n)
        u = u_lo + take_up * s
        seeds = x_seed if x_seed is not None else measure._quantile_seed(u)
        x = specfn.inv_reg_inc_beta_seeded(u, measure.alpha, measure.beta, seeds, measure.tol)
        pbar = preference.wtp(prim, x, r)
        ew = take_up * float(np.dot(w, pbar))
        p_theta = preference.wtp(prim, theta, r)
        sp = take_up * float(np.dot(w, pbar - p_theta))
        sw = ew - r * measure.avg_damage(theta) * take_up
        return SegmentIntegrals(expected_wtp=ew, surplus=sp, welfare=sw, take_up=take_up), x

    def segment_integrals(self, theta: float, r: float, check: bool = True) -> SegmentIntegrals:
        """All segment integrals at once.  With ``check`` the integral is
        recomputed at budget 2n+1 and a QuadratureWarning is issued when the
        two disagree beyond 10 * abs_tol (the n-budget value is returned
        either way)."""
        self._check(theta, r)
        if isinstance(theta, np.ndarray):
            raise DomainError("segment integrals take a scalar theta")
        if theta >= 1.0:
            return SegmentIntegrals(0.0, 0.0, 0.0, 0.0)
        base, _ = self._segment_core(theta, r, self.quad.nodes)
        if check:
            double, _ = self._segment_core(theta, r, 2 * self.quad.nodes + 1)
            if abs(double.expected_wtp - base.expected_wtp) > 10.0 * self.quad.abs_tol:
                warnings.warn(
                    f"segment quadrature at budgets {self.quad.nodes} and "
                    f"{2 * self.quad.nodes + 1} disagree by "
                    f"{abs(double.expected_wtp - base.expected_wtp):.3e} "
                    f"(> {10.0 * self.quad.abs_tol:.1e}) at theta={theta}, r={r}",
                    QuadratureWarning,
                )
        return base

    def expected_wtp(self, theta: float, r: float) -> float:
        """int_theta^1 wtp(x, r) dmu(x) via CDF-space quadrature."""
        return self.segment_integrals(theta, r).expected_wtp

    def surplus(self, theta: float, r: float) -> float:
        """Policyholder surplus: expected wtp minus premium revenue.
        Non-negative by pointwise monotonicity of wtp in theta."""
        return self.segment_integrals(theta, r).surplus

    def welfare(self, theta: float, r: float) -> float:
        """Social welfare: expected wtp minus expected claims cost.
        Equals profit + surplus to rounding."""
        return self.segment_integrals(theta, r).welfare

    # -- optimality residuals --------------------------------------------------

    def lerner_residual(self, theta: float, r: float) -> float:
        """wtp (1 + 1/eps) - theta r; zero at an optimal cutoff."""
        eps = self.elasticity(theta, r)
        return preference.wtp(self.prim, theta, r) * (1.0 + 1.0 / eps) - theta * r

    def foc_residual_a(self, theta: float, r: float) -> float:
        """(d wtp/d theta - r A') / (wtp - r A) - H; zero at an optimal
        profitable cutoff.  Requires a positive per-contract margin."""
        margin = self.avg_profit(theta, r)
        if margin <= 0.0:
            raise DomainError(
                f"average profit must be positive for this residual form, "
                f"got {margin} at theta={theta}, r={r}"
            )
        num = preference.wtp_dtheta(self.prim, theta, r) - r * self.measure.avg_damage_deriv(theta)
        return num / margin - self.measure.hazard(theta)

    def foc_residual_b(self, theta: float, r: float) -> float:
        """(d wtp/d theta) / (wtp - theta r) - H; algebraically the same root
        as the ``a`` form."""
        markup = preference.wtp(self.prim, theta, r) - theta * r
        if markup <= 0.0:
            raise DomainError(
                f"wtp must exceed marginal cost for this residual form, "
                f"got markup {markup} at theta={theta}, r={r}"
            )
        return preference.wtp_dtheta(self.prim, theta, r) / markup - self.measure.hazard(theta)

    def foc_residual_r(self, theta: float, r: float) -> float:
        """d wtp/d r - A(theta); zero at an interior optimal indemnity."""
        self._check(theta, r)
        return preference.wtp_dr(self.prim, theta, r) - self.measure.avg_damage(theta)

    def first_best_deficit(self, theta: float, r: float) -> float:
        """Profit under marginal-cost pricing: -r m(theta) Q(theta) < 0.
        Marginal-cost pricing always runs a deficit here (natural monopoly)."""
        if isinstance(theta, np.ndarray):
            if np.any((theta <= 0.0) | (theta >= 1.0)):
                raise DomainError("theta must lie in (0, 1)")
        elif not 0.0 < theta < 1.0:
            raise DomainError(f"theta must lie in (0, 1), got {theta}")
        if not 0.0 < r <= self.prim.loss + 1e-15:
            raise DomainError(f"r must lie in (0, loss], got {r}")
        return -r * self.measure.mean_residual(theta) * self.measure.survival(theta)

    def _check(self, theta, r: float) -> None:
        if isinstance(theta, np.ndarray):
            if np.any((theta < 0.0) | (theta > 1.0)):
                raise DomainError("theta must lie in [0, 1]")
        elif not 0.0 <= theta <= 1.0:
            raise DomainError(f"theta must lie in [0, 1], got {theta}")
        if not 0.0 <= r <= self.prim.loss + 1e-15:
            raise DomainError(f"r must lie in [0, loss={self.prim.loss}], got {r}")


def segment_integrals_batch(
    mm: MarketModel, thetas: np.ndarray, rs: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Welfare and surplus at paired (theta_j, r_j), one quadrature batch.

    The unit rule is affine-invariant, so all segments share the same
    relative nodes; quantiles for the whole node-by-segment matrix are
    solved in one seeded Newton sweep.  Used by the regulated outer search.
    """
    measure, prim = mm.measure, mm.prim
    thetas = np.asarray(thetas, dtype=float)
    rs = np.asarray(rs, dtype=float)
    s, w = _unit_rule(n)
    u_lo = measure.cdf(thetas)
    take_up = 1.0 - u_lo
    u = u_lo[None, :] + take_up[None, :] * s[:, None]
    seeds = measure._quantile_seed(u)
    x = specfn.inv_reg_inc_beta_seeded(u, measure.alpha, measure.beta, seeds, measure.tol)
    welfare = np.empty_like(thetas)
    surplus = np.empty_like(thetas)
    A = measure.avg_damage(thetas)
    for j in range(len(thetas)):
        pbar = preference.wtp(prim, x[:, j], float(rs[j]))
        ew = take_up[j] * float(np.dot(w, pbar))
        p_theta = preference.wtp(prim, float(thetas[j]), float(rs[j]))
        surplus[j] = take_up[j] * float(np.dot(w, pbar - p_theta))
        welfare[j] = ew - rs[j] * A[j] * take_up[j]
    return welfare, surplus
