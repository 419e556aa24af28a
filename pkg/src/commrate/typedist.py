"""Beta risk-type distributions and their insurance calculus.

A measure over agent types theta in [0, 1] is a Beta(alpha, beta)
distribution, addressable either by its shape parameters or by the
(E, Z) coordinates

    E = alpha / (alpha + beta)      mean type, average claim rate of the
                                    whole population
    Z = beta / (beta + 1)           slope of the pool average at theta = 1

which map the unbounded parameter quadrant onto the open unit square.

The workhorse quantity is the pool average A(theta) = E[X | X >= theta]:
the expected claim rate of the insured segment [theta, 1].  Everything the
pricing layer needs derives from it: the mean residual m = A - theta, the
hazard rate H = f / (1 - F), the identity A' = H * m, and the second
derivative used by the convexity verifier.

Upper-tail quantities are computed in log space through the symmetry
I_{1-theta}(beta, alpha) = 1 - I_theta(alpha, beta), so nothing here
underflows even when 1 - F(theta) is far below the double-precision range.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import specfn
from .errors import DomainError
from .specfn import DEFAULT_TOL, ToleranceConfig

_EZ_CONSISTENCY_TOL = 1e-12
_REGION_TOL = 1e-12
_Z_CEILING = 1.0 - 1e-9


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise DomainError(
                f"Beta shape parameters must be positive, got "
                f"({self.alpha}, {self.beta})"
            )


@dataclass(frozen=True)
class EZPoint:
    E: float
    Z: float

    def __post_init__(self):
        if not (0.0 < self.E < 1.0 and 0.0 < self.Z < 1.0):
            raise DomainError(
                f"(E, Z) must lie in the open unit square, got "
                f"({self.E}, {self.Z})"
            )


def ez_from_ab(params: BetaParams) -> EZPoint:
    """Map (alpha, beta) to the unit-square coordinates (E, Z)."""
    a, b = params.alpha, params.beta
    return EZPoint(E=a / (a + b), Z=b / (b + 1.0))


def ab_from_ez(ez: EZPoint) -> BetaParams:
    """Invert the unit-square map.  Z >= 1 - 1e-9 is rejected: that corner
    degenerates toward a point mass and overflows beta."""
    if ez.Z >= _Z_CEILING:
        raise DomainError(
            f"Z must be below {_Z_CEILING} (degenerate toward a point mass), "
            f"got {ez.Z}"
        )
    alpha = ez.E * ez.Z / ((1.0 - ez.E) * (1.0 - ez.Z))
    beta = ez.Z / (1.0 - ez.Z)
    return BetaParams(alpha=alpha, beta=beta)


class RegionLabel(enum.Enum):
    """Shape classes partitioning the open EZ-square."""

    D = "D"                                  # decreasing density, pole at 0
    I = "I"                                  # increasing density, pole at 1  # noqa: E741
    U = "U"                                  # U-shaped, poles at both ends
    A = "A"                                  # single-peaked (arched)
    POWER_INCREASING = "PowerIncreasing"     # beta = 1, alpha > 1
    POWER_DECREASING = "PowerDecreasing"     # alpha = 1, beta > 1
    POLAR_POLE_0 = "PolarPole0"              # beta = 1, alpha < 1
    POLAR_POLE_1 = "PolarPole1"              # alpha = 1, beta < 1
    UNIFORM = "Uniform"                      # alpha = beta = 1


def classify_region(ez: EZPoint, tol: float = _REGION_TOL) -> RegionLabel:
    """Classify a point of the EZ-square by density shape.

    The square splits along the anti-diagonal Z = 1 - E (alpha = 1) and the
    horizontal Z = 1/2 (beta = 1); classification compares the implied
    (alpha, beta) against 1 within ``tol``, which is exact algebra rather
    than geometric predicates.
    """
    params = ab_from_ez(ez)
    a_eq = abs(params.alpha - 1.0) <= tol
    b_eq = abs(params.beta - 1.0) <= tol
    if a_eq and b_eq:
        return RegionLabel.UNIFORM
    if a_eq:
        return RegionLabel.POWER_DECREASING if params.beta > 1.0 else RegionLabel.POLAR_POLE_1
    if b_eq:
        return RegionLabel.POWER_INCREASING if params.alpha > 1.0 else RegionLabel.POLAR_POLE_0
    if params.alpha > 1.0:
        return RegionLabel.A if params.beta > 1.0 else RegionLabel.I
    return RegionLabel.D if params.beta > 1.0 else RegionLabel.U


def docking_slope(s: float) -> float:
    """Limit slope (s+1)/(s+2) of the pool average at theta = 1 for a
    density equivalent to a power function with exponent s > -1 there."""
    if not s > -1.0:
        raise DomainError(f"power exponent must exceed -1, got {s}")
    return (s + 1.0) / (s + 2.0)


def variance_ez(ez: EZPoint) -> float:
    """Variance of the type distribution in (E, Z) coordinates."""
    E, Z = ez.E, ez.Z
    return E * (1.0 - E) ** 2 * (1.0 - Z) / (1.0 - E * (1.0 - Z))


def coeff_variation(ez: EZPoint) -> float:
    """Coefficient of variation sqrt(V)/E."""
    return math.sqrt(variance_ez(ez)) / ez.E


@dataclass(frozen=True)
class TypeMeasure:
    """An immutable Beta type measure carrying both parameterizations.

    ``taylor_eps`` controls the near-1 branch of the pool average: for
    theta >= 1 - taylor_eps both tail integrals in A vanish, so A is
    evaluated by its first-order expansion A = 1 - Z (1 - theta) instead.
    """

    params: BetaParams
    ez: EZPoint
    taylor_eps: float = 1e-6
    tol: ToleranceConfig = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        derived = ez_from_ab(self.params)
        if (
            abs(derived.E - self.ez.E) > _EZ_CONSISTENCY_TOL
            or abs(derived.Z - self.ez.Z) > _EZ_CONSISTENCY_TOL
        ):
            raise DomainError(
                f"params {self.params} and ez {self.ez} disagree beyond "
                f"{_EZ_CONSISTENCY_TOL}"
            )
        if not 0.0 < self.taylor_eps < 1e-3:
            raise DomainError(
                f"taylor_eps must lie in (0, 1e-3), got {self.taylor_eps}"
            )

    @classmethod
    def from_ab(cls, alpha: float, beta: float, **kwargs) -> "TypeMeasure":
        params = BetaParams(alpha, beta)
        return cls(params=params, ez=ez_from_ab(params), **kwargs)

    @classmethod
    def from_ez(cls, E: float, Z: float, **kwargs) -> "TypeMeasure":
        ez = EZPoint(E, Z)
        return cls(params=ab_from_ez(ez), ez=ez, **kwargs)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def beta(self) -> float:
        return self.params.beta

    @property
    def E(self) -> float:
        return self.ez.E

    @property
    def Z(self) -> float:
        return self.ez.Z

    def _ln_beta(self) -> float:
        return specfn.log_beta(self.alpha, self.beta)

    # -- density / distribution -------------------------------------------

    def log_pdf(self, theta):
        """ln f(theta); -inf where f vanishes, +inf at a density pole."""
        a, b = self.alpha, self.beta
        lnb = self._ln_beta()
        if isinstance(theta, np.ndarray):
            theta = np.asarray(theta, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = (a - 1.0) * np.log(theta) + (b - 1.0) * np.log1p(-theta) - lnb
            # 0 * (-inf) at an endpoint whose exponent is exactly zero
            if a == 1.0:
                out = np.where(theta == 0.0, (b - 1.0) * np.log1p(-theta) - lnb, out)
            if b == 1.0:
                out = np.where(theta == 1.0, -lnb, out)
            return out
        if theta == 0.0:
            if a < 1.0:
                return math.inf
            return -lnb if a == 1.0 else -math.inf
        if theta == 1.0:
            if b < 1.0:
                return math.inf
            return -lnb if b == 1.0 else -math.inf
        return (a - 1.0) * math.log(theta) + (b - 1.0) * math.log1p(-theta) - lnb

    def pdf(self, theta):
        """Density f(theta).  Raises at an endpoint where f diverges."""
        a, b = self.alpha, self.beta
        if isinstance(theta, np.ndarray):
            if (a < 1.0 and np.any(theta == 0.0)) or (b < 1.0 and np.any(theta == 1.0)):
                raise DomainError("density has a pole at the requested endpoint")
            return np.exp(self.log_pdf(theta))
        if (theta == 0.0 and a < 1.0) or (theta == 1.0 and b < 1.0):
            raise DomainError(
                f"density of Beta({a}, {b}) diverges at theta={theta}"
            )
        if not 0.0 <= theta <= 1.0:
            raise DomainError(f"theta must lie in [0, 1], got {theta}")
        return math.exp(self.log_pdf(theta))

    def cdf(self, theta):
        """F(theta) = I_theta(alpha, beta)."""
        return specfn.reg_inc_beta(theta, self.alpha, self.beta, self.tol)

    def survival(self, theta):
        """1 - F(theta), computed as I_{1-theta}(beta, alpha) to avoid
        cancellation in the upper tail."""
        one_minus = 1.0 - theta if not isinstance(theta, np.ndarray) else 1.0 - theta
        return specfn.reg_inc_beta(one_minus, self.beta, self.alpha, self.tol)

    def log_survival(self, theta):
        """ln(1 - F(theta)), finite deep into the upper tail."""
        one_minus = 1.0 - theta if not isinstance(theta, np.ndarray) else 1.0 - theta
        return specfn.log_reg_inc_beta(one_minus, self.beta, self.alpha, self.tol)

    def quantile(self, u):
        """F^{-1}(u); inverse of the cdf."""
        if isinstance(u, np.ndarray):
            seed = self._quantile_seed(u)
            return specfn.inv_reg_inc_beta_seeded(u, self.alpha, self.beta, seed, self.tol)
        return specfn.inv_reg_inc_beta(u, self.alpha, self.beta, self.tol)

    # A tabulated (x, F(x)) grid seeds vectorized quantile solves.  Chebyshev
    # spacing clusters the table at both endpoints where F moves fastest.
    _N_TABLE = 512

    def _quantile_table(self):
        cache = getattr(self, "_qtab", None)
        if cache is None:
            k = np.arange(self._N_TABLE + 1, dtype=float)
            x = 0.5 * (1.0 - np.cos(math.pi * k / self._N_TABLE))
            u = specfn.reg_inc_beta(x, self.alpha, self.beta, self.tol)
            u[0], u[-1] = 0.0, 1.0
            object.__setattr__(self, "_qtab", (x, u))
            cache = (x, u)
        return cache

    def _quantile_seed(self, u: np.ndarray) -> np.ndarray:
        x_tab, u_tab = self._quantile_table()
        return np.interp(np.asarray(u, dtype=float), u_tab, x_tab)

    def _grid_stats(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(theta grid, A, Q) on linspace(0, 1, n), cached per measure.
        Solvers seed from this grid for every candidate indemnity."""
        cache = getattr(self, "_gstats", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_gstats", cache)
        if n not in cache:
            thetas = np.linspace(0.0, 1.0, n)
            cache[n] = (thetas, self.avg_damage(thetas), self.survival(thetas))
        return cache[n]

    # -- pool average and its calculus -------------------------------------

    def _log_upper_moment(self, shift: int, theta):
        """ln of the upper-tail weight of x^shift: ln I_{1-theta}(beta,
        alpha+shift), the unnormalized part of E[X^shift 1{X>=theta}]."""
        one_minus = 1.0 - theta
        return specfn.log_reg_inc_beta(one_minus, self.beta, self.alpha + shift, self.tol)

    def pool_stats(self, theta, derivs: bool = False):
        """Fused (Q, A) or (Q, A, H, f) sharing the upper-tail evaluations.

        The survival function, pool average, hazard, and density all hang
        off the same two incomplete-beta calls; solvers in the hot path use
        this instead of the one-quantity accessors.  Scalar or array theta.
        """
        scalar = not isinstance(theta, np.ndarray)
        log_q = self._log_upper_moment(0, theta)
        if scalar:
            Q = math.exp(log_q)
            if theta >= 1.0 - self.taylor_eps:
                A = 1.0 - self.Z * (1.0 - theta)
            else:
                A = self.E * math.exp(self._log_upper_moment(1, theta) - log_q)
            if not derivs:
                return Q, A
            log_f = self.log_pdf(theta)
            f = math.exp(log_f)
            H = math.exp(log_f - log_q) if log_q > -math.inf else math.inf
            return Q, A, H, f
        theta = np.asarray(theta, dtype=float)
        with np.errstate(invalid="ignore"):
            Q = np.exp(log_q)
            near1 = theta >= 1.0 - self.taylor_eps
            A = np.where(
                near1,
                1.0 - self.Z * (1.0 - theta),
                self.E * np.exp(self._log_upper_moment(1, np.where(near1, 0.5, theta)) - log_q),
            )
            if not derivs:
                return Q, A
            log_f = self.log_pdf(theta)
            f = np.exp(log_f)
            H = np.exp(log_f - log_q)
        if np.any(theta == 1.0):
            H = np.where(theta == 1.0, np.inf, H)
        return Q, A, H, f

    def avg_damage(self, theta):
        """Pool average A(theta) = E[X | X >= theta], extended with
        A(1) = 1.  Total on [0, 1]; scalar or array."""
        if isinstance(theta, np.ndarray):
            theta = np.asarray(theta, dtype=float)
            if np.any((theta < 0.0) | (theta > 1.0)):
                raise DomainError("theta must lie in [0, 1]")
            out = np.empty_like(theta)
            near1 = theta >= 1.0 - self.taylor_eps
            out[near1] = 1.0 - self.Z * (1.0 - theta[near1])
            body = ~near1
            if np.any(body):
                ts = theta[body]
                out[body] = self.E * np.exp(
                    self._log_upper_moment(1, ts) - self._log_upper_moment(0, ts)
                )
            return out
        if not 0.0 <= theta <= 1.0:
            raise DomainError(f"theta must lie in [0, 1], got {theta}")
        if theta >= 1.0 - self.taylor_eps:
            return 1.0 - self.Z * (1.0 - theta)
        return self.E * math.exp(
            self._log_upper_moment(1, theta) - self._log_upper_moment(0, theta)
        )

    def mean_residual(self, theta):
        """m(theta) = A(theta) - theta; positive on [0, 1)."""
        return self.avg_damage(theta) - theta

    def hazard(self, theta):
        """H(theta) = f(theta)/(1 - F(theta)); +inf at theta = 1."""
        if isinstance(theta, np.ndarray):
            theta = np.asarray(theta, dtype=float)
            with np.errstate(invalid="ignore"):
                out = np.exp(self.log_pdf(theta) - self.log_survival(theta))
            if np.any(theta == 1.0):
                out = np.where(theta == 1.0, np.inf, out)
            if np.any(theta == 0.0):
                h0 = math.inf if self.alpha < 1.0 else self.pdf(0.0)
                out = np.where(theta == 0.0, h0, out)
            return out
        if theta == 1.0:
            return math.inf
        if theta == 0.0:
            return math.inf if self.alpha < 1.0 else self.pdf(0.0)
        return math.exp(self.log_pdf(theta) - self.log_survival(theta))

    def avg_damage_deriv(self, theta):
        """A'(theta) = H(theta) m(theta) on (0, 1); A'(1) = Z.

        At theta = 0 the one-sided derivative is 0 for alpha > 1, Z for
        alpha = 1 (A is linear there), and +inf for alpha < 1 (vertical
        tangent), returned as the tagged value math.inf.
        """
        if isinstance(theta, np.ndarray):
            out = self.hazard(theta) * self.mean_residual(theta)
            out = np.where(theta == 1.0, self.Z, out)
            if np.any(theta == 0.0):
                at0 = self._deriv_at_zero()
                out = np.where(theta == 0.0, at0, out)
            return out
        if theta == 1.0:
            return self.Z
        if theta == 0.0:
            return self._deriv_at_zero()
        if not 0.0 < theta < 1.0:
            raise DomainError(f"theta must lie in [0, 1], got {theta}")
        return self.hazard(theta) * self.mean_residual(theta)

    def _deriv_at_zero(self) -> float:
        if self.alpha > 1.0:
            return 0.0
        if self.alpha == 1.0:
            return self.Z
        return math.inf

    # series switch: the analytic A'' loses ~(beta (1-theta))^-2 * 1e-13 to
    # cancellation near 1, the tail series loses ~((alpha+3)(1-theta))^4;
    # this cutoff keeps whichever error is smaller well below either value
    _SERIES_CUT = 0.15

    def _a2_series_coeffs(self) -> tuple[float, float, float]:
        """Tail-expansion coefficients of the pool average at theta = 1.

        Conditional on X >= 1-h, the scaled distance T = (1-X)/h has density
        proportional to t^{beta-1} (1 - h t)^{alpha-1}; expanding the second
        factor gives E[T] = M(h) = Z + m1 h + m2 h^2 + m3 h^3 + O(h^4) and
        A(1-h) = 1 - h M(h), hence A'' = -2 m1 - 6 m2 h - 12 m3 h^2 + O(h^3).
        All coefficients carry a factor (alpha - 1): the alpha = 1 family is
        exactly linear.
        """
        cache = getattr(self, "_a2ser", None)
        if cache is not None:
            return cache
        a, b, Z = self.alpha, self.beta, self.Z
        c1 = a - 1.0
        c2 = c1 * (a - 2.0) / 2.0
        c3 = c2 * (a - 3.0) / 3.0
        n1, d1 = -c1 / (b + 2.0), -c1 / (b + 1.0)
        n2, d2 = c2 / (b + 3.0), c2 / (b + 2.0)
        n3, d3 = -c3 / (b + 4.0), -c3 / (b + 3.0)
        m1 = b * (n1 - Z * d1)
        m2 = b * (n2 - Z * d2 - m1 * d1)
        m3 = b * (n3 - Z * d3 - m1 * d2 - m2 * d1)
        coeffs = (m1, m2, m3)
        object.__setattr__(self, "_a2ser", coeffs)
        return coeffs

    def avg_damage_second_deriv(self, theta):
        """A''(theta) on the open interval.

        Away from 1 this is the analytic identity

            A'' = H' m + H m',   H' = H (f'/f + H),   m' = A' - 1,

        with f'/f = (alpha-1)/theta - (beta-1)/(1-theta).  Near 1 those
        terms cancel almost completely, so the tail series takes over.
        The alpha = 1 family is exactly linear and returns 0.
        """
        a, b = self.alpha, self.beta
        if isinstance(theta, np.ndarray):
            theta = np.asarray(theta, dtype=float)
            if np.any((theta <= 0.0) | (theta >= 1.0)):
                raise DomainError("theta must lie in (0, 1)")
            if a == 1.0:
                return np.zeros_like(theta)
            h = 1.0 - theta
            series = (max(a - 1.0, 0.0) + 3.0) * h <= self._SERIES_CUT
            out = np.empty_like(theta)
            if np.any(series):
                m1, m2, m3 = self._a2_series_coeffs()
                hs = h[series]
                out[series] = -2.0 * m1 - 6.0 * m2 * hs - 12.0 * m3 * hs * hs
            body = ~series
            if np.any(body):
                out[body] = self._a2_analytic(theta[body])
            return out
        if not 0.0 < theta < 1.0:
            raise DomainError(f"theta must lie in (0, 1), got {theta}")
        if a == 1.0:
            return 0.0
        h = 1.0 - theta
        if (max(a - 1.0, 0.0) + 3.0) * h <= self._SERIES_CUT:
            m1, m2, m3 = self._a2_series_coeffs()
            return -2.0 * m1 - 6.0 * m2 * h - 12.0 * m3 * h * h
        return self._a2_analytic(theta)

    def _a2_analytic(self, theta):
        a, b = self.alpha, self.beta
        H = self.hazard(theta)
        m = self.mean_residual(theta)
        dlogf = (a - 1.0) / theta - (b - 1.0) / (1.0 - theta)
        a_prime = H * m
        return H * ((dlogf + H) * m + a_prime - 1.0)

    # -- conditional moments ------------------------------------------------

    def cond_mean_sd(self, theta) -> tuple[float, float]:
        """Mean and standard deviation of the type conditional on
        X >= theta (the insured pool when the cutoff is theta)."""
        if isinstance(theta, np.ndarray):
            raise DomainError("cond_mean_sd takes a scalar cutoff")
        if not 0.0 <= theta < 1.0:
            raise DomainError(f"theta must lie in [0, 1), got {theta}")
        a, b = self.alpha, self.beta
        mean = self.avg_damage(theta)
        if theta >= 1.0 - self.taylor_eps:
            # (1 - X)/(1-theta) tends to a Beta(beta, 1) on the stub interval
            h = 1.0 - theta
            var_t = b / (b + 2.0) - (b / (b + 1.0)) ** 2
            return mean, h * math.sqrt(max(var_t, 0.0))
        second = (
            self.E
            * (a + 1.0)
            / (a + b + 1.0)
            * math.exp(self._log_upper_moment(2, theta) - self._log_upper_moment(0, theta))
        )
        return mean, math.sqrt(max(second - mean * mean, 0.0))


@dataclass(frozen=True)
class ConvexityReport:
    """Grid evidence for convexity of the pool average.

    ``passed`` means every requested measure kept its minimum second
    derivative above ``threshold`` on the theta grid.  This is numerical
    evidence at the stated resolution, not a proof.
    """

    points: tuple[EZPoint, ...]
    min_second_deriv: tuple[float, ...]
    threshold: float
    theta_count: int

    @property
    def passed(self) -> bool:
        return all(v >= self.threshold for v in self.min_second_deriv)

    @property
    def overall_min(self) -> float:
        return min(self.min_second_deriv)


def default_theta_grid(n: int = 512) -> np.ndarray:
    """Midpoint grid of (0, 1) used by the convexity verifier."""
    k = np.arange(n, dtype=float)
    return (2.0 * k + 1.0) / (2.0 * n)


def verify_convexity(
    ez_grid,
    theta_grid=None,
    threshold: float = -1e-9,
    tolerance: float = _REGION_TOL,
) -> ConvexityReport:
    """Minimum of A'' over a theta grid for each measure with alpha >= 1.

    Measures with alpha < 1 (Z < 1 - E beyond ``tolerance``) are rejected:
    the claim under test concerns the alpha >= 1 half of the square only.
    """
    if theta_grid is None:
        theta_grid = default_theta_grid()
    theta_grid = np.asarray(theta_grid, dtype=float)
    points = tuple(ez_grid)
    mins = []
    for ez in points:
        params = ab_from_ez(ez)
        if params.alpha < 1.0 - tolerance:
            raise DomainError(
                f"convexity check requires alpha >= 1; (E={ez.E}, Z={ez.Z}) "
                f"gives alpha={params.alpha}"
            )
        measure = TypeMeasure(params=params, ez=ez)
        mins.append(float(np.min(measure.avg_damage_second_deriv(theta_grid))))
    return ConvexityReport(
        points=points,
        min_second_deriv=tuple(mins),
        threshold=threshold,
        theta_count=len(theta_grid),
    )
