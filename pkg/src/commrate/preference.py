"""CARA preferences in nondimensional form.

Wealth is measured in units of initial wealth, so the environment reduces to
two dimensionless parameters: the relative risk aversion ``rho`` and the
loss ``loss`` in (0, 1].  The utility is normalized so u(0) = 0, u(1) = 1.

Willingness-to-pay for a contract with cutoff type ``theta`` and indemnity
``r`` is

    wtp = (1/rho) * ln[(theta e^{rho l} + 1-theta) /
                       (theta e^{rho (l-r)} + 1-theta)]

evaluated throughout via expm1/log1p identities that only ever exponentiate
non-positive arguments, so no rho is too large to handle.  Below RHO_NEUTRAL
the risk-neutral closed forms (wtp = theta r, and its derivatives) are used
instead; at that scale the exact formulas agree with them to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .typedist import TypeMeasure

# below this, agents are treated as risk-neutral (wtp = theta * r)
RHO_NEUTRAL = 1e-8


@dataclass(frozen=True)
class MarketPrimitives:
    """Dimensionless market environment: risk aversion and loss size."""

    rho: float
    loss: float = 1.0

    def __post_init__(self):
        if not self.rho > 0.0:
            raise DomainError(f"rho must be positive, got {self.rho}")
        if not 0.0 < self.loss <= 1.0:
            raise DomainError(f"loss must lie in (0, 1], got {self.loss}")


@dataclass(frozen=True)
class ContractQuote:
    """A cutoff type, an indemnity, and the implied premium.

    Admissible quotes have premium <= r: the premium reaches r only in the
    theta = 1 limit where a single sure-loss agent buys.
    """

    theta: float
    r: float
    premium: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError(f"theta must lie in [0, 1], got {self.theta}")
        if not 0.0 <= self.premium <= self.r + 1e-12:
            raise DomainError(
                f"need 0 <= premium <= r, got premium={self.premium}, r={self.r}"
            )

    @classmethod
    def at_reservation(cls, prim: MarketPrimitives, theta: float, r: float) -> "ContractQuote":
        """Quote priced at the cutoff agent's willingness-to-pay."""
        return cls(theta=theta, r=r, premium=wtp(prim, theta, r))


def _check_theta_r(prim: MarketPrimitives, theta, r: float) -> None:
    if isinstance(theta, np.ndarray):
        if np.any((theta < 0.0) | (theta > 1.0)):
            raise DomainError("theta must lie in [0, 1]")
    elif not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta}")
    if not 0.0 <= r <= prim.loss + 1e-15:
        raise DomainError(f"r must lie in [0, loss={prim.loss}], got {r}")


def utility(prim: MarketPrimitives, w):
    """Normalized CARA utility u(w) = (1 - e^{-rho w}) / (1 - e^{-rho})."""
    if isinstance(w, np.ndarray):
        if np.any(w < 0.0):
            raise DomainError("wealth must be non-negative")
        return np.expm1(-prim.rho * w) / math.expm1(-prim.rho)
    if w < 0.0:
        raise DomainError(f"wealth must be non-negative, got {w}")
    return math.expm1(-prim.rho * w) / math.expm1(-prim.rho)


def _ln_mix(theta, x: float):
    """ln(theta + (1-theta) e^{-x}) for x >= 0, scalar or array theta.

    Small exponents go through log1p of an exactly-representable increment;
    large ones sum two non-negative terms, so no branch ever cancels.  The
    theta = 0 endpoint survives arbitrarily large x.
    """
    if isinstance(theta, np.ndarray):
        if x <= 0.7:
            return np.log1p((1.0 - theta) * np.expm1(-x))
        s = theta + (1.0 - theta) * math.exp(-x)
        with np.errstate(divide="ignore"):
            out = np.log(s)
        return np.where(s > 0.0, out, -x)
    if x <= 0.7:
        return math.log1p((1.0 - theta) * math.expm1(-x))
    s = theta + (1.0 - theta) * math.exp(-x)
    return math.log(s) if s > 0.0 else -x


def _mix_ratio(theta, x: float):
    """expm1(-x) / (theta + (1-theta) e^{-x}) for x >= 0; the building block
    of the wtp partial in theta.  Tends to -e^x / (theta e^x + 1) with no
    cancellation; overflows to -inf only when the true value does."""
    if isinstance(theta, np.ndarray):
        num = np.expm1(-x)
        s = theta + (1.0 - theta) * math.exp(-x)
        with np.errstate(divide="ignore"):
            return np.where(s > 0.0, num / s, -np.inf)
    num = math.expm1(-x)
    s = theta + (1.0 - theta) * math.exp(-x)
    if s > 0.0:
        return num / s
    return -math.inf


def wtp(prim: MarketPrimitives, theta, r: float):
    """Willingness-to-pay of agent theta for indemnity r.  Scalar or array
    in theta."""
    _check_theta_r(prim, theta, r)
    rho, l = prim.rho, prim.loss
    if rho < RHO_NEUTRAL:
        return theta * r
    return r + (_ln_mix(theta, rho * l) - _ln_mix(theta, rho * (l - r))) / rho


def wtp_dtheta(prim: MarketPrimitives, theta, r: float):
    """Analytic partial of wtp in theta; positive on (0, 1) for r > 0."""
    _check_theta_r(prim, theta, r)
    rho, l = prim.rho, prim.loss
    if rho < RHO_NEUTRAL:
        return r if not isinstance(theta, np.ndarray) else np.full_like(theta, r)
    return (_mix_ratio(theta, rho * (l - r)) - _mix_ratio(theta, rho * l)) / rho


def wtp_dr(prim: MarketPrimitives, theta, r: float):
    """Analytic partial of wtp in r."""
    _check_theta_r(prim, theta, r)
    rho, l = prim.rho, prim.loss
    if rho < RHO_NEUTRAL:
        return theta if not isinstance(theta, np.ndarray) else np.asarray(theta, dtype=float)
    if isinstance(theta, np.ndarray):
        return theta / (theta + (1.0 - theta) * np.exp(-rho * (l - r)))
    return theta / (theta + (1.0 - theta) * math.exp(-rho * (l - r)))


def participation_gap(prim: MarketPrimitives, theta: float, premium: float, r: float) -> float:
    """Expected-utility gain from buying the contract (premium, r).

    Positive means agent theta buys.  Vanishes at premium = wtp(theta, r).
    """
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta}")
    if not 0.0 <= r <= prim.loss + 1e-15:
        raise DomainError(f"r must lie in [0, loss], got {r}")
    l = prim.loss
    w_damage = 1.0 - l - premium + r
    w_safe = 1.0 - premium
    if w_damage < 0.0 or w_safe < 0.0:
        raise DomainError(
            f"premium={premium}, r={r} drive wealth negative "
            f"(damage-state wealth {w_damage}, safe-state wealth {w_safe})"
        )
    return (
        theta * utility(prim, w_damage)
        + (1.0 - theta) * utility(prim, w_safe)
        - theta * utility(prim, 1.0 - l)
        - (1.0 - theta) * utility(prim, 1.0)
    )


def _ln_expm1(x: float) -> float:
    """ln(e^x - 1) for x > 0 without overflow."""
    if x > 36.0:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


def critical_theta(prim: MarketPrimitives, premium: float, r: float) -> float:
    """The indifferent type for an admissible contract (premium < r):
    agents above it buy.  Satisfies wtp(theta, r) = premium."""
    if not 0.0 < premium < r or r > prim.loss + 1e-15:
        raise DomainError(
            f"admissible contracts need 0 < premium < r <= loss, got "
            f"premium={premium}, r={r}, loss={prim.loss}"
        )
    rho, l = prim.rho, prim.loss
    if rho < RHO_NEUTRAL:
        return premium / r
    # ratio of utility gaps, computed in log space to survive large rho:
    # theta = t1 / (t1 + t2) with
    #   t1 = e^{-rho} (e^{rho p} - 1),  t2 = e^{-rho(1-l)} (1 - e^{-rho(r-p)})
    log_t1 = -rho + _ln_expm1(rho * premium)
    log_t2 = -rho * (1.0 - l) + math.log(-math.expm1(-rho * (r - premium)))
    delta = log_t2 - log_t1
    if delta > 36.0:
        # clamp to the smallest positive float when the root underflows
        return max(math.exp(-delta), 5e-324)
    if delta < -36.0:
        return 1.0 - math.exp(delta)
    return 1.0 / (1.0 + math.exp(delta))


def profitability_margin(prim: MarketPrimitives, measure: TypeMeasure, r: float) -> float:
    """r A'(1) - d wtp/d theta at theta = 1.

    Positive means a left-neighborhood of theta = 1 is profitable, so a
    profitable contract with indemnity r exists.  A'(1) = Z for a Beta
    measure; the wtp partial is the analytic derivative, which at theta = 1
    equals e^{-rho(l-r)} (1 - e^{-rho r}) / rho.
    """
    if not 0.0 < r <= prim.loss + 1e-15:
        raise DomainError(f"r must lie in (0, loss], got {r}")
    return r * measure.Z - wtp_dtheta(prim, 1.0, r)
