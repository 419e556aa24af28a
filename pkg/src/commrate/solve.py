"""Optimization pipelines for the two contract regimes.

All search is deterministic: equispaced multistart seeding, golden-section
refinement, and a final secant polish on the first-order conditions.  A
brute-force grid certifies the same optima in the test suite, which is the
reason stochastic search was ruled out.

Regimes:

* FixedContract -- the indemnity is given; the insurer picks the cutoff
  type to maximize profit (one-dimensional).
* Unregulated -- the insurer picks cutoff and indemnity jointly.
* Regulated -- a regulator picks the indemnity to maximize welfare while
  anticipating the insurer's profit-maximizing cutoff for each candidate
  indemnity (leader-follower); the insurer's response is re-solved from
  scratch at every candidate, with no continuity assumption on r -> theta*.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import preference
from .errors import DomainError, FlatObjectiveWarning
from .market import MarketModel, segment_integrals_batch
from .preference import wtp, wtp_dr, wtp_dtheta

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
PROFIT_EPS = 1e-14
_MULTIMODAL_THETA_GAP = 1e-4
_MULTIMODAL_VALUE_GAP = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    theta_tol: float = 1e-10
    r_tol: float = 1e-8
    multistart_points: int = 200
    coarse_grid: int = 256
    refine_iters: int = 200

    def __post_init__(self):
        if not (self.theta_tol > 0.0 and self.r_tol > 0.0):
            raise DomainError("tolerances must be positive")
        if self.multistart_points < 8:
            raise DomainError(
                f"multistart_points must be >= 8, got {self.multistart_points}"
            )
        if self.coarse_grid < 2 or self.refine_iters < 1:
            raise DomainError("coarse_grid and refine_iters must be positive")


class Regime(enum.Enum):
    REGULATED = "Regulated"
    UNREGULATED = "Unregulated"
    FIXED_CONTRACT = "FixedContract"


@dataclass(frozen=True)
class OptimumReport:
    regime: Regime
    theta_star: float
    r_star: float
    premium: float
    take_up: float
    profit: float
    surplus: float
    welfare: float
    elasticity: float
    cond_mean: float
    cond_sd: float
    residuals: dict[str, float]
    profitable: bool
    multimodal: bool = False


# -- scalar maximization -----------------------------------------------------


def _golden_max(f, lo: float, hi: float, tol: float, max_iter: int):
    """Golden-section maximization on [lo, hi]; deterministic, ties lean
    toward the left end."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    if f1 >= f2:
        return x1, f1
    return x2, f2


def maximize_scalar(f, lo: float, hi: float, cfg: SolverConfig = SolverConfig(),
                    tol: float | None = None, vectorized: bool = False):
    """Deterministic global scalar maximization on [lo, hi].

    Evaluates ``f`` on ``multistart_points`` equispaced seeds, golden-refines
    within the bracket around the best seed, and returns (argmax, max).
    Warns when the objective is numerically flat.  ``vectorized`` marks an
    ``f`` that accepts ndarray input for the seed scan.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")
    if tol is None:
        tol = cfg.theta_tol
    seeds = np.linspace(lo, hi, cfg.multistart_points)
    if vectorized:
        vals = np.asarray(f(seeds), dtype=float)
    else:
        vals = np.array([f(x) for x in seeds], dtype=float)
    if float(np.max(vals)) - float(np.min(vals)) < 1e-14:
        warnings.warn(
            f"objective is numerically flat on [{lo}, {hi}]", FlatObjectiveWarning
        )
    best = int(np.argmax(vals))  # first max = smallest seed on ties
    b_lo = seeds[max(best - 1, 0)]
    b_hi = seeds[min(best + 1, len(seeds) - 1)]
    x, fx = _golden_max(f, float(b_lo), float(b_hi), tol, cfg.refine_iters)
    if vals[best] > fx:
        return float(seeds[best]), float(vals[best])
    return float(x), float(fx)


# -- scalar profit helpers ------------------------------------------------------


def _profit_scalar(mm: MarketModel, theta: float, r: float) -> float:
    Q, A = mm.measure.pool_stats(theta)
    return (wtp(mm.prim, theta, r) - r * A) * Q


def _profit_foc_scalar(mm: MarketModel, theta: float, r: float) -> float:
    """d profit / d theta at an interior point."""
    Q, A, H, f = mm.measure.pool_stats(theta, derivs=True)
    dp = wtp_dtheta(mm.prim, theta, r)
    pbar = wtp(mm.prim, theta, r)
    return Q * (dp - r * H * (A - theta)) - f * (pbar - r * A)


# -- profitability boundary ---------------------------------------------------


def profitable_boundary(mm: MarketModel, r: float, cfg: SolverConfig = SolverConfig()):
    """Lower edge theta-hat of the rightmost profitable interval of the
    per-contract margin, or None when the scan grid shows no profit.

    When the profitability margin at theta = 1 is positive the margin is
    positive on (theta-hat, 1); the edge is located by a leftward scan and
    bisection to theta_tol.
    """
    if not 0.0 < r <= mm.prim.loss + 1e-15:
        raise DomainError(f"r must lie in (0, loss], got {r}")
    n_scan = 4 * cfg.coarse_grid + 1
    grid = np.linspace(0.0, 1.0, n_scan)
    margin_vals = mm.avg_profit(grid, r)
    positive = margin_vals > 0.0
    m1 = preference.profitability_margin(mm.prim, mm.measure, r)
    if m1 > 0.0:
        # the margin vanishes at exactly 1 but is positive just below, so
        # anchor the scan at the last interior grid point
        hi_idx = n_scan - 2
    elif np.any(positive[:-1]):
        hi_idx = int(np.max(np.nonzero(positive[:-1])[0]))
    else:
        return None
    below = np.nonzero(~positive[:hi_idx])[0]
    if len(below) == 0:
        lo_b, hi_b = 0.0, float(grid[hi_idx])
    else:
        i = int(below[-1])
        lo_b, hi_b = float(grid[i]), float(grid[i + 1])
    g = lambda th: mm.avg_profit(th, r)
    for _ in range(200):
        if hi_b - lo_b <= cfg.theta_tol:
            break
        mid = 0.5 * (lo_b + hi_b)
        if g(mid) > 0.0:
            hi_b = mid
        else:
            lo_b = mid
    return 0.5 * (lo_b + hi_b)


# -- inner profit maximization -------------------------------------------------


def _seed_scan(mm: MarketModel, r: float, n_seeds: int):
    """Profit on the cached theta seed grid for one indemnity."""
    thetas, A, Q = mm.measure._grid_stats(n_seeds)
    pbar = wtp(mm.prim, thetas, r)
    return thetas, (pbar - r * A) * Q


def _inner_theta_scalar(mm: MarketModel, r: float, cfg: SolverConfig, polish: bool = True):
    """Profit-maximizing cutoff for one indemnity: cached seed scan, scalar
    golden refinement, then a secant polish on the profit derivative
    (skippable inside outer search loops where golden accuracy suffices).
    Returns (theta, profit, multimodal)."""
    seeds, vals = _seed_scan(mm, r, cfg.multistart_points)
    best = int(np.argmax(vals))
    runner = int(np.argmax(np.where(np.arange(len(vals)) == best, -np.inf, vals)))
    multimodal = bool(
        abs(seeds[runner] - seeds[best]) > max(_MULTIMODAL_THETA_GAP, 2.0 / cfg.multistart_points)
        and abs(vals[best] - vals[runner]) < _MULTIMODAL_VALUE_GAP
    )
    lo = float(seeds[max(best - 1, 0)])
    hi = float(seeds[min(best + 1, len(seeds) - 1)])
    f = lambda th: _profit_scalar(mm, th, r)
    theta, pi = _golden_max(f, lo, hi, cfg.theta_tol, cfg.refine_iters)
    if vals[best] > pi:
        theta, pi = float(seeds[best]), float(vals[best])
    # secant polish on the profit FOC, bracket-safeguarded
    if polish and 0.0 < theta < 1.0 and pi > PROFIT_EPS:
        t0 = max(theta - 10.0 * cfg.theta_tol, lo)
        t1 = min(theta + 10.0 * cfg.theta_tol, hi)
        g0 = _profit_foc_scalar(mm, t0, r)
        g1 = _profit_foc_scalar(mm, t1, r)
        for _ in range(8):
            denom = g1 - g0
            if denom == 0.0 or not math.isfinite(denom):
                break
            t2 = t1 - g1 * (t1 - t0) / denom
            if not lo < t2 < hi or not math.isfinite(t2):
                break
            g2 = _profit_foc_scalar(mm, t2, r)
            t0, g0, t1, g1 = t1, g1, t2, g2
            if abs(t1 - t0) < 1e-15:
                break
        pi_pol = _profit_scalar(mm, t1, r)
        if pi_pol >= pi - 1e-12 * max(abs(pi), 1.0):
            theta, pi = t1, pi_pol
    if pi <= PROFIT_EPS:
        return 1.0, 0.0, multimodal
    return float(theta), float(pi), multimodal


def _pbar_cols(mm: MarketModel, thetas: np.ndarray, rs: np.ndarray) -> np.ndarray:
    """wtp at paired (theta_j, r_j); rs varies per column so the indemnity
    part of the mix enters element-wise."""
    rho, l = mm.prim.rho, mm.prim.loss
    if rho < preference.RHO_NEUTRAL:
        return thetas * rs
    with np.errstate(divide="ignore"):
        s_l = thetas + (1.0 - thetas) * math.exp(-rho * l)
        ln_num = np.where(s_l > 0.0, np.log(s_l), -rho * l)
        s_lr = thetas + (1.0 - thetas) * np.exp(-rho * (l - rs))
        ln_den = np.where(s_lr > 0.0, np.log(s_lr), -rho * (l - rs))
    return rs + (ln_num - ln_den) / rho


def _profit_cols_vec(mm: MarketModel, thetas: np.ndarray, rs: np.ndarray) -> np.ndarray:
    """Profit at paired (theta_j, r_j), vectorized."""
    Q, A = mm.measure.pool_stats(thetas)
    return (_pbar_cols(mm, thetas, rs) - rs * A) * Q


def _profit_foc_vec(mm: MarketModel, thetas: np.ndarray, rs: np.ndarray) -> np.ndarray:
    """d profit / d theta at paired points, vectorized."""
    prim = mm.prim
    Q, A, H, f = mm.measure.pool_stats(thetas, derivs=True)
    rho, l = prim.rho, prim.loss
    if rho < preference.RHO_NEUTRAL:
        pbar = thetas * rs
        dp = np.broadcast_to(rs, thetas.shape).astype(float)
    else:
        pbar = _pbar_cols(mm, thetas, rs)
        with np.errstate(divide="ignore"):
            s_l = thetas + (1.0 - thetas) * math.exp(-rho * l)
            s_lr = thetas + (1.0 - thetas) * np.exp(-rho * (l - rs))
            rat_l = np.where(s_l > 0.0, math.expm1(-rho * l) / s_l, -np.inf)
            rat_lr = np.where(s_lr > 0.0, np.expm1(-rho * (l - rs)) / s_lr, -np.inf)
        dp = (rat_lr - rat_l) / rho
    return Q * (dp - rs * H * (A - thetas)) - f * (pbar - rs * A)


def _inner_theta_vec(mm: MarketModel, rs: np.ndarray, cfg: SolverConfig):
    """Profit-maximizing cutoff for each indemnity in ``rs``: one shared
    seed scan, vectorized golden refinement across columns, vectorized
    secant polish.  Returns (theta_star, profit_star, multimodal) arrays."""
    rs = np.asarray(rs, dtype=float)
    if len(rs) == 1:
        th, pi, flag = _inner_theta_scalar(mm, float(rs[0]), cfg)
        return np.array([th]), np.array([pi]), np.array([flag])
    seeds, A, Q = mm.measure._grid_stats(cfg.multistart_points)
    grid = np.empty((len(seeds), len(rs)))
    for j, r in enumerate(rs):
        grid[:, j] = (wtp(mm.prim, seeds, float(r)) - r * A) * Q
    best = np.argmax(grid, axis=0)
    cols = np.arange(len(rs))
    runner_vals = grid.copy()
    runner_vals[best, cols] = -np.inf
    runner = np.argmax(runner_vals, axis=0)
    multimodal = (
        np.abs(seeds[runner] - seeds[best])
        > max(_MULTIMODAL_THETA_GAP, 2.0 / cfg.multistart_points)
    ) & (np.abs(grid[best, cols] - runner_vals[runner, cols]) < _MULTIMODAL_VALUE_GAP)

    lo = seeds[np.maximum(best - 1, 0)]
    hi = seeds[np.minimum(best + 1, len(seeds) - 1)]
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1 = _profit_cols_vec(mm, x1, rs)
    f2 = _profit_cols_vec(mm, x2, rs)
    for _ in range(cfg.refine_iters):
        if np.max(hi - lo) <= cfg.theta_tol:
            break
        take_left = f1 >= f2
        hi = np.where(take_left, x2, hi)
        lo = np.where(take_left, lo, x1)
        x1_new = np.where(take_left, hi - _INV_PHI * (hi - lo), x2)
        x2_new = np.where(take_left, x1, lo + _INV_PHI * (hi - lo))
        f1_keep = np.where(take_left, np.nan, f2)
        x_eval = np.where(take_left, x1_new, x2_new)
        f_eval = _profit_cols_vec(mm, x_eval, rs)
        f2 = np.where(take_left, f1, f_eval)
        f1 = np.where(take_left, f_eval, f1_keep)
        x1, x2 = x1_new, x2_new
    theta = np.where(f1 >= f2, x1, x2)
    pi = np.where(f1 >= f2, f1, f2)

    t0 = np.clip(theta - 10.0 * cfg.theta_tol, lo, hi)
    t1 = np.clip(theta + 10.0 * cfg.theta_tol, lo, hi)
    g0 = _profit_foc_vec(mm, t0, rs)
    g1 = _profit_foc_vec(mm, t1, rs)
    for _ in range(6):
        denom = g1 - g0
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g1 * (t1 - t0) / denom
        t2 = t1 - step
        bad = ~np.isfinite(t2) | (t2 <= lo) | (t2 >= hi)
        t2 = np.where(bad, 0.5 * (lo + hi), t2)
        g2 = _profit_foc_vec(mm, t2, rs)
        t0, g0, t1, g1 = t1, g1, t2, g2
    pi_pol = _profit_cols_vec(mm, t1, rs)
    improve = pi_pol >= pi - 1e-12 * np.maximum(np.abs(pi), 1.0)
    theta = np.where(improve, t1, theta)
    pi = np.where(improve, pi_pol, pi)
    fallback = pi <= PROFIT_EPS
    theta = np.where(fallback, 1.0, theta)
    pi = np.where(fallback, 0.0, pi)
    return theta, pi, multimodal


# -- reports ---------------------------------------------------------------------


def _report(
    mm: MarketModel,
    regime: Regime,
    theta: float,
    r: float,
    multimodal: bool = False,
) -> OptimumReport:
    measure = mm.measure
    take_up = float(measure.survival(theta))
    premium = float(wtp(mm.prim, theta, r))
    profit = float(mm.profit(theta, r))
    profitable = profit > PROFIT_EPS and theta < 1.0
    if theta >= 1.0:
        seg_sp = seg_sw = 0.0
        elasticity = math.nan
        cond_mean, cond_sd = 1.0, 0.0
        residuals: dict[str, float] = {}
    else:
        seg = mm.segment_integrals(theta, r)
        seg_sp, seg_sw = seg.surplus, seg.welfare
        elasticity = mm.elasticity(theta, r) if 0.0 < theta < 1.0 and r > 0.0 else math.nan
        cond_mean, cond_sd = measure.cond_mean_sd(theta)
        residuals = {}
        if profitable and 0.0 < theta < 1.0:
            H = measure.hazard(theta)
            lerner = mm.lerner_residual(theta, r)
            foc_a = mm.foc_residual_a(theta, r)
            foc_b = mm.foc_residual_b(theta, r)
            foc_r = mm.foc_residual_r(theta, r)
            residuals = {
                "lerner": lerner,
                "lerner_rel": lerner / premium,
                "foc_a": foc_a,
                "foc_a_rel": foc_a / H,
                "foc_b": foc_b,
                "foc_b_rel": foc_b / H,
                "foc_r": foc_r,
            }
    return OptimumReport(
        regime=regime,
        theta_star=float(theta),
        r_star=float(r),
        premium=premium,
        take_up=take_up,
        profit=profit,
        surplus=seg_sp,
        welfare=seg_sw,
        elasticity=elasticity,
        cond_mean=cond_mean,
        cond_sd=cond_sd,
        residuals=residuals,
        profitable=profitable,
        multimodal=multimodal,
    )


def _no_trade_report(mm: MarketModel, regime: Regime, r: float) -> OptimumReport:
    """The insurer declines to trade: cutoff 1, zero take-up and profit."""
    return OptimumReport(
        regime=regime,
        theta_star=1.0,
        r_star=float(r),
        premium=float(wtp(mm.prim, 1.0, r)),
        take_up=0.0,
        profit=0.0,
        surplus=0.0,
        welfare=0.0,
        elasticity=math.nan,
        cond_mean=1.0,
        cond_sd=0.0,
        residuals={},
        profitable=False,
    )


def inner_profit_opt(mm: MarketModel, r: float, cfg: SolverConfig = SolverConfig()) -> OptimumReport:
    """Profit-maximizing cutoff for a fixed indemnity (FixedContract regime).

    A non-profitable market reports theta* = 1 (declining to trade) with
    ``profitable`` False.
    """
    if not 0.0 < r <= mm.prim.loss + 1e-15:
        raise DomainError(f"r must lie in (0, loss], got {r}")
    theta, pi, flag = _inner_theta_scalar(mm, r, cfg)
    if pi <= PROFIT_EPS:
        return _no_trade_report(mm, Regime.FIXED_CONTRACT, r)
    return _report(mm, Regime.FIXED_CONTRACT, theta, r, flag)


# -- unregulated (two-variable) optimum ---------------------------------------


def _solve_r_foc(mm: MarketModel, theta: float, r_lo: float, r_hi: float, tol: float) -> float:
    """Solve d wtp/d r = A(theta) in r on [r_lo, r_hi] by bisection; the
    left side is strictly decreasing in r.  Returns the clamped boundary
    when there is no interior root."""
    A = mm.measure.avg_damage(theta)
    g = lambda r: wtp_dr(mm.prim, theta, r) - A
    if g(r_lo) <= 0.0:
        return r_lo
    if g(r_hi) >= 0.0:
        return r_hi
    for _ in range(200):
        if r_hi - r_lo <= tol:
            break
        mid = 0.5 * (r_lo + r_hi)
        if g(mid) > 0.0:
            r_lo = mid
        else:
            r_hi = mid
    return 0.5 * (r_lo + r_hi)


def _top_seeds(grid: np.ndarray, count: int) -> list[tuple[int, int]]:
    """Indices of the ``count`` best grid cells, suppressing the immediate
    neighborhood of already-selected peaks."""
    work = grid.copy()
    n_theta, n_r = grid.shape
    out: list[tuple[int, int]] = []
    for _ in range(count):
        flat = int(np.argmax(work))
        i, j = divmod(flat, n_r)
        if not np.isfinite(work[i, j]) or work[i, j] <= PROFIT_EPS:
            break
        out.append((i, j))
        i0, i1 = max(i - 2, 0), min(i + 3, n_theta)
        j0, j1 = max(j - 2, 0), min(j + 3, n_r)
        work[i0:i1, j0:j1] = -np.inf
    return out


def unregulated_opt(mm: MarketModel, cfg: SolverConfig = SolverConfig()) -> OptimumReport:
    """Joint (cutoff, indemnity) profit maximization over [0,1] x (0, loss].

    Deterministic coarse grid, then alternating refinement from the best
    five separated cells: the cutoff is re-solved globally at each candidate
    indemnity and the indemnity is moved to its first-order condition.
    Candidates converging into an already-refined basin stop early.  Grid
    ties break toward smaller theta, then smaller r.
    """
    loss = mm.prim.loss
    thetas, A, Q = mm.measure._grid_stats(cfg.coarse_grid)
    rs = np.linspace(loss / cfg.coarse_grid, loss, cfg.coarse_grid)
    grid = np.empty((len(thetas), len(rs)))
    for j, r in enumerate(rs):
        grid[:, j] = (wtp(mm.prim, thetas, float(r)) - r * A) * Q
    if float(np.max(grid)) <= PROFIT_EPS:
        return _no_trade_report(mm, Regime.UNREGULATED, 0.0)

    d_r = rs[1] - rs[0]
    r_floor = loss / cfg.coarse_grid / 4.0
    candidates: list[tuple[float, float, float]] = []
    for i, j in _top_seeds(grid, 5):
        r = float(rs[j])
        th = float(thetas[i])
        converged_same_basin = False
        for _ in range(40):
            th_new, pi_new, _ = _inner_theta_scalar(mm, r, cfg)
            if th_new >= 1.0:
                break
            r_new = _solve_r_foc(
                mm, th_new, max(r - 2.0 * d_r, r_floor), min(r + 2.0 * d_r, loss),
                cfg.r_tol / 10.0,
            )
            moved = abs(th_new - th) > cfg.theta_tol or abs(r_new - r) > cfg.r_tol
            th, r = th_new, r_new
            if any(abs(th - c[1]) <= 1e-7 and abs(r - c[2]) <= 1e-7 for c in candidates):
                converged_same_basin = True
                break
            if not moved:
                break
        if converged_same_basin or th >= 1.0:
            continue
        candidates.append((_profit_scalar(mm, th, r), th, r))

    if not candidates:
        return _no_trade_report(mm, Regime.UNREGULATED, 0.0)
    best = max(candidates, key=lambda c: (c[0], -c[1], -c[2]))
    pi_star, th_star, r_star = best
    if pi_star <= PROFIT_EPS:
        return _no_trade_report(mm, Regime.UNREGULATED, 0.0)
    multimodal = any(
        abs(th - th_star) > _MULTIMODAL_THETA_GAP and abs(pi - pi_star) < _MULTIMODAL_VALUE_GAP
        for pi, th, _ in candidates
    )
    return _report(mm, Regime.UNREGULATED, th_star, r_star, multimodal)


# -- regulated (leader-follower) optimum ---------------------------------------


def regulated_opt(mm: MarketModel, cfg: SolverConfig = SolverConfig()) -> OptimumReport:
    """Welfare-maximizing indemnity, anticipating the insurer's cutoff.

    The outer objective r -> welfare(theta*_r, r) is scanned on a coarse
    grid with the inner problem re-solved per candidate (vectorized across
    the grid), then golden-refined.  Non-profitable candidates score the
    no-trade welfare of zero.
    """
    loss = mm.prim.loss
    rs = np.linspace(loss / cfg.coarse_grid, loss, cfg.coarse_grid)
    theta_js, pi_js, _ = _inner_theta_vec(mm, rs, cfg)
    profitable = pi_js > PROFIT_EPS
    if not np.any(profitable):
        return _no_trade_report(mm, Regime.REGULATED, 0.0)
    sw = np.zeros(len(rs))
    idx = np.nonzero(profitable)[0]
    sw_vals, _ = segment_integrals_batch(mm, theta_js[idx], rs[idx], mm.quad.nodes)
    sw[idx] = sw_vals

    warm: dict[str, np.ndarray | None] = {"x": None}

    def outer(r: float) -> float:
        # the polished cutoff is a smooth function of r; skipping the polish
        # leaves golden-bracket jitter that rattles this nearly flat objective
        theta, pi, _ = _inner_theta_scalar(mm, r, cfg)
        if pi <= PROFIT_EPS:
            return 0.0
        seg, x = mm._segment_core(theta, r, mm.quad.nodes, x_seed=warm["x"])
        warm["x"] = x
        return seg.welfare

    j = int(np.argmax(sw))
    r_lo = float(rs[max(j - 1, 0)])
    r_hi = float(rs[min(j + 1, len(rs) - 1)])
    r_star, sw_star = _golden_max(outer, r_lo, r_hi, cfg.r_tol, cfg.refine_iters)
    if sw_star < sw[j]:
        r_star = float(rs[j])
    report = inner_profit_opt(mm, r_star, cfg)
    if not report.profitable:
        return _no_trade_report(mm, Regime.REGULATED, r_star)
    return OptimumReport(
        regime=Regime.REGULATED,
        theta_star=report.theta_star,
        r_star=report.r_star,
        premium=report.premium,
        take_up=report.take_up,
        profit=report.profit,
        surplus=report.surplus,
        welfare=report.welfare,
        elasticity=report.elasticity,
        cond_mean=report.cond_mean,
        cond_sd=report.cond_sd,
        residuals=report.residuals,
        profitable=report.profitable,
        multimodal=report.multimodal,
    )
