"""Decay-model fitting and rate-bound verification for trajectories.

Exponential decay (M e^{-rt}) is what bounded linear regularity predicts for
the flow; power-law decay (M t^{-rho}) is what Hoelder regularity predicts,
with exponent rho = gamma / (2 (1 - gamma)). Fits are least squares in the
model's own log space; bound checks evaluate the explicit inequalities from
the rate analysis at every recorded sample time.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import FitError, UsageError
from .flow import LambdaSchedule, Trajectory
from .regularity import InequalityReport, _report
from .validation import as_point

# Fit window default: drop the early transient, keep the last 80% of samples
# whose metric still sits above this floor.
METRIC_FLOOR = 1e-13
WINDOW_TAIL_FRACTION = 0.8
# Power-law bounds degenerate as t -> 0+; fits only use t >= 1 by default.
POWERLAW_MIN_T = 1.0


@dataclass(frozen=True)
class RateFit:
    """Fitted decay model: exponential y ~ M e^{-rate t} or powerlaw y ~ M t^{-rate}."""

    model: str
    M: float
    rate: float
    rss: float  # residual sum of squares in the model's log space
    n_points: int
    fit_window: tuple[float, float]

    @property
    def rss_per_point(self) -> float:
        return self.rss / self.n_points if self.n_points else float("inf")

    def to_dict(self) -> dict:
        return {
            "model": self.model, "M": self.M, "rate": self.rate, "rss": self.rss,
            "rss_per_point": self.rss_per_point, "n_points": self.n_points,
            "fit_window": list(self.fit_window),
        }


@dataclass(frozen=True)
class BoundCheck:
    """Outcome of checking explicit rate bounds at sample times.

    ``margins`` holds the worst (bound - observed) per named inequality;
    ``worst_margin`` is their minimum.
    """

    bound_name: str
    n_points: int
    worst_margin: float
    passed: bool
    tolerance: float
    margins: dict

    def to_dict(self) -> dict:
        return {
            "bound_name": self.bound_name, "n_points": self.n_points,
            "worst_margin": self.worst_margin, "passed": self.passed,
            "tolerance": self.tolerance, "margins": dict(self.margins),
            "evaluated_at": "sample times",
        }


def _window_data(traj: Trajectory, metric: str, model: str,
                 window: Optional[tuple[float, float]]):
    t = traj.times()
    y = traj.metric(metric)
    ok = np.isfinite(y) & (y > 0.0)
    if window is None:
        above = ok & (y > METRIC_FLOOR)
        if model == "powerlaw":
            above &= t >= POWERLAW_MIN_T
        idx = np.flatnonzero(above)
        if idx.size == 0:
            return t[:0], y[:0], (0.0, 0.0)
        keep = idx[int(math.floor(idx.size * (1.0 - WINDOW_TAIL_FRACTION))):]
        lo, hi = float(t[keep[0]]), float(t[keep[-1]])
    else:
        lo, hi = float(window[0]), float(window[1])
        if model == "powerlaw" and lo <= 0.0:
            raise UsageError("power-law fits need a window with t_min > 0")
    sel = ok & (t >= lo) & (t <= hi)
    return t[sel], y[sel], (lo, hi)


def fit_decay(
    traj: Trajectory,
    metric: str = "residual",
    model: str = "exponential",
    window: Optional[tuple[float, float]] = None,
) -> Optional[RateFit]:
    """Least-squares fit of log(metric) against t (exponential) or log t (powerlaw).

    Returns None when the metric is identically zero in the window (the run
    already converged; nothing to fit). Raises FitError when fewer than 10
    positive samples are available.
    """
    if model not in ("exponential", "powerlaw"):
        raise UsageError(f"model must be 'exponential' or 'powerlaw', got {model!r}")
    t, y, win = _window_data(traj, metric, model, window)
    raw = traj.metric(metric)
    if t.size == 0 and np.nanmax(np.abs(raw), initial=0.0) == 0.0:
        return None
    if t.size < 10:
        raise FitError(
            f"only {t.size} positive samples of {metric!r} in window {win}; need >= 10"
        )
    logy = np.log(y)
    if model == "exponential":
        design = t
    else:
        if np.any(t <= 0.0):
            raise UsageError("power-law fits need strictly positive times")
        design = np.log(t)
    slope, intercept = np.polyfit(design, logy, 1)
    rate = -float(slope)
    if not rate > 0.0:
        raise FitError(f"{model} fit gave nonpositive decay rate {rate:.3g}")
    pred = intercept + slope * design
    rss = float(np.sum((logy - pred) ** 2))
    return RateFit(model, float(np.exp(intercept)), rate, rss, int(t.size), win)


def select_model(
    traj: Trajectory,
    metric: str = "residual",
    window: Optional[tuple[float, float]] = None,
) -> tuple[RateFit, RateFit, str]:
    """Fit both models and choose the one with smaller per-point rss in its
    own log space. Returns (exponential fit, powerlaw fit, chosen model)."""
    exp_fit = fit_decay(traj, metric, "exponential", window)
    pow_fit = fit_decay(traj, metric, "powerlaw", window)
    if exp_fit is None or pow_fit is None:
        raise FitError("metric is identically zero; nothing to select between")
    chosen = "exponential" if exp_fit.rss_per_point <= pow_fit.rss_per_point else "powerlaw"
    return exp_fit, pow_fit, chosen


# ---------------------------------------------------------------------------
# Explicit rate bounds
# ---------------------------------------------------------------------------

def _resolve_limit(traj: Trajectory, x_bar) -> np.ndarray:
    if x_bar is not None:
        return as_point(x_bar, traj.dim)
    if traj.limit_estimate is None:
        raise UsageError(
            "trajectory has no limit_estimate (final residual above threshold); "
            "run longer, or pass x_bar explicitly"
        )
    return traj.limit_estimate


def _dist_series(traj: Trajectory) -> np.ndarray:
    d = traj.metric("dist_fix")
    if np.any(~np.isfinite(d)):
        raise UsageError("trajectory lacks dist_fix samples; rerun with an oracle")
    return d


def check_linear_rate_bound(
    traj: Trajectory,
    kappa: float,
    schedule: Optional[LambdaSchedule] = None,
    d0: Optional[float] = None,
    tol: float = 1e-9,
    x_bar=None,
) -> BoundCheck:
    """Check the three displayed inequalities of the exponential-rate analysis:

        d^2(x(t), F) <= exp(-(lam*/kappa^2) t) d^2(x0, F)     (squared decay)
        ||x(t) - xbar|| <= 2 d(x(t), F)                        (limit vs distance)
        ||x(t) - xbar|| <= 2 exp(-(lam*/(2 kappa^2)) t) d(x0,F) (trajectory bound)

    ``kappa`` must come from an estimate certified on a region containing the
    trajectory. d0 defaults to the first sample's distance.
    """
    schedule = schedule or traj.schedule
    if schedule is None:
        raise UsageError("no schedule available")
    if not kappa > 0.0:
        raise UsageError("kappa must be positive")
    lam_star = schedule.inf_value
    if not lam_star > 0.0:
        raise UsageError("the exponential bound needs inf lambda > 0")
    d = _dist_series(traj)
    if d0 is None:
        d0 = float(d[0])
    xbar = _resolve_limit(traj, x_bar)
    t = traj.times()
    err = np.linalg.norm(traj.states() - xbar[None, :], axis=1)
    decay = np.exp(-(lam_star / kappa ** 2) * t)
    m1 = decay * d0 ** 2 - d ** 2
    m2 = 2.0 * d - err
    m3 = 2.0 * np.sqrt(decay) * d0 - err
    margins = {
        "squared_distance_decay": float(m1.min()),
        "limit_vs_distance": float(m2.min()),
        "trajectory_bound": float(m3.min()),
    }
    worst = min(margins.values())
    return BoundCheck("exponential rate under linear regularity", int(t.size),
                      worst, bool(worst >= -tol), tol, margins)


def hoelder_bound_constant(kappa: float, gamma: float, lam_star: float) -> float:
    """The proof-built constant M0 with d(x(t), F) <= M0 t^{-gamma/(2(1-gamma))}.

    Comes from applying the power-law comparison lemma to u = d^2 with
    u' <= -alpha u^{1/gamma}, alpha = lam*/kappa^{2/gamma}: the lemma constant
    is (gamma/(alpha(1-gamma)))^{gamma/(1-gamma)} and M0 is its square root.
    """
    if not 0.0 < gamma < 1.0:
        raise UsageError("gamma must lie in (0,1)")
    if not (kappa > 0.0 and lam_star > 0.0):
        raise UsageError("kappa and lambda* must be positive")
    alpha = lam_star / kappa ** (2.0 / gamma)
    return (gamma / (alpha * (1.0 - gamma))) ** (gamma / (2.0 * (1.0 - gamma)))


def check_hoelder_rate_bound(
    traj: Trajectory,
    kappa: float,
    gamma: float,
    schedule: Optional[LambdaSchedule] = None,
    tol: float = 1e-6,
    t_min: float = 1.0,
    x_bar=None,
) -> BoundCheck:
    """Check the power-law bounds for Hoelder-regular operators at samples with
    t >= t_min:

        d(x(t), F)      <= M0 t^{-gamma/(2(1-gamma))}
        ||x(t) - xbar|| <= 2 M0 t^{-gamma/(2(1-gamma))}

    with M0 built from (kappa, gamma, lam*) as in the proof chain.
    """
    schedule = schedule or traj.schedule
    if schedule is None:
        raise UsageError("no schedule available")
    if not 0.0 < gamma < 1.0:
        raise UsageError("gamma must lie in (0,1)")
    lam_star = schedule.inf_value
    if not lam_star > 0.0:
        raise UsageError("the power-law bound needs inf lambda > 0")
    d = _dist_series(traj)
    xbar = _resolve_limit(traj, x_bar)
    t = traj.times()
    sel = t >= t_min
    if not np.any(sel):
        raise UsageError(f"no samples with t >= {t_min}")
    m0 = hoelder_bound_constant(kappa, gamma, lam_star)
    rho = gamma / (2.0 * (1.0 - gamma))
    bound = m0 * t[sel] ** (-rho)
    err = np.linalg.norm(traj.states()[sel] - xbar[None, :], axis=1)
    margins = {
        "distance_bound": float((bound - d[sel]).min()),
        "trajectory_bound": float((2.0 * bound - err).min()),
    }
    worst = min(margins.values())
    return BoundCheck("power-law rate under Hoelder regularity",
                      int(np.count_nonzero(sel)), worst, bool(worst >= -tol),
                      tol, margins)


# ---------------------------------------------------------------------------
# Scalar comparison lemmas
# ---------------------------------------------------------------------------

def integrate_scalar_decay(
    alpha: float,
    exponent: float,
    u0: float,
    t_end: float,
    n_samples: int = 201,
    rel_tol: float = 1e-11,
    abs_tol: float = 1e-14,
) -> tuple[np.ndarray, np.ndarray]:
    """Tightly integrate u' = -alpha * u^exponent, u(0) = u0 >= 0.

    Returns (t, u) on a uniform grid. The right side is clamped at u = 0 so
    roundoff cannot push the state negative.
    """
    if u0 < 0.0:
        raise UsageError("u0 must be nonnegative")

    def rhs(_t, u):
        return -alpha * np.maximum(u, 0.0) ** exponent

    t_eval = np.linspace(0.0, t_end, n_samples)
    sol = solve_ivp(rhs, (0.0, t_end), [float(u0)], method="RK45",
                    rtol=rel_tol, atol=abs_tol, t_eval=t_eval)
    if not sol.success:
        raise FitError(f"scalar integration failed: {sol.message}")
    return sol.t, np.maximum(sol.y[0], 0.0)


def powerlaw_comparison_constant(alpha: float, gamma: float) -> float:
    """M with u(t) <= M t^{-gamma/(1-gamma)} whenever u' <= -alpha u^{1/gamma}."""
    if not 0.0 < gamma < 1.0:
        raise UsageError("gamma must lie in (0,1)")
    if not alpha > 0.0:
        raise UsageError("alpha must be positive")
    return (gamma / (alpha * (1.0 - gamma))) ** (gamma / (1.0 - gamma))


def verify_comparison_lemmas(
    alpha: float,
    gamma: float,
    u0: float,
    t_end: float = 20.0,
    tol: float = 1e-9,
) -> InequalityReport:
    """Numerically verify both scalar comparison lemmas.

    Exponential case u' = -alpha u: the solution must *equal* exp(-alpha t) u0
    up to integrator tolerance (the bound is saturated), so its slack is the
    negated deviation. Power-law case u' = -alpha u^{1/gamma}: the solution
    must stay below M t^{-gamma/(1-gamma)} with the lemma's constant M.
    Slacks are normalized by max(1, u0).
    """
    if not alpha > 0.0:
        raise UsageError("alpha must be positive")
    if not 0.0 < gamma < 1.0:
        raise UsageError("gamma must lie in (0,1)")
    if u0 < 0.0:
        raise UsageError("u0 must be nonnegative")
    scale = max(1.0, float(u0))

    t, u_exp = integrate_scalar_decay(alpha, 1.0, u0, t_end)
    deviation = np.abs(u_exp - u0 * np.exp(-alpha * t))
    slack_exp = -float(deviation.max()) / scale

    t2, u_pow = integrate_scalar_decay(alpha, 1.0 / gamma, u0, t_end)
    m = powerlaw_comparison_constant(alpha, gamma)
    pos = t2 > 0.0
    margin = m * t2[pos] ** (-gamma / (1.0 - gamma)) - u_pow[pos]
    slack_pow = float(margin.min()) / scale

    slacks = [slack_exp, slack_pow]
    return _report(
        f"scalar decay comparison (alpha={alpha:g}, gamma={gamma:g}, u0={u0:g})",
        slacks, tol,
    )
