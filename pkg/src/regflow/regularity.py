"""Regularity estimation and inequality checking on concrete data.

An operator T is linearly regular on a region when d(x, Fix T) <= kappa * r(x)
with r(x) = ||x - T(x)||, and Hoelder regular when d(x, Fix T) <= kappa *
r(x)^gamma for some gamma in (0,1). The estimators sample a ball, fit the
constants, then inflate kappa until the bound holds on every retained sample,
so the result is a certificate over the samples rather than a regression. The
sampled kappa is a lower bound for the true regional constant (one-sided); it
converges from below as the sample count grows.

The check_* functions evaluate the descent and surrogate inequalities that
drive the rate proofs, reporting the worst slack (RHS - LHS) over the data.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateEstimateError, UsageError
from .fixset import FixSetOracle, Intersection
from .flow import LambdaSchedule, Trajectory
from .operators import Operator, compose, convex_combination
from .sets import AffineSubspace, Ball, Box, HalfSpace, Hyperplane, PrimitiveSet
from .validation import as_point

# Residual (or max set distance) below which a sample is a 0/0 case near the
# fixed set and is excluded from ratio fits.
DEGENERACY_FLOOR = 1e-12

# Maximum sample spacing for finite-difference derivative checks.
MAX_DT_FOR_DERIVATIVES = 0.1


@dataclass(frozen=True)
class Region:
    """Closed ball B(center, radius) on which constants are estimated."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center, name="center"))
        if not self.radius > 0.0:
            raise UsageError("region radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def to_dict(self) -> dict:
        return {"center": [float(v) for v in self.center], "radius": float(self.radius)}


def sample_region(region: Region, n: int, seed: int) -> np.ndarray:
    """n points uniform on the ball: Gaussian direction, radius ~ R * U^(1/dim).

    For a fixed seed the draws scale linearly with the radius, so estimates on
    nested regions share their sample rays.
    """
    rng = np.random.default_rng(seed)
    d = region.dim
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = region.radius * rng.random(n) ** (1.0 / d)
    return region.center[None, :] + (g / norms) * radii[:, None]


@dataclass(frozen=True)
class RegularityEstimate:
    """Certified (over the retained samples) regularity constants for an operator."""

    mode: str  # "linear" | "hoelder"
    kappa: float
    gamma: float  # 1.0 in linear mode
    region: Region
    n_samples: int
    max_violation: float  # worst d / (kappa * r^gamma) after inflation; <= 1
    excluded: int

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "kappa": self.kappa, "gamma": self.gamma,
            "region": self.region.to_dict(), "n_samples": self.n_samples,
            "max_violation": self.max_violation, "excluded": self.excluded,
        }


@dataclass(frozen=True)
class CollectionEstimate:
    """Certified regularity constants for a collection of sets."""

    tau: float
    theta: float
    region: Region
    n_samples: int
    max_violation: float
    excluded: int

    def to_dict(self) -> dict:
        return {
            "tau": self.tau, "theta": self.theta, "region": self.region.to_dict(),
            "n_samples": self.n_samples, "max_violation": self.max_violation,
            "excluded": self.excluded,
        }


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of checking one inequality over concrete points.

    slack = RHS - LHS at each point; the check passes iff the most negative
    slack stays above -tolerance. ``excluded`` counts skipped points.
    """

    name: str
    n_points: int
    worst_slack: float
    tolerance: float
    passed: bool
    excluded: int = 0

    def to_dict(self) -> dict:
        return {
            "name": self.name, "n_points": self.n_points,
            "worst_slack": self.worst_slack, "tolerance": self.tolerance,
            "passed": self.passed, "excluded": self.excluded,
            "evaluated_at": "sample times",
        }


def _report(name: str, slacks, tolerance: float, excluded: int = 0) -> InequalityReport:
    slacks = np.asarray(slacks, dtype=float)
    worst = float(slacks.min()) if slacks.size else 0.0
    return InequalityReport(name, int(slacks.size), worst, float(tolerance),
                            bool(worst >= -tolerance), excluded)


def _fit_ratio(dists: np.ndarray, resids: np.ndarray, mode: str) -> tuple[float, float]:
    """Return (kappa, gamma) such that d <= kappa * r^gamma on all inputs."""
    if mode == "linear":
        gamma = 1.0
    elif mode == "hoelder":
        pos = (dists > 0.0) & (resids > 0.0)
        if np.count_nonzero(pos) < 2:
            raise DegenerateEstimateError("not enough positive samples for a log-log fit")
        slope, _ = np.polyfit(np.log(resids[pos]), np.log(dists[pos]), 1)
        gamma = float(min(max(slope, 1e-6), 1.0))
    else:
        raise UsageError(f"mode must be 'linear' or 'hoelder', got {mode!r}")
    kappa = float(np.max(dists / resids ** gamma))
    if kappa <= 0.0:
        # all distances were zero; the trivial certificate
        kappa = DEGENERACY_FLOOR
    return kappa, gamma


def estimate_operator_regularity(
    op: Operator,
    oracle: FixSetOracle,
    region: Region,
    n_samples: int = 1000,
    mode: str = "linear",
    seed: int = 0,
) -> RegularityEstimate:
    """Estimate (kappa, gamma) with d(x, Fix T) <= kappa * ||x-T(x)||^gamma on samples.

    Samples with residual below the degeneracy floor are excluded and counted.
    Identical (seed, region, n_samples) inputs give bitwise identical output.
    """
    if n_samples < 100:
        raise UsageError("need at least 100 samples for a meaningful estimate")
    pts = sample_region(region, n_samples, seed)
    dists, resids = [], []
    excluded = 0
    for x in pts:
        r = float(np.linalg.norm(x - op(x)))
        if r < DEGENERACY_FLOOR:
            excluded += 1
            continue
        dists.append(oracle.distance_to(x).distance)
        resids.append(r)
    if not resids:
        raise DegenerateEstimateError(
            "all samples fell below the degeneracy floor (operator is the "
            "identity on this region?)"
        )
    dists = np.asarray(dists)
    resids = np.asarray(resids)
    kappa, gamma = _fit_ratio(dists, resids, mode)
    max_violation = float(np.max(dists / (kappa * resids ** gamma)))
    return RegularityEstimate(mode, kappa, gamma, region, n_samples,
                              max_violation, excluded)


def estimate_collection_regularity(
    sets: list[PrimitiveSet],
    region: Region,
    n_samples: int = 1000,
    mode: str = "linear",
    seed: int = 0,
    oracle: Optional[FixSetOracle] = None,
) -> CollectionEstimate:
    """Estimate (tau, theta) with d(x, inter C_i) <= tau * (max_i d(x, C_i))^theta.

    The intersection distance runs through the same oracle machinery as fixed
    sets (exact solve for affine collections, Dykstra otherwise); infeasible
    collections fail at oracle construction. When the intersection is known in
    closed form (e.g. a tangency point, where Dykstra converges sublinearly),
    pass it as ``oracle``.
    """
    if n_samples < 100:
        raise UsageError("need at least 100 samples for a meaningful estimate")
    if oracle is None:
        oracle = Intersection(sets)
    pts = sample_region(region, n_samples, seed)
    inter_d, max_d = [], []
    excluded = 0
    for x in pts:
        md = max(s.distance(x) for s in sets)
        if md < DEGENERACY_FLOOR:
            excluded += 1
            continue
        inter_d.append(oracle.distance_to(x).distance)
        max_d.append(md)
    if not max_d:
        raise DegenerateEstimateError("all samples lie in every set on this region")
    inter_d = np.asarray(inter_d)
    max_d = np.asarray(max_d)
    tau, theta = _fit_ratio(inter_d, max_d, mode)
    max_violation = float(np.max(inter_d / (tau * max_d ** theta)))
    return CollectionEstimate(tau, theta, region, n_samples, max_violation, excluded)


# ---------------------------------------------------------------------------
# Inequality checks along trajectories
# ---------------------------------------------------------------------------

def check_avg_inequality(
    traj: Trajectory,
    op: Operator,
    x_star,
    schedule: Optional[LambdaSchedule] = None,
    tol: float = 1e-9,
) -> InequalityReport:
    """Per-sample check of the relaxed-step contraction toward a fixed point:

        ||v + x - x*||^2 + ((1-lam)/lam) ||v||^2 <= ||x - x*||^2,

    with v = lam(t) (T(x) - x) reconstructed exactly from the operator (no
    finite differences). Samples where lam(t)=0 are skipped and counted.
    """
    schedule = schedule or traj.schedule
    if schedule is None:
        raise UsageError("no schedule available")
    x_star = as_point(x_star, op.dim)
    star_res = float(np.linalg.norm(x_star - op(x_star)))
    if star_res >= 1e-9:
        raise UsageError(f"x_star is not a fixed point (residual {star_res:.3e})")
    slacks = []
    skipped = 0
    for s in traj.samples:
        lam = schedule(s.t)
        if lam <= 0.0:
            skipped += 1
            continue
        v = lam * (op(s.x) - s.x)
        lhs = float(np.linalg.norm(v + s.x - x_star) ** 2)
        lhs += (1.0 - lam) / lam * float(np.linalg.norm(v) ** 2)
        rhs = float(np.linalg.norm(s.x - x_star) ** 2)
        slacks.append(rhs - lhs)
    return _report("relaxed-step contraction toward fixed points", slacks, tol, skipped)


def check_descent(
    traj: Trajectory,
    op: Operator,
    oracle: FixSetOracle,
    x_star,
    schedule: Optional[LambdaSchedule] = None,
    tol: Optional[float] = None,
) -> InequalityReport:
    """Central-difference check of the two descent inequalities along the flow:

        (d/dt) d^2(x, Fix T)   <= -lam ||x - T(x)||^2
        (d/dt) ||x - x*||^2    <= -lam(1-lam) ||x - T(x)||^2 - ||v||^2

    The left sides are discretized, so the default tolerance scales with the
    sample spacing (10 * max dt, calibrated on a flow with a known closed-form
    solution, where the discretization error is O(dt^2)).
    """
    schedule = schedule or traj.schedule
    if schedule is None:
        raise UsageError("no schedule available")
    if len(traj.samples) < 3:
        raise UsageError("need at least 3 samples for central differences")
    ts = traj.times()
    dts = np.diff(ts)
    if dts.max() > MAX_DT_FOR_DERIVATIVES * (1.0 + 1e-9):
        raise UsageError(
            f"sample spacing {dts.max():.3g} too coarse for derivative checks; "
            "use a denser sample_stride (dt <= 0.1)"
        )
    if tol is None:
        tol = 10.0 * float(dts.max())
    x_star = as_point(x_star, op.dim)
    star_res = float(np.linalg.norm(x_star - op(x_star)))
    if star_res >= 1e-9:
        raise UsageError(f"x_star is not a fixed point (residual {star_res:.3e})")

    d2 = np.array([oracle.distance_to(s.x).distance ** 2 for s in traj.samples])
    e2 = np.array([float(np.linalg.norm(s.x - x_star) ** 2) for s in traj.samples])
    slacks = []
    for k in range(1, len(traj.samples) - 1):
        s = traj.samples[k]
        lam = schedule(s.t)
        span = ts[k + 1] - ts[k - 1]
        res_sq = s.residual ** 2
        v_sq = (lam * s.residual) ** 2
        lhs_fix = (d2[k + 1] - d2[k - 1]) / span
        lhs_star = (e2[k + 1] - e2[k - 1]) / span
        slacks.append(-lam * res_sq - lhs_fix)
        slacks.append(-lam * (1.0 - lam) * res_sq - v_sq - lhs_star)
    return _report("descent of squared distances along the flow", slacks, tol)


def check_combination_bound(
    ops: list[Operator],
    weights,
    rhos,
    points,
    oracle: FixSetOracle,
) -> InequalityReport:
    """Check sum_i w_i rho_i ||x - T_i(x)||^2 <= 2 d(x, Fix T) ||x - T(x)||
    with T the convex combination of the ops (all sharing the fixed set of the
    oracle)."""
    rhos = [float(r) for r in rhos]
    _require_rhos(ops, rhos)
    T = convex_combination(ops, weights)
    w = T.meta.weights
    slacks = []
    for p in points:
        x = as_point(p, T.dim)
        tx = T(x)
        lhs = sum(wi * ri * float(np.linalg.norm(x - op(x)) ** 2)
                  for wi, ri, op in zip(w, rhos, ops))
        rhs = 2.0 * oracle.distance_to(x).distance * float(np.linalg.norm(x - tx))
        slacks.append(rhs - lhs)
    return _report("combination residual bound (weighted constituents)", slacks, 1e-10)


def check_composition_bound(
    ops: list[Operator],
    rhos,
    points,
    oracle: FixSetOracle,
) -> InequalityReport:
    """Check sum_i rho_i ||Q_{i-1}(x) - Q_i(x)||^2 <= 2 d(x, Fix T) ||x - T(x)||
    where Q_0 = Id, Q_i = T_i ... T_1 and T is the full composition."""
    rhos = [float(r) for r in rhos]
    _require_rhos(ops, rhos)
    T = compose(ops)
    slacks = []
    for p in points:
        x = as_point(p, T.dim)
        lhs = 0.0
        q_prev = x
        for op, rho in zip(ops, rhos):
            q = op(q_prev)
            lhs += rho * float(np.linalg.norm(q_prev - q) ** 2)
            q_prev = q
        tx = q_prev
        rhs = 2.0 * oracle.distance_to(x).distance * float(np.linalg.norm(x - tx))
        slacks.append(rhs - lhs)
    return _report("composition residual bound (partial stages)", slacks, 1e-10)


def _require_rhos(ops: list[Operator], rhos: list[float]) -> None:
    if len(ops) != len(rhos):
        raise UsageError(f"{len(ops)} operators but {len(rhos)} moduli")
    for i, (op, rho) in enumerate(zip(ops, rhos)):
        if op.meta.rho is None:
            raise UsageError(f"operator {i} ({op.label}) carries no SQNE modulus")
        if abs(op.meta.rho - rho) > 1e-12 * max(1.0, rho):
            raise UsageError(
                f"operator {i} ({op.label}) has modulus {op.meta.rho}, expected {rho}"
            )


# ---------------------------------------------------------------------------
# Operator certificates (sampled)
# ---------------------------------------------------------------------------

NONEXPANSIVE_TOL = 1e-12
CERTIFICATE_TOL = 1e-10


def check_nonexpansiveness(op: Operator, n_pairs: int = 1000, seed: int = 0,
                           radius: float = 10.0) -> InequalityReport:
    """Sampled certificate ||T(x)-T(y)|| <= ||x-y|| on random pairs in a ball."""
    region = Region(np.zeros(op.dim), radius)
    pts = sample_region(region, 2 * n_pairs, seed)
    slacks = []
    for i in range(n_pairs):
        x, y = pts[2 * i], pts[2 * i + 1]
        slacks.append(float(np.linalg.norm(x - y)) - float(np.linalg.norm(op(x) - op(y))))
    return _report(f"nonexpansiveness certificate [{op.label}]", slacks,
                   NONEXPANSIVE_TOL)


def check_averagedness(op: Operator, n_pairs: int = 500, seed: int = 0,
                       radius: float = 10.0) -> InequalityReport:
    """Sampled certificate for meta.alpha:
    ||Tx-Ty||^2 + ((1-a)/a)||(Id-T)x-(Id-T)y||^2 <= ||x-y||^2."""
    if op.meta.alpha is None:
        raise UsageError(f"operator {op.label} declares no averagedness constant")
    a = op.meta.alpha
    region = Region(np.zeros(op.dim), radius)
    pts = sample_region(region, 2 * n_pairs, seed)
    slacks = []
    for i in range(n_pairs):
        x, y = pts[2 * i], pts[2 * i + 1]
        tx, ty = op(x), op(y)
        lhs = float(np.linalg.norm(tx - ty) ** 2)
        lhs += (1.0 - a) / a * float(np.linalg.norm((x - tx) - (y - ty)) ** 2)
        slacks.append(float(np.linalg.norm(x - y) ** 2) - lhs)
    return _report(f"averagedness certificate [{op.label}]", slacks, CERTIFICATE_TOL)


def check_sqne(op: Operator, oracle: Optional[FixSetOracle] = None,
               n_points: int = 500, seed: int = 0,
               radius: float = 10.0) -> InequalityReport:
    """Sampled certificate for meta.rho against the nearest fixed point:
    ||Tx - x*||^2 + rho ||x - Tx||^2 <= ||x - x*||^2."""
    if op.meta.rho is None:
        raise UsageError(f"operator {op.label} declares no SQNE modulus")
    oracle = oracle or op.fix_oracle
    if oracle is None:
        raise UsageError(f"operator {op.label} has no fixed-set oracle")
    rho = op.meta.rho
    region = Region(np.zeros(op.dim), radius)
    pts = sample_region(region, n_points, seed)
    slacks = []
    for x in pts:
        x_star = oracle.distance_to(x).witness
        tx = op(x)
        lhs = float(np.linalg.norm(tx - x_star) ** 2)
        lhs += rho * float(np.linalg.norm(x - tx) ** 2)
        slacks.append(float(np.linalg.norm(x - x_star) ** 2) - lhs)
    return _report(f"SQNE certificate [{op.label}]", slacks, CERTIFICATE_TOL)


# ---------------------------------------------------------------------------
# Core identities
# ---------------------------------------------------------------------------

def affine_combination_identity_gap(alpha: float, u, v) -> float:
    """Relative gap in
    ||(1-a)u + av||^2 + a(1-a)||u-v||^2 = (1-a)||u||^2 + a||v||^2."""
    u = as_point(u)
    v = as_point(v, u.shape[0])
    lhs = float(np.linalg.norm((1.0 - alpha) * u + alpha * v) ** 2)
    lhs += alpha * (1.0 - alpha) * float(np.linalg.norm(u - v) ** 2)
    rhs = (1.0 - alpha) * float(np.linalg.norm(u) ** 2) + alpha * float(np.linalg.norm(v) ** 2)
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def distance_sq_gradient_gap(set_: PrimitiveSet, x, step: float = 1e-5) -> float:
    """Relative gap between the central-difference gradient of d^2(., C) and
    the closed form 2(x - P_C x)."""
    x = as_point(x, set_.dim)
    analytic = 2.0 * (x - set_.project(x))
    fd = np.zeros_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        fd[i] = (set_.distance(x + e) ** 2 - set_.distance(x - e) ** 2) / (2.0 * step)
    scale = max(1.0, float(np.linalg.norm(analytic)))
    return float(np.linalg.norm(fd - analytic)) / scale


IDENTITY_REL_TOL = 1e-12
GRADIENT_REL_TOL = 1e-6


def random_primitive_set(rng: np.random.Generator, dim: int) -> PrimitiveSet:
    """One random primitive set of a random variant, for identity sweeps."""
    kind = rng.integers(0, 5)
    if kind == 0:
        return HalfSpace(rng.standard_normal(dim) + 0.1, float(rng.standard_normal()))
    if kind == 1:
        return Hyperplane(rng.standard_normal(dim) + 0.1, float(rng.standard_normal()))
    if kind == 2:
        k = int(rng.integers(0, dim))
        return AffineSubspace(rng.standard_normal((dim, k)), rng.standard_normal(dim))
    if kind == 3:
        lo = rng.standard_normal(dim)
        return Box(lo, lo + rng.random(dim) * 2.0)
    return Ball(rng.standard_normal(dim), float(rng.random() + 0.5))


def check_core_identities(n_samples: int = 1000, seed: int = 0) -> InequalityReport:
    """Sweep the affine-combination identity (relative tol 1e-12) and the
    distance-squared gradient identity (relative tol 1e-6, finite differences
    at step 1e-5) on random data.

    The two parts have different tolerances, so the report's slack is the
    worst remaining headroom (part tolerance minus observed relative error)
    and the report tolerance is 0: passed still means worst_slack >= -tol.
    """
    rng = np.random.default_rng(seed)
    headrooms = []
    for _ in range(n_samples):
        dim = int(rng.integers(1, 9))
        alpha = float(rng.uniform(-2.0, 2.0))
        u = rng.standard_normal(dim) * 2.0
        v = rng.standard_normal(dim) * 2.0
        headrooms.append(IDENTITY_REL_TOL - affine_combination_identity_gap(alpha, u, v))
    n_grad = max(n_samples // 10, 1)
    for _ in range(n_grad):
        dim = int(rng.integers(2, 6))
        set_ = random_primitive_set(rng, dim)
        x = rng.standard_normal(dim) * 3.0
        headrooms.append(GRADIENT_REL_TOL - distance_sq_gradient_gap(set_, x))
    report = _report("affine-combination and distance-gradient identities",
                     headrooms, 0.0)
    return report


def hoelder_exponent_domination_constant(b: float, theta: float, gamma: float) -> float:
    """Smallest M with a^theta <= M a^gamma on [0, b] when 0 < gamma <= theta."""
    if not 0.0 < gamma <= theta:
        raise UsageError("need 0 < gamma <= theta")
    if not b > 0.0:
        raise UsageError("need b > 0")
    return float(b ** (theta - gamma))
