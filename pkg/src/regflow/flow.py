"""Integration of the relaxed fixed-point flow dx/dt = lambda(t)(T(x) - x).

Two modes share one metric pipeline: a continuous mode (adaptive or fixed-step
integrators approximating the strong global solution) and a discrete mode (the
relaxed iteration x_{k+1} = (1-lam_k) x_k + lam_k T(x_k)). The unit-step Euler
method is by definition that iteration, so both run the same update code and
produce bit-identical iterates.

The vector field is globally Lipschitz (T nonexpansive, lambda <= 1), so no
stability guard beyond standard adaptive control is needed.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, IntegrationError, UsageError
from .fixset import FixSetOracle
from .operators import Operator
from .validation import as_point

# Residual below which the final iterate is trusted as the limit point.
LIMIT_RESIDUAL_TOL = 1e-9

_UNIT_GRID_TOL = 1e-9


# ---------------------------------------------------------------------------
# Relaxation schedules
# ---------------------------------------------------------------------------

class LambdaSchedule:
    """Measurable relaxation function lambda: [0, inf) -> [0, 1].

    ``inf_value`` is inf lambda(t) and ``inf_product`` is inf lambda(1-lambda),
    both exact for the closed-form variants below.
    """

    inf_value: float
    inf_product: float

    def __call__(self, t: float) -> float:
        raise NotImplementedError

    def breakpoints(self, t_end: float) -> list[float]:
        """Discontinuity times in (0, t_end); integration restarts at each."""
        return []

    def is_unit_aligned(self) -> bool:
        """True when the schedule is constant on every interval [k, k+1)."""
        return False

    def describe(self) -> str:
        return type(self).__name__


class Constant(LambdaSchedule):
    def __init__(self, value: float):
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise UsageError(f"lambda must lie in [0,1], got {value}")
        self.value = value
        self.inf_value = value
        self.inf_product = value * (1.0 - value)

    def __call__(self, t: float) -> float:
        return self.value

    def is_unit_aligned(self) -> bool:
        return True

    def describe(self) -> str:
        return f"Constant({self.value:g})"


class PiecewiseConstant(LambdaSchedule):
    """values[i] on [times[i], times[i+1}); the last value extends to infinity."""

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise UsageError("times and values must be 1-D of equal length")
        if self.times.size == 0:
            raise UsageError("need at least one segment")
        if self.times[0] != 0.0:
            raise UsageError("first segment must start at t=0")
        if np.any(np.diff(self.times) <= 0.0):
            raise UsageError("times must be strictly increasing")
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise UsageError("values must lie in [0,1]")
        self.inf_value = float(self.values.min())
        self.inf_product = float((self.values * (1.0 - self.values)).min())

    def __call__(self, t: float) -> float:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.values[max(idx, 0)])

    def breakpoints(self, t_end: float) -> list[float]:
        return [float(t) for t in self.times[1:] if 0.0 < t < t_end]

    def is_unit_aligned(self) -> bool:
        return bool(np.all(np.abs(self.times - np.round(self.times)) < _UNIT_GRID_TOL))

    def describe(self) -> str:
        return f"PiecewiseConstant({self.times.size} segments)"


class Sinusoid(LambdaSchedule):
    """clip(offset + amplitude * sin(omega t), 0, 1), an analytic schedule.

    The clipped range is [clip(offset-|amplitude|), clip(offset+|amplitude|)]
    and v(1-v) is concave, so both infima sit at the range endpoints.
    """

    def __init__(self, offset: float, amplitude: float, omega: float):
        if not omega > 0.0:
            raise UsageError("omega must be positive")
        self.offset = float(offset)
        self.amplitude = float(amplitude)
        self.omega = float(omega)
        lo = min(max(self.offset - abs(self.amplitude), 0.0), 1.0)
        hi = min(max(self.offset + abs(self.amplitude), 0.0), 1.0)
        self.inf_value = lo
        self.inf_product = min(lo * (1.0 - lo), hi * (1.0 - hi))

    def __call__(self, t: float) -> float:
        v = self.offset + self.amplitude * np.sin(self.omega * t)
        return float(min(max(v, 0.0), 1.0))

    def describe(self) -> str:
        return f"Sinusoid({self.offset:g}, {self.amplitude:g}, {self.omega:g})"


# ---------------------------------------------------------------------------
# Integrator configuration
# ---------------------------------------------------------------------------

_METHODS = ("euler_unit", "euler", "rk4", "rk45")


@dataclass(frozen=True)
class IntegratorConfig:
    """How to march the flow: method, horizon, and which times to record.

    ``sample_times`` (adaptive method only) pins the recorded grid; otherwise
    every ``sample_stride``-th step is recorded. Endpoints are always kept.
    """

    method: str
    t_end: float
    h: Optional[float] = None
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    sample_stride: int = 1
    sample_times: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.method not in _METHODS:
            raise UsageError(f"unknown method {self.method!r}; choose from {_METHODS}")
        if not self.t_end > 0.0:
            raise UsageError("t_end must be positive")
        if self.method in ("euler", "rk4"):
            if self.h is None or not self.h > 0.0:
                raise UsageError(f"method {self.method!r} needs a positive step h")
        if self.method == "euler_unit":
            object.__setattr__(self, "h", 1.0)
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise UsageError("tolerances must be positive")
        if self.sample_stride < 1:
            raise UsageError("sample_stride must be a positive integer")
        if self.sample_times is not None:
            ts = tuple(float(t) for t in self.sample_times)
            if any(t < 0.0 or t > self.t_end + 1e-12 for t in ts):
                raise UsageError("sample_times must lie in [0, t_end]")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise UsageError("sample_times must be strictly increasing")
            if self.method != "rk45":
                raise UsageError("explicit sample_times require the rk45 method")
            object.__setattr__(self, "sample_times", ts)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrajectorySample:
    t: float
    x: np.ndarray
    residual: float
    speed: float
    dist_fix: Optional[float] = None


@dataclass
class Trajectory:
    samples: list[TrajectorySample]
    mode: str  # "continuous" | "discrete"
    schedule: Optional[LambdaSchedule]
    limit_estimate: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def states(self) -> np.ndarray:
        return np.array([s.x for s in self.samples])

    @property
    def dim(self) -> int:
        return self.samples[0].x.shape[0]

    def metric(self, name: str) -> np.ndarray:
        """Per-sample series: 'residual', 'dist_fix' or 'dist_to_limit'."""
        if name == "residual":
            return np.array([s.residual for s in self.samples])
        if name == "dist_fix":
            return np.array([np.nan if s.dist_fix is None else s.dist_fix
                             for s in self.samples])
        if name == "dist_to_limit":
            if self.limit_estimate is None:
                raise UsageError("trajectory has no limit_estimate; run longer or "
                                 "use another metric")
            xs = self.states()
            return np.linalg.norm(xs - self.limit_estimate[None, :], axis=1)
        raise UsageError(f"unknown metric {name!r}")

    def to_csv(self, path) -> None:
        """Write `t,x_0..x_{n-1},residual,dist_fix,speed` with 17 significant digits."""
        dim = self.dim
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"x_{i}" for i in range(dim)]
                            + ["residual", "dist_fix", "speed"])
            for s in self.samples:
                row = [_fmt(s.t)] + [_fmt(v) for v in s.x] + [_fmt(s.residual)]
                row.append("" if s.dist_fix is None else _fmt(s.dist_fix))
                row.append(_fmt(s.speed))
                writer.writerow(row)

    @staticmethod
    def from_csv(path) -> "Trajectory":
        samples = []
        try:
            fh = open(path, newline="")
        except OSError as exc:
            raise UsageError(f"cannot read trajectory CSV {path}: {exc}")
        with fh:
            reader = csv.reader(fh)
            header = next(reader)
            dim = len(header) - 4
            if dim < 1 or header[0] != "t" or header[-3:] != ["residual", "dist_fix", "speed"]:
                raise UsageError(f"{path}: not a trajectory CSV")
            for row in reader:
                t = float(row[0])
                x = np.array([float(v) for v in row[1:1 + dim]])
                res = float(row[1 + dim])
                dist = None if row[2 + dim] == "" else float(row[2 + dim])
                speed = float(row[3 + dim])
                samples.append(TrajectorySample(t, x, res, speed, dist))
        ts = np.array([s.t for s in samples])
        mode = "discrete" if np.all(ts == np.round(ts)) else "continuous"
        return Trajectory(samples, mode, schedule=None, info={"source": "csv"})


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# Metric evaluation
# ---------------------------------------------------------------------------

def _make_sample(op: Operator, schedule: LambdaSchedule, oracle: Optional[FixSetOracle],
                 t: float, x: np.ndarray) -> TrajectorySample:
    res = float(np.linalg.norm(x - op(x)))
    lam = schedule(t)
    dist = oracle.distance_to(x).distance if oracle is not None else None
    return TrajectorySample(float(t), x, res, lam * res, dist)


def _finalize(op: Operator, schedule: LambdaSchedule, oracle: Optional[FixSetOracle],
              points: list[tuple[float, np.ndarray]], mode: str, info: dict) -> Trajectory:
    samples = [_make_sample(op, schedule, oracle, t, x) for t, x in points]
    limit = samples[-1].x.copy() if samples[-1].residual < LIMIT_RESIDUAL_TOL else None
    return Trajectory(samples, mode, schedule, limit, info)


def sample_metrics(traj: Trajectory, op: Operator,
                   oracle: Optional[FixSetOracle] = None) -> Trajectory:
    """Recompute residual/speed (and dist_fix when an oracle is given). Idempotent.

    Oracle failures propagate with the index of the offending sample.
    """
    if traj.schedule is None:
        raise UsageError("trajectory carries no schedule; cannot recompute speed")
    new = []
    for i, s in enumerate(traj.samples):
        res = float(np.linalg.norm(s.x - op(s.x)))
        lam = traj.schedule(s.t)
        if oracle is not None:
            try:
                dist = oracle.distance_to(s.x).distance
            except ConvergenceError as exc:
                raise ConvergenceError(
                    f"oracle failed at sample {i} (t={s.t:g}): {exc}",
                    result=exc.result,
                ) from exc
        else:
            dist = s.dist_fix
        new.append(TrajectorySample(s.t, s.x, res, lam * res, dist))
    limit = new[-1].x.copy() if new[-1].residual < LIMIT_RESIDUAL_TOL else None
    return Trajectory(new, traj.mode, traj.schedule, limit, dict(traj.info))


# ---------------------------------------------------------------------------
# Discrete iteration (and unit-step Euler, which is the same update)
# ---------------------------------------------------------------------------

def _relaxed_step(x: np.ndarray, lam: float, tx: np.ndarray) -> np.ndarray:
    return (1.0 - lam) * x + lam * tx


def _run_discrete(op: Operator, x0: np.ndarray, lam_seq: list[float],
                  oracle: Optional[FixSetOracle], schedule: LambdaSchedule,
                  stride: int, info: dict) -> Trajectory:
    points = [(0.0, x0)]
    x = x0
    for k, lam in enumerate(lam_seq):
        x = _relaxed_step(x, lam, op(x))
        if (k + 1) % stride == 0 or k + 1 == len(lam_seq):
            points.append((float(k + 1), x))
    return _finalize(op, schedule, oracle, points, "discrete", info)


def _schedule_from(lambdas, K: int) -> tuple[list[float], LambdaSchedule]:
    if isinstance(lambdas, LambdaSchedule):
        return [float(lambdas(float(k))) for k in range(K)], lambdas
    if np.isscalar(lambdas):
        sched = Constant(float(lambdas))
        return [sched.value] * K, sched
    seq = [float(v) for v in lambdas]
    if len(seq) < K:
        raise UsageError(f"need at least {K} relaxation values, got {len(seq)}")
    seq = seq[:K]
    if any(not 0.0 <= v <= 1.0 for v in seq):
        raise UsageError("relaxation values must lie in [0,1]")
    return seq, PiecewiseConstant(np.arange(K, dtype=float), seq)


def km_iterate(op: Operator, x0, lambdas, K: int,
               oracle: Optional[FixSetOracle] = None) -> Trajectory:
    """Run x_{k+1} = (1-lam_k) x_k + lam_k T(x_k) for K steps.

    ``lambdas`` may be a sequence (at least K values), a scalar, or a
    LambdaSchedule sampled at integer times. Sample times are 0..K.
    """
    if K < 1:
        raise UsageError("K must be >= 1")
    x0 = as_point(x0, op.dim)
    lam_seq, schedule = _schedule_from(lambdas, int(K))
    return _run_discrete(op, x0, lam_seq, oracle, schedule, stride=1,
                         info={"method": "km", "K": int(K)})


# ---------------------------------------------------------------------------
# Continuous integration
# ---------------------------------------------------------------------------

def _segments(schedule: LambdaSchedule, t_end: float) -> list[tuple[float, float]]:
    cuts = [0.0] + schedule.breakpoints(t_end) + [t_end]
    return [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]


def _fixed_step_run(op, x0, schedule, config, oracle) -> Trajectory:
    h = float(config.h)
    rk4 = config.method == "rk4"

    def field_at(t, x):
        return schedule(t) * (op(x) - x)

    points = [(0.0, x0)]
    x = x0
    step_count = 0
    for a, b in _segments(schedule, config.t_end):
        n_steps = max(int(np.ceil((b - a) / h - 1e-12)), 1)
        t = a
        for i in range(n_steps):
            t_next = min(a + (i + 1) * h, b)
            dt = t_next - t
            if rk4:
                k1 = field_at(t, x)
                k2 = field_at(t + dt / 2, x + (dt / 2) * k1)
                k3 = field_at(t + dt / 2, x + (dt / 2) * k2)
                k4 = field_at(t + dt, x + dt * k3)
                x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            else:
                x = x + dt * field_at(t, x)
            t = t_next
            step_count += 1
            if step_count % config.sample_stride == 0 or t >= config.t_end - 1e-15:
                points.append((t, x))
    if points[-1][0] < config.t_end - 1e-15:
        points.append((config.t_end, x))
    info = {"method": config.method, "h": h, "steps": step_count}
    return _finalize(op, schedule, oracle, points, "continuous", info)


def _adaptive_run(op, x0, schedule, config, oracle) -> Trajectory:
    def field(t, x):
        return schedule(t) * (op(x) - x)

    want = None
    if config.sample_times is not None:
        want = np.asarray(config.sample_times, dtype=float)

    points = [(0.0, x0)]
    x = x0
    nfev = 0
    for a, b in _segments(schedule, config.t_end):
        t_eval = None
        if want is not None:
            inside = want[(want > a + 1e-15) & (want < b - 1e-15)]
            t_eval = np.unique(np.concatenate([inside, [b]]))
        sol = solve_ivp(field, (a, b), x, method="RK45", rtol=config.rel_tol,
                        atol=config.abs_tol, t_eval=t_eval, dense_output=False)
        nfev += sol.nfev
        if not sol.success:
            partial = _finalize(op, schedule, oracle, points, "continuous",
                                {"method": "rk45", "status": sol.status,
                                 "message": sol.message})
            raise IntegrationError(
                f"adaptive integration failed on [{a:g}, {b:g}]: {sol.message}",
                partial=partial,
            )
        ts, ys = sol.t, sol.y.T
        if want is None:
            # record every sample_stride-th accepted step, plus the endpoint
            for i in range(1, ts.size):
                if i % config.sample_stride == 0 or i == ts.size - 1:
                    points.append((float(ts[i]), ys[i]))
        else:
            for i in range(ts.size):
                wanted = bool(np.any(np.abs(want - ts[i]) <= 1e-12)) or ts[i] == config.t_end
                if wanted and ts[i] > points[-1][0] + 1e-15:
                    points.append((float(ts[i]), ys[i]))
        x = ys[-1]
    info = {"method": "rk45", "rel_tol": config.rel_tol, "abs_tol": config.abs_tol,
            "nfev": int(nfev)}
    return _finalize(op, schedule, oracle, points, "continuous", info)


def integrate_flow(op: Operator, x0, schedule: LambdaSchedule,
                   config: IntegratorConfig,
                   oracle: Optional[FixSetOracle] = None) -> Trajectory:
    """Approximate the strong global solution of dx/dt = lambda(t)(T(x) - x).

    x(0) = x0 exactly. Integration restarts at schedule discontinuities so no
    step straddles one. With the unit-step Euler method the run *is* the
    relaxed iteration and matches km_iterate bit for bit at integer times.
    """
    x0 = as_point(x0, op.dim)
    if config.method == "euler_unit":
        K = int(round(config.t_end))
        if abs(config.t_end - K) > _UNIT_GRID_TOL or K < 1:
            raise UsageError("euler_unit requires an integer t_end >= 1")
        if not schedule.is_unit_aligned():
            raise UsageError("euler_unit requires a schedule constant on unit intervals")
        lam_seq = [float(schedule(float(k))) for k in range(K)]
        traj = _run_discrete(op, x0, lam_seq, oracle, schedule,
                             stride=config.sample_stride,
                             info={"method": "euler_unit", "K": K})
        # unit-step Euler is the discrete iteration viewed in continuous time
        return traj
    if config.method in ("euler", "rk4"):
        return _fixed_step_run(op, x0, schedule, config, oracle)
    return _adaptive_run(op, x0, schedule, config, oracle)
