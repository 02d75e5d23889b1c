"""Fixed-point-set oracles and distance computation d(x, Fix T).

The distance to a fixed-point set is the quantity every rate theorem here is
phrased in, so oracles return a ``DistanceResult`` carrying the witness point
and a measured certificate of how well the witness satisfies the constraints,
not just a number.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, ConvergenceError, UsageError
from .sets import PrimitiveSet, is_affine
from .validation import as_point

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True)
class DistanceResult:
    """Distance to a target set, with the nearest point found.

    ``witness`` lies in the target set up to ``certified_tol`` (measured, not
    assumed) and ``distance`` is exactly ``||x - witness||`` as computed.
    """

    distance: float
    witness: np.ndarray
    certified_tol: float


def residual(op, x) -> float:
    """||x - T(x)||, the quantity whose vanishing certifies a fixed point."""
    x = as_point(x, op.dim)
    return float(np.linalg.norm(x - op(x)))


def _affine_rows(sets: list[PrimitiveSet]) -> tuple[np.ndarray, np.ndarray]:
    """Stack each affine set as rows of an equality system R z = r."""
    rows, rhs = [], []
    for s in sets:
        if type(s).__name__ == "Hyperplane":
            rows.append(s.normal)
            rhs.append(s.offset)
        else:  # AffineSubspace: x in set  <=>  (I - QQ^T)(x - offset) = 0
            comp = np.eye(s.dim) - s.onb @ s.onb.T
            rows.append(comp)
            rhs.append(comp @ s.offset)
    R = np.vstack([np.atleast_2d(r) for r in rows])
    r = np.concatenate([np.atleast_1d(v) for v in rhs])
    return R, r


def affine_intersection_project(sets: list[PrimitiveSet], x) -> DistanceResult:
    """Exact nearest point of an intersection of hyperplanes/affine subspaces.

    Uses the minimum-norm correction x - R^+(Rx - r), which is the orthogonal
    projection onto {z : Rz = r} even when the stacked rows are dependent.
    """
    if not sets or not all(is_affine(s) for s in sets):
        raise UsageError("affine_intersection_project requires affine sets only")
    x = as_point(x, sets[0].dim)
    R, r = _affine_rows(sets)
    witness = x - np.linalg.pinv(R, rcond=1e-13) @ (R @ x - r)
    cert = max(s.distance(witness) for s in sets)
    return DistanceResult(float(np.linalg.norm(x - witness)), witness, cert)


def dykstra_project(
    sets: list[PrimitiveSet],
    x,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> DistanceResult:
    """Project ``x`` onto the intersection of ``sets`` by Dykstra's algorithm.

    Plain alternating projections only find *some* feasible point; the
    correction terms below are what make the limit the nearest point, which is
    what the distance function needs. Stops when the cycle-to-cycle movement of
    the iterate and the worst constraint violation both drop below ``tol``.

    Raises ConvergenceError carrying the best iterate if ``max_iter`` cycles
    are exhausted first.
    """
    if not sets:
        raise UsageError("need at least one set")
    if not tol > 0.0:
        raise UsageError("tol must be positive")
    dim = sets[0].dim
    for s in sets:
        if s.dim != dim:
            raise UsageError("all sets must share one ambient dimension")
    x = as_point(x, dim)

    z = x.copy()
    increments = [np.zeros(dim) for _ in sets]
    for _ in range(max_iter):
        z_prev = z
        for i, s in enumerate(sets):
            y = s.project(z + increments[i])
            increments[i] = z + increments[i] - y
            z = y
        move = float(np.linalg.norm(z - z_prev))
        violation = max(s.distance(z) for s in sets)
        if move < tol and violation < tol:
            return DistanceResult(float(np.linalg.norm(x - z)), z, violation)
    best = DistanceResult(float(np.linalg.norm(x - z)), z,
                          max(s.distance(z) for s in sets))
    raise ConvergenceError(
        f"Dykstra did not meet tol={tol:g} within {max_iter} cycles "
        f"(violation {best.certified_tol:.3e})",
        result=best,
    )


class FixSetOracle:
    """Computes d(x, F) for a declared fixed-point set F."""

    dim: int

    def distance_to(self, x) -> DistanceResult:
        raise NotImplementedError

    def describe(self) -> str:
        return type(self).__name__

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return self.describe()


class ExactSet(FixSetOracle):
    """Fix T known to be a primitive set with a closed-form projector."""

    def __init__(self, set_: PrimitiveSet):
        self.set = set_
        self.dim = set_.dim

    def distance_to(self, x) -> DistanceResult:
        x = as_point(x, self.dim)
        w = self.set.project(x)
        return DistanceResult(float(np.linalg.norm(x - w)), w, self.set.distance(w))

    def describe(self) -> str:
        return f"ExactSet({self.set.describe()})"


class SinglePoint(FixSetOracle):
    """Fix T known to be a single point."""

    def __init__(self, point):
        self.point = as_point(point, name="point")
        self.dim = self.point.shape[0]

    def distance_to(self, x) -> DistanceResult:
        x = as_point(x, self.dim)
        return DistanceResult(float(np.linalg.norm(x - self.point)), self.point.copy(), 0.0)

    def describe(self) -> str:
        return f"SinglePoint(dim={self.dim})"


class Intersection(FixSetOracle):
    """Fix T = intersection of primitive sets (the composite-operator case).

    Nonemptiness is asserted at construction by projecting the origin, so
    query cost stays predictable. All-affine collections use the exact linear
    solve; anything else runs Dykstra with this oracle's tolerances.
    """

    def __init__(self, sets: list[PrimitiveSet], tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER):
        if not sets:
            raise ConstructionError("intersection needs at least one set")
        dim = sets[0].dim
        if any(s.dim != dim for s in sets):
            raise ConstructionError("intersection members must share one dimension")
        if not tol > 0.0:
            raise ConstructionError("tol must be positive")
        self.sets = list(sets)
        self.dim = dim
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self._affine = all(is_affine(s) for s in self.sets)
        try:
            probe = self.distance_to(np.zeros(dim))
        except ConvergenceError as exc:
            raise ConstructionError(
                "intersection appears empty or the oracle failed from the origin: "
                f"{exc}"
            ) from exc
        if probe.certified_tol >= tol:
            raise ConstructionError(
                f"intersection appears empty: witness violation "
                f"{probe.certified_tol:.3e} >= tol {tol:g}"
            )

    def distance_to(self, x) -> DistanceResult:
        if self._affine:
            return affine_intersection_project(self.sets, x)
        return dykstra_project(self.sets, x, tol=self.tol, max_iter=self.max_iter)

    def describe(self) -> str:
        inner = ", ".join(s.describe() for s in self.sets)
        return f"Intersection({inner})"


def distance_to_fix(oracle: FixSetOracle, x) -> DistanceResult:
    """d(x, Fix T) for the declared oracle."""
    return oracle.distance_to(x)
