"""Primitive convex sets with exact closed-form nearest-point projections.

Every set exposes ``project`` (the nearest-point map), ``distance`` and a
``contains`` membership test. Construction rejects degenerate parameters
(zero normals, empty balls, inverted boxes) so that downstream code can rely
on projections being well defined.
"""

import numpy as np

from .errors import ConstructionError
from .validation import as_matrix, as_point

# Rank decisions when orthonormalizing affine bases.
RANK_TOL = 1e-12


class PrimitiveSet:
    """A closed convex subset of R^n with an exact nearest-point projector."""

    dim: int

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x) -> float:
        """Euclidean distance from ``x`` to the set."""
        x = as_point(x, self.dim)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol: float = 1e-12) -> bool:
        return self.distance(x) <= tol

    def describe(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return self.describe()


class HalfSpace(PrimitiveSet):
    """{x : <a, x> <= b} for a nonzero normal a."""

    def __init__(self, normal, offset: float):
        self.normal = as_point(normal, name="normal")
        if not np.any(self.normal):
            raise ConstructionError("half-space normal must be nonzero")
        self.offset = float(offset)
        self.dim = self.normal.shape[0]
        self._nsq = float(self.normal @ self.normal)

    def project(self, x) -> np.ndarray:
        x = as_point(x, self.dim)
        excess = float(self.normal @ x) - self.offset
        if excess <= 0.0:
            return x
        return x - (excess / self._nsq) * self.normal


class Hyperplane(PrimitiveSet):
    """{x : <a, x> = b} for a nonzero normal a."""

    def __init__(self, normal, offset: float):
        self.normal = as_point(normal, name="normal")
        if not np.any(self.normal):
            raise ConstructionError("hyperplane normal must be nonzero")
        self.offset = float(offset)
        self.dim = self.normal.shape[0]
        self._nsq = float(self.normal @ self.normal)

    def project(self, x) -> np.ndarray:
        x = as_point(x, self.dim)
        return x - ((float(self.normal @ x) - self.offset) / self._nsq) * self.normal


class AffineSubspace(PrimitiveSet):
    """offset + span(columns of basis); basis may have zero columns (a single point).

    The basis is orthonormalized once at construction (SVD, rank tolerance
    ``RANK_TOL``), so projection is a single matrix-vector pass and exactly
    idempotent up to roundoff.
    """

    def __init__(self, basis, offset):
        self.offset = as_point(offset, name="offset")
        self.dim = self.offset.shape[0]
        basis = as_matrix(np.asarray(basis, dtype=float).reshape(self.dim, -1), "basis")
        if basis.shape[0] != self.dim:
            raise ConstructionError(
                f"basis has {basis.shape[0]} rows, offset has dimension {self.dim}"
            )
        if basis.shape[1] == 0:
            self.onb = np.zeros((self.dim, 0))
        else:
            u, s, _ = np.linalg.svd(basis, full_matrices=False)
            keep = s > RANK_TOL * max(s[0], 1.0)
            self.onb = u[:, keep]
        self.rank = self.onb.shape[1]

    def project(self, x) -> np.ndarray:
        x = as_point(x, self.dim)
        d = x - self.offset
        return self.offset + self.onb @ (self.onb.T @ d)


class Box(PrimitiveSet):
    """{x : lower <= x <= upper} componentwise."""

    def __init__(self, lower, upper):
        self.lower = as_point(lower, name="lower")
        self.upper = as_point(upper, dim=self.lower.shape[0], name="upper")
        if np.any(self.lower > self.upper):
            raise ConstructionError("box requires lower <= upper componentwise")
        self.dim = self.lower.shape[0]

    def project(self, x) -> np.ndarray:
        x = as_point(x, self.dim)
        return np.clip(x, self.lower, self.upper)


class Ball(PrimitiveSet):
    """{x : ||x - center|| <= radius} with radius > 0."""

    def __init__(self, center, radius: float):
        self.center = as_point(center, name="center")
        self.radius = float(radius)
        if not self.radius > 0.0:
            raise ConstructionError("ball radius must be positive")
        self.dim = self.center.shape[0]

    def project(self, x) -> np.ndarray:
        x = as_point(x, self.dim)
        d = x - self.center
        nrm = float(np.linalg.norm(d))
        if nrm <= self.radius:
            return x
        return self.center + (self.radius / nrm) * d


def is_affine(s: PrimitiveSet) -> bool:
    """True for sets whose intersection admits an exact linear-algebra projection."""
    return isinstance(s, (Hyperplane, AffineSubspace))
