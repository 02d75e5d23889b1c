"""Operator abstraction, proximal maps, and the combinators used throughout.

Every constructor here yields a nonexpansive self-map of R^n. Metadata records
an averagedness constant alpha and/or a strong-quasinonexpansiveness modulus
rho only when the construction certifies one; combinators that cannot certify
a modulus leave it unset rather than fabricate a value.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConstructionError, UsageError
from .fixset import ExactSet, FixSetOracle
from .sets import Ball, Box, HalfSpace, Hyperplane, AffineSubspace, PrimitiveSet
from .validation import as_matrix, as_point

__all__ = [
    "OperatorMeta", "Operator", "SimpleFunction", "Indicator", "L1Norm",
    "Quadratic", "project", "prox", "apply", "identity", "projector",
    "reflect", "douglas_rachford", "forward_backward", "convex_combination",
    "compose", "relax",
    "HalfSpace", "Hyperplane", "AffineSubspace", "Box", "Ball", "PrimitiveSet",
]

_META_CONSISTENCY_TOL = 1e-12


@dataclass(frozen=True)
class OperatorMeta:
    """What is certified about an operator.

    alpha in (0,1) means T = (1-alpha)Id + alpha R with R nonexpansive; such a
    T has SQNE modulus rho = (1-alpha)/alpha, so setting alpha fills rho in.
    ``weights``/``children`` record the constituents of combinators so that
    downstream inequality checks can consume the per-constituent moduli.
    """

    label: str = ""
    alpha: Optional[float] = None
    rho: Optional[float] = None
    weights: Optional[tuple[float, ...]] = None
    children: tuple["OperatorMeta", ...] = ()

    def __post_init__(self):
        if self.alpha is not None:
            if not 0.0 < self.alpha < 1.0:
                raise ConstructionError(f"alpha must lie in (0,1), got {self.alpha}")
            implied = (1.0 - self.alpha) / self.alpha
            if self.rho is None:
                object.__setattr__(self, "rho", implied)
            elif abs(self.rho - implied) > _META_CONSISTENCY_TOL * max(1.0, implied):
                raise ConstructionError(
                    f"rho={self.rho} inconsistent with alpha={self.alpha} "
                    f"(expected {implied})"
                )
        if self.rho is not None and not self.rho > 0.0:
            raise ConstructionError(f"rho must be positive, got {self.rho}")


@dataclass(frozen=True, eq=False)
class Operator:
    """A deterministic self-map of R^dim with metadata and an optional Fix-set oracle."""

    fn: Callable[[np.ndarray], np.ndarray]
    dim: int
    meta: OperatorMeta = field(default_factory=OperatorMeta)
    fix_oracle: Optional[FixSetOracle] = None

    def __call__(self, x) -> np.ndarray:
        x = as_point(x, self.dim)
        return np.asarray(self.fn(x), dtype=float)

    @property
    def label(self) -> str:
        return self.meta.label or "operator"


def apply(op: Operator, x) -> np.ndarray:
    """Evaluate ``op`` at ``x``. Pure; dimension-checked."""
    return op(x)


def project(set_: PrimitiveSet, x) -> np.ndarray:
    """Nearest point of ``set_`` to ``x``."""
    return set_.project(as_point(x, set_.dim))


# ---------------------------------------------------------------------------
# Simple functions with closed-form proximal maps
# ---------------------------------------------------------------------------

class SimpleFunction:
    """Proper lsc convex function with a closed-form proximal map."""

    dim: Optional[int] = None  # None = any dimension

    def value(self, x) -> float:
        raise NotImplementedError

    def prox(self, x, step: float) -> np.ndarray:
        raise NotImplementedError


class Indicator(SimpleFunction):
    """Indicator of a primitive set; its prox is the projection, step-independent."""

    def __init__(self, set_: PrimitiveSet):
        self.set = set_
        self.dim = set_.dim

    def value(self, x) -> float:
        return 0.0 if self.set.contains(x) else float("inf")

    def prox(self, x, step: float) -> np.ndarray:
        return self.set.project(x)


class L1Norm(SimpleFunction):
    """weight * ||x||_1; prox is coordinatewise soft thresholding."""

    def __init__(self, weight: float = 1.0):
        if weight < 0.0:
            raise ConstructionError("l1 weight must be nonnegative")
        self.weight = float(weight)

    def value(self, x) -> float:
        return self.weight * float(np.sum(np.abs(as_point(x))))

    def prox(self, x, step: float) -> np.ndarray:
        x = as_point(x)
        thr = step * self.weight
        return np.sign(x) * np.maximum(np.abs(x) - thr, 0.0)


class Quadratic(SimpleFunction):
    """f(x) = 1/2 x'Qx - c'x for symmetric PSD Q; prox solves (I + tQ)z = x + tc."""

    def __init__(self, Q, c):
        self.c = as_point(c, name="c")
        self.Q = as_matrix(Q, "Q")
        self.dim = self.c.shape[0]
        if self.Q.shape != (self.dim, self.dim):
            raise ConstructionError(f"Q must be {self.dim}x{self.dim}")
        if not np.allclose(self.Q, self.Q.T, atol=1e-12):
            raise ConstructionError("Q must be symmetric")
        eigs = np.linalg.eigvalsh(self.Q)
        if eigs[0] < -1e-10:
            raise ConstructionError(f"Q must be PSD (min eigenvalue {eigs[0]:.3e})")
        self.max_eig = float(eigs[-1])

    def value(self, x) -> float:
        x = as_point(x, self.dim)
        return 0.5 * float(x @ self.Q @ x) - float(self.c @ x)

    def prox(self, x, step: float) -> np.ndarray:
        x = as_point(x, self.dim)
        A = np.eye(self.dim) + step * self.Q
        return np.linalg.solve(A, x + step * self.c)


def prox(fn: SimpleFunction, step: float, x) -> np.ndarray:
    """argmin_z { step*fn(z) + 1/2 ||z - x||^2 }."""
    if not step > 0.0:
        raise UsageError(f"prox step must be positive, got {step}")
    if fn.dim is not None:
        x = as_point(x, fn.dim)
    return fn.prox(x, float(step))


# ---------------------------------------------------------------------------
# Operator constructors and combinators
# ---------------------------------------------------------------------------

def identity(dim: int) -> Operator:
    return Operator(lambda x: x, dim, OperatorMeta(label="Id"))


def projector(set_: PrimitiveSet) -> Operator:
    """Nearest-point projector; firmly nonexpansive, i.e. 1/2-averaged and 1-SQNE."""
    meta = OperatorMeta(label=f"P[{set_.describe()}]", alpha=0.5)
    return Operator(set_.project, set_.dim, meta, fix_oracle=ExactSet(set_))


def reflect(set_: PrimitiveSet) -> Operator:
    """x -> 2 P(x) - x. Nonexpansive but not averaged; fixed points are the set itself."""

    def fn(x):
        return 2.0 * set_.project(x) - x

    meta = OperatorMeta(label=f"R[{set_.describe()}]")
    return Operator(fn, set_.dim, meta, fix_oracle=ExactSet(set_))


def douglas_rachford(set_l: PrimitiveSet, set_j: PrimitiveSet,
                     fix_oracle: Optional[FixSetOracle] = None) -> Operator:
    """x -> x + P_j(2 P_l x - x) - P_l x, the half-averaged reflect-reflect map.

    The fixed-point set is not derived from the two sets (it can be larger
    than their intersection); declare it via ``fix_oracle`` when known.
    """
    if set_l.dim != set_j.dim:
        raise UsageError("Douglas-Rachford sets must share one dimension")

    def fn(x):
        pl = set_l.project(x)
        return x + set_j.project(2.0 * pl - x) - pl

    meta = OperatorMeta(label=f"DR[{set_l.describe()}, {set_j.describe()}]", alpha=0.5)
    return Operator(fn, set_l.dim, meta, fix_oracle=fix_oracle)


def forward_backward(g: SimpleFunction, Q, c, lipschitz: float, step: float,
                     fix_oracle: Optional[FixSetOracle] = None) -> Operator:
    """x -> prox_{step*g}(x - step*(Qx - c)) for the smooth part 1/2 x'Qx - c'x.

    ``lipschitz`` must bound the largest eigenvalue of Q; the admissible step
    range (0, 2/lipschitz) is what certifies alpha = 2/(4 - step*lipschitz).
    The fixed-point set (the constrained minimizers) is declared via
    ``fix_oracle`` when known, never inferred.
    """
    c = as_point(c, name="c")
    Q = as_matrix(Q, "Q")
    dim = c.shape[0]
    if Q.shape != (dim, dim):
        raise ConstructionError(f"Q must be {dim}x{dim}")
    if not np.allclose(Q, Q.T, atol=1e-12):
        raise ConstructionError("Q must be symmetric")
    eigs = np.linalg.eigvalsh(Q)
    if eigs[0] < -1e-10:
        raise ConstructionError("Q must be PSD")
    if not lipschitz > 0.0:
        raise ConstructionError("lipschitz bound must be positive")
    if eigs[-1] > lipschitz * (1.0 + 1e-12) + 1e-12:
        raise ConstructionError(
            f"lipschitz={lipschitz} does not bound the largest eigenvalue {eigs[-1]:.6g}"
        )
    if not 0.0 < step < 2.0 / lipschitz:
        raise ConstructionError(
            f"step must lie in (0, {2.0 / lipschitz:.6g}) for the operator to be averaged"
        )
    if g.dim is not None and g.dim != dim:
        raise UsageError(f"g has dimension {g.dim}, smooth part has {dim}")

    def fn(x):
        return g.prox(x - step * (Q @ x - c), step)

    alpha = 2.0 / (4.0 - step * lipschitz)
    meta = OperatorMeta(label="forward_backward", alpha=alpha)
    return Operator(fn, dim, meta, fix_oracle=fix_oracle)


def convex_combination(ops: list[Operator], weights) -> Operator:
    """x -> sum_i w_i T_i(x). Weights must arrive normalized; no silent rescale."""
    if not ops:
        raise UsageError("convex_combination needs at least one operator")
    weights = [float(w) for w in weights]
    if len(weights) != len(ops):
        raise UsageError(f"{len(ops)} operators but {len(weights)} weights")
    if any(w <= 0.0 for w in weights):
        raise UsageError("weights must be strictly positive")
    if abs(sum(weights) - 1.0) > 1e-12:
        raise UsageError(f"weights must sum to 1 within 1e-12, got {sum(weights)!r}")
    dim = ops[0].dim
    if any(op.dim != dim for op in ops):
        raise UsageError("all operators must share one dimension")

    w = tuple(weights)

    def fn(x):
        out = np.zeros_like(x)
        for wi, op in zip(w, ops):
            out = out + wi * op(x)
        return out

    meta = OperatorMeta(
        label="combination[" + ", ".join(op.label for op in ops) + "]",
        weights=w,
        children=tuple(op.meta for op in ops),
    )
    return Operator(fn, dim, meta)


def compose(ops: list[Operator]) -> Operator:
    """x -> T_n(...T_2(T_1(x))...) with ops[0] applied first."""
    if not ops:
        raise UsageError("compose needs at least one operator")
    dim = ops[0].dim
    if any(op.dim != dim for op in ops):
        raise UsageError("all operators must share one dimension")

    def fn(x):
        for op in ops:
            x = op(x)
        return x

    meta = OperatorMeta(
        label="composition[" + ", ".join(op.label for op in ops) + "]",
        children=tuple(op.meta for op in ops),
    )
    return Operator(fn, dim, meta)


def relax(op: Operator, lam: float) -> Operator:
    """x -> (1-lam) x + lam T(x) for lam in [0,1].

    For nonexpansive T and 0 < lam < 1 the result is lam-averaged by
    definition, so meta.alpha is set; the endpoints certify nothing new.
    """
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise UsageError(f"relaxation parameter must lie in [0,1], got {lam}")

    def fn(x):
        return (1.0 - lam) * x + lam * op(x)

    alpha = lam if 0.0 < lam < 1.0 else None
    meta = OperatorMeta(label=f"relax[{op.label}, {lam:g}]", alpha=alpha)
    return Operator(fn, op.dim, meta, fix_oracle=op.fix_oracle if lam > 0.0 else None)
