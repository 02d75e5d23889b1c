import numpy as np
import pytest

import regflow as rf

SIN60 = np.sin(np.pi / 3)


@pytest.fixture
def two_lines():
    """Cyclic projections onto two lines through the origin at 60 degrees."""
    l1 = rf.Hyperplane([0.0, 1.0], 0.0)           # x-axis
    l2 = rf.Hyperplane([-SIN60, 0.5], 0.0)        # span{(cos60, sin60)}
    op = rf.compose([rf.projector(l1), rf.projector(l2)])
    oracle = rf.Intersection([l1, l2])
    return {"sets": (l1, l2), "op": op, "oracle": oracle}


@pytest.fixture
def tangent_pair():
    """Ball tangent to the x-axis at the origin; Fix of the composition is {0}."""
    ball = rf.Ball([0.0, 1.0], 1.0)
    line = rf.Hyperplane([0.0, 1.0], 0.0)
    op = rf.compose([rf.projector(ball), rf.projector(line)])
    oracle = rf.SinglePoint([0.0, 0.0])
    return {"sets": (ball, line), "op": op, "oracle": oracle}


@pytest.fixture
def zero_map():
    """x -> 0 as the projector onto the trivial affine subspace {0}."""
    return rf.projector(rf.AffineSubspace(np.zeros((1, 0)), [0.0]))


def pairs_in_ball(n, dim, radius=10.0, seed=0):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((2 * n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(2 * n) ** (1.0 / dim)
    pts = g * r[:, None]
    return pts[:n], pts[n:]
