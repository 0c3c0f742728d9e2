"""Symmetric quadrature rules on the reference triangle.

Points are stored in barycentric coordinates and weights are normalized to
sum to 1, so the physical rule on a cell tau is sum_q w_q |tau| f(x_q).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TriangleQuadrature:
    name: str
    degree: int              # polynomial degree integrated exactly
    points: np.ndarray       # (nq, 3) barycentric coordinates
    weights: np.ndarray      # (nq,) weights summing to 1


def _orbit3(a: float) -> list[tuple[float, float, float]]:
    b = 0.5 * (1.0 - a)
    return [(a, b, b), (b, a, b), (b, b, a)]


# Degree-4 two-orbit rule (6 points); coordinates are the exact algebraic
# values rounded to double precision.
_D4_A1 = 0.81684757298045851308
_D4_W1 = 0.10995174365532186764
_D4_A2 = 0.10810301816807022736
_D4_W2 = 0.22338158967801146569

_RULES = {
    1: TriangleQuadrature(
        name="centroid",
        degree=1,
        points=np.array([[1.0 / 3.0] * 3]),
        weights=np.array([1.0]),
    ),
    2: TriangleQuadrature(
        name="midpoint-3",
        degree=2,
        points=np.array(_orbit3(0.0)),
        weights=np.full(3, 1.0 / 3.0),
    ),
    4: TriangleQuadrature(
        name="dunavant-6",
        degree=4,
        points=np.array(_orbit3(_D4_A1) + _orbit3(_D4_A2)),
        weights=np.array([_D4_W1] * 3 + [_D4_W2] * 3),
    ),
}


def triangle_quadrature(degree: int = 4) -> TriangleQuadrature:
    """Smallest stocked rule exact for polynomials of the given degree."""
    for d in sorted(_RULES):
        if d >= degree:
            return _RULES[d]
    raise ValueError(f"no stocked triangle rule of degree >= {degree}")
