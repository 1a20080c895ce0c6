"""Quadrature rules on the reference triangle and the unit interval.

Conventions
-----------
Cell rules live on the reference triangle with vertices (0,0), (1,0), (0,1);
points are stored in barycentric coordinates (l0, l1, l2) with x = l1, y = l2.
Weights sum to the reference measure 1/2, so a physical integral over a
triangle K of area |K| is  2*|K| * sum_q w_q f(x_q).

Edge rules live on [0,1] with weights summing to 1; a physical line integral
over an edge of length L is  L * sum_q w_q f(x_q).
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["QuadratureRule", "triangle_rule", "edge_rule"]


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights of a fixed rule, with its polynomial exactness degree.

    For cell rules `points` has shape (nq, 3) (barycentric); for edge rules it
    has shape (nq,) (parameter on [0,1]).
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def n(self):
        return self.weights.shape[0]


def _sym3(groups):
    pts, ws = [], []
    for a, w in groups:
        b = 1.0 - 2.0 * a
        pts += [(a, a, b), (a, b, a), (b, a, a)]
        ws += [w, w, w]
    return np.array(pts), np.array(ws)


def _cyclic3(groups):
    pts, ws = [], []
    for a, b, w in groups:
        c = 1.0 - a - b
        pts += [(a, b, c), (b, c, a), (c, a, b)]
        ws += [w, w, w]
    return np.array(pts), np.array(ws)


def _build_triangle_rules():
    rules = {}

    rules[1] = QuadratureRule(
        np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([0.5]), degree=1
    )

    # Edge-midpoint rule, exact to degree 2.
    pts = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    rules[2] = QuadratureRule(pts, np.full(3, 1 / 6), degree=2)

    # Classical symmetric 6-point rule, exact to degree 4.
    pts, ws = _sym3(
        [
            (0.445948490915965, 0.223381589678011 / 2),
            (0.091576213509771, 0.109951743655322 / 2),
        ]
    )
    rules[4] = QuadratureRule(pts, ws, degree=4)

    # 12-point rule, exact to degree 7: four cyclic 3-orbits, all points
    # interior and all weights positive.  Coefficients obtained by solving the
    # moment equations and polishing in 50-digit arithmetic; the test suite
    # re-verifies exactness on every monomial through degree 7.
    pts, ws = _cyclic3(
        [
            (0.51584233435359172, 0.27771616697639179, 0.06749318700980278),
            (0.32150249385198182, 0.62327204949109161, 0.043881408714446055),
            (0.66094919618673564, 0.30472650086816722, 0.028775042784981587),
            (0.062382265094402117, 0.067517867073916091, 0.026517028157436253),
        ]
    )
    rules[7] = QuadratureRule(pts, ws, degree=7)
    return rules


_TRIANGLE_RULES = _build_triangle_rules()
_EDGE_CACHE = {}


def triangle_rule(degree):
    """Smallest stocked triangle rule exact to at least `degree`."""
    for d in sorted(_TRIANGLE_RULES):
        if d >= degree:
            return _TRIANGLE_RULES[d]
    raise ValueError(f"no stocked triangle rule of degree >= {degree}")


def edge_rule(degree):
    """Gauss-Legendre rule on [0,1] exact to at least `degree`."""
    n = max(1, (degree + 2) // 2)  # n-point Gauss is exact to 2n-1
    if n not in _EDGE_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _EDGE_CACHE[n] = QuadratureRule(
            0.5 * (x + 1.0), 0.5 * w, degree=2 * n - 1
        )
    return _EDGE_CACHE[n]
