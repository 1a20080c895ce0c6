"""Exactness checks for the cell and edge quadrature rules.

The oracle for triangle monomials is the closed form
int_T x^i y^j dx dy = i! j! / (i + j + 2)!  on the reference triangle
(0,0),(1,0),(0,1), evaluated here in exact integer arithmetic.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from stokesbiot.quadrature import QuadratureRule, edge_rule, triangle_rule


def tri_monomial_exact(i, j):
    return Fraction(math.factorial(i) * math.factorial(j), math.factorial(i + j + 2))


STOCKED = [1, 2, 4, 7]


@pytest.mark.parametrize("degree", STOCKED)
def test_triangle_monomial_exactness(degree):
    rule = triangle_rule(degree)
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            x = rule.points[:, 0]
            y = rule.points[:, 1]
            approx = float(np.dot(rule.weights, x**i * y**j))
            exact = float(tri_monomial_exact(i, j))
            assert approx == pytest.approx(exact, rel=1e-14, abs=1e-15), (
                degree,
                i,
                j,
            )


@pytest.mark.parametrize("degree", STOCKED)
def test_triangle_rule_well_formed(degree):
    rule = triangle_rule(degree)
    assert rule.weights.sum() == pytest.approx(0.5, rel=1e-15)
    assert np.all(rule.weights > 0)
    x, y = rule.points[:, 0], rule.points[:, 1]
    # closed triangle: the degree-2 rule sits on edge midpoints
    assert np.all(x >= 0) and np.all(y >= 0) and np.all(x + y <= 1 + 1e-15)
    assert rule.degree >= degree
    assert rule.n == len(rule.weights) == len(rule.points)


def test_triangle_rule_promotes_to_next_stocked_degree():
    assert triangle_rule(3).degree == 4
    assert triangle_rule(5).degree == 7
    assert triangle_rule(0).degree == 1


def test_triangle_rule_degree_too_high():
    with pytest.raises(ValueError):
        triangle_rule(8)


def test_degree7_rule_is_twelve_points():
    assert triangle_rule(7).n == 12


@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4, 5, 7, 9])
def test_edge_rule_polynomial_exactness(degree):
    rule = edge_rule(degree)
    for k in range(degree + 1):
        approx = float(np.dot(rule.weights, rule.points**k))
        assert approx == pytest.approx(1.0 / (k + 1), rel=1e-14), (degree, k)
    assert np.all(rule.weights > 0)
    assert np.all((rule.points > 0) & (rule.points < 1))


def test_rules_are_frozen():
    rule = triangle_rule(2)
    assert isinstance(rule, QuadratureRule)
    with pytest.raises(AttributeError):
        rule.degree = 3
