from math import factorial

import numpy as np
import pytest

from phplate.quadrature import MAX_EXACTNESS, quad_rule


def _tri_monomial(a, b):
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("d", [0, 1, 2, 5, 8, 13, 20])
def test_triangle_monomials(d):
    r = quad_rule("triangle", d)
    x, y = r.points.T
    for a in range(d + 1):
        for b in range(d + 1 - a):
            assert np.sum(r.weights * x**a * y**b) == pytest.approx(_tri_monomial(a, b), rel=1e-13)


@pytest.mark.parametrize("d", [0, 3, 6, 11])
def test_square_monomials_per_variable(d):
    r = quad_rule("square", d)
    x, y = r.points.T
    for a in range(d + 1):
        for b in range(d + 1):
            assert np.sum(r.weights * x**a * y**b) == pytest.approx(1 / ((a + 1) * (b + 1)), rel=1e-13)


def test_interval_and_positivity():
    r = quad_rule("interval", 9)
    assert np.sum(r.weights * r.points[:, 0] ** 9) == pytest.approx(0.1)
    for kind in ("interval", "square", "triangle"):
        rule = quad_rule(kind, 12)
        assert np.all(rule.weights > 0)


def test_triangle_points_inside():
    p = quad_rule("triangle", 15).points
    assert np.all(p >= 0) and np.all(p.sum(axis=1) <= 1)


def test_not_exact_beyond_degree():
    r = quad_rule("interval", 3)
    assert abs(np.sum(r.weights * r.points[:, 0] ** 4) - 0.2) > 1e-6


def test_rejections():
    with pytest.raises(ValueError):
        quad_rule("triangle", MAX_EXACTNESS + 1)
    with pytest.raises(ValueError):
        quad_rule("triangle", -1)
    with pytest.raises(ValueError):
        quad_rule("hexagon", 2)


def test_rules_are_read_only():
    r = quad_rule("square", 4)
    with pytest.raises(ValueError):
        r.weights[0] = 0.0
