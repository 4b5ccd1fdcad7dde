import numpy as np
import pytest

from app import quadrature
from app.exceptions import DomainError


@pytest.mark.parametrize("d2", [1, 2, 3])
def test_sphere_rule_weights_sum_to_the_area(d2):
    points, weights = quadrature.sphere_rule(d2, 8)
    assert np.sum(weights) == pytest.approx(quadrature.sphere_area(d2))
    assert np.linalg.norm(points, axis=1) == pytest.approx(np.ones(len(points)))


def test_sphere_rule_integrates_quadratics():
    points, weights = quadrature.sphere_rule(3, 8)
    assert np.dot(weights, points[:, 2] ** 2) == pytest.approx(4 * np.pi / 3)


def test_sphere_rule_is_limited_to_three_dimensions():
    with pytest.raises(DomainError):
        quadrature.sphere_rule(4, 8)


def test_composite_legendre_integrates_polynomials():
    nodes, weights = quadrature.composite_legendre(4, 0.0, 2.0, 3)
    assert np.dot(weights, nodes**5) == pytest.approx(2.0**6 / 6)


def test_gauss_laguerre_domain():
    with pytest.raises(DomainError):
        quadrature.gauss_laguerre(8, -1.0)


def test_low_discrepancy_samples():
    pts = quadrature.sphere_points(3, 64)
    assert np.linalg.norm(pts, axis=1) == pytest.approx(np.ones(64))
    assert np.array_equal(pts, quadrature.sphere_points(3, 64))
    assert not np.array_equal(pts, quadrature.sphere_points(3, 64, seed=1))
    box = quadrature.box_points(2, 32)
    assert np.all(np.abs(box) <= 1.0)
