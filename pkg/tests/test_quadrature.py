import math

import numpy as np
import pytest

from overtest import quadrature as q


def test_gauss_order_one_and_two():
    r1 = q.gauss_rule(1)
    assert np.allclose(r1.nodes[:, 0], [0.0]) and np.allclose(r1.weights, [2.0])
    r2 = q.gauss_rule(2)
    assert np.allclose(np.sort(r2.nodes[:, 0]), [-0.5773502692, 0.5773502692], atol=1e-10)
    assert np.allclose(r2.weights, [1.0, 1.0])
    assert q.integrate_region(r2, lambda x: x[:, 0] ** 2) == pytest.approx(2.0 / 3.0, rel=1e-15)


def test_gauss_order_validation():
    with pytest.raises(ValueError):
        q.gauss_rule(0)


@pytest.mark.parametrize("order", [1, 2, 3, 5, 8])
def test_gauss_monomial_sweep(order):
    a, b = -0.3, 1.7
    r = q.gauss_rule(order, (a, b))
    assert r.weights.sum() == pytest.approx(b - a, rel=1e-12)
    for k in range(2 * order):
        exact = (b ** (k + 1) - a ** (k + 1)) / (k + 1)
        assert q.integrate_region(r, lambda x: x[:, 0] ** k) == pytest.approx(exact, rel=1e-12, abs=1e-13)


def test_tensor_rule_separable_moment():
    r = q.tensor_rule(4, ((0, 1), (0, 1)))
    assert q.integrate_region(r, lambda p: p[:, 0] ** 3 * p[:, 1] ** 3) == pytest.approx(1 / 16, rel=1e-14)


@pytest.mark.parametrize("order,cells", [(2, 1), (4, 3), (8, 2)])
def test_tensor_monomial_sweep(order, cells):
    box = ((0.0, 2.0), (-1.0, 0.5))
    r = q.tensor_rule(order, box, cells)
    assert r.weights.sum() == pytest.approx(3.0, rel=1e-12)
    for i in range(2 * order):
        for j in range(2 * order):
            ex = (2 ** (i + 1) / (i + 1)) * ((0.5 ** (j + 1) - (-1) ** (j + 1)) / (j + 1))
            got = q.integrate_region(r, lambda p: p[:, 0] ** i * p[:, 1] ** j)
            assert got == pytest.approx(ex, rel=1e-11, abs=1e-12)


def test_disk_measure_and_monomials():
    c, R = (0.3, -0.2), 0.7
    r = q.disk_rule(c, R, 8)
    assert q.integrate_region(r, lambda p: np.ones(len(p))) == pytest.approx(math.pi * R * R, rel=1e-10)
    assert np.all(np.linalg.norm(r.nodes - c, axis=1) <= R + 1e-14)
    # centered monomials x^2i y^2j have closed-form disk moments
    for i in range(0, 4):
        for j in range(0, 4 - i):
            ex = 2 * R ** (2 * i + 2 * j + 2) / (2 * i + 2 * j + 2) * math.gamma(i + .5) * math.gamma(j + .5) / math.gamma(i + j + 1)
            got = q.integrate_region(r, lambda p: (p[:, 0] - c[0]) ** (2 * i) * (p[:, 1] - c[1]) ** (2 * j))
            assert got == pytest.approx(ex, rel=1e-10)


def test_circle_divergence_theorem():
    R = 0.35
    r = q.circle_rule((0.1, 0.2), R, 32)
    # u = (x^2 + y^2)/4 about the circle's center: du/dn = r/2 on the circle
    c = np.array([0.1, 0.2])
    flux = q.integrate_boundary(r, lambda p: np.sum((p - c) / 2 * r.normals, axis=1))
    assert flux == pytest.approx(math.pi * R * R, rel=1e-12)
    assert r.weights.sum() == pytest.approx(2 * math.pi * R, rel=1e-12)


def test_square_boundary_rule():
    r = q.square_boundary_rule(4, ((0, 1), (0, 2)), 2)
    assert r.weights.sum() == pytest.approx(6.0, rel=1e-12)
    # flux of grad(x^2 + y^2)/4 through the rectangle equals its area
    flux = q.integrate_boundary(r, lambda p: np.sum(p / 2 * r.normals, axis=1))
    assert flux == pytest.approx(2.0, rel=1e-12)


def test_boundary_integration_needs_normals():
    with pytest.raises(ValueError):
        q.integrate_boundary(q.tensor_rule(2), lambda p: p[:, 0])


def test_integrand_shape_mismatch():
    with pytest.raises(ValueError):
        q.integrate_region(q.tensor_rule(2), lambda p: p)


def test_refinement_reduces_error():
    ex = (math.e - 1) ** 2
    errs = [abs(q.integrate_region(q.tensor_rule(n), lambda p: np.exp(p[:, 0] + p[:, 1])) - ex)
            for n in (1, 2, 3, 4, 5)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_clipped_ball_rule():
    inside = lambda p: (p[:, 0] >= 0) & (p[:, 1] >= 0)
    r = q.clipped_ball_rule((0.0, 0.0), 0.5, inside, 8, 8)
    assert np.all(inside(r.nodes))
    assert r.measure == pytest.approx(math.pi * 0.25 / 4, rel=2e-2)
    full = q.clipped_ball_rule((2.0, 2.0), 0.5, inside, 8, 8)
    assert full.measure == pytest.approx(math.pi * 0.25, rel=1e-2)
