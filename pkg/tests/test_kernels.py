import math

import numpy as np
import pytest
from scipy.special import kv

from overtest.kernels import RadialKernel, SmoothnessError, make_kernel
from conftest import fd_gradient, fd_laplacian


def matern_oracle(m, d, shape, r):
    # independent normalization through scipy's Bessel function
    nu = m - d / 2
    t = np.asarray(r, dtype=float) / shape
    return np.where(t > 0, t**nu * kv(nu, np.maximum(t, 1e-300)) / (math.gamma(nu) * 2 ** (nu - 1)), 1.0)


KERNELS = [
    RadialKernel("gaussian", shape=1.0, dim=2),
    RadialKernel("gaussian", shape=0.4, dim=1),
    RadialKernel("matern", 4.5, 1.0, 2),
    RadialKernel("matern", 6.5, 0.7, 2),
    RadialKernel("matern", 5.0, 0.5, 1),
    RadialKernel("multiquadric", shape=0.8, dim=2),
]


def test_gaussian_values():
    k = RadialKernel("gaussian", shape=1.0, dim=2)
    assert k.eval([0.3, 0.1], [0.3, 0.1]) == pytest.approx(1.0)
    assert k.eval([0.0, 0.0], [1.0, 0.0]) == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert k.eval([0.0, 0.0], [1.0, 0.0]) == pytest.approx(0.36788, abs=1e-5)


def test_gaussian_laplacian_at_zero():
    k = RadialKernel("gaussian", shape=1.0, dim=2)
    assert k.eval_laplacian_x([0.2, 0.2], [0.2, 0.2]) == pytest.approx(-4.0, rel=1e-14)


@pytest.mark.parametrize("m,d", [(4.5, 2), (5.5, 2), (3.0, 1), (6.5, 2)])
def test_matern_normalized_and_matches_bessel(m, d, rng):
    k = RadialKernel("matern", m, 0.8, d)
    x = rng.uniform(-1, 1, (30, d))
    y = rng.uniform(-1, 1, (30, d))
    assert np.allclose(k.eval(x, x), 1.0)
    r = np.linalg.norm(x - y, axis=1)
    assert np.allclose(k.eval(x, y), matern_oracle(m, d, 0.8, r), rtol=1e-12)


def test_matern_rejects_non_half_integer_order():
    with pytest.raises(ValueError):
        RadialKernel("matern", 4.0, 1.0, 2)
    with pytest.raises(ValueError):
        RadialKernel("gaussian", shape=0.0)


def test_dimension_mismatch():
    k = RadialKernel("gaussian", dim=2)
    with pytest.raises(ValueError):
        k.eval([0.0, 0.0, 0.0], [0.0, 0.0, 0.0])


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: f"{k.family.value}-{k.smoothness}-{k.dim}")
def test_symmetry_and_translation_invariance(k, rng):
    x = rng.uniform(-1, 1, (20, k.dim))
    y = rng.uniform(-1, 1, (20, k.dim))
    assert np.allclose(k.eval(x, y), k.eval(y, x))
    diag = k.eval(x, x)
    assert np.all(np.isfinite(diag)) and np.allclose(diag, diag[0])
    if k.nu > 2 or k.family.value != "matern":
        assert np.allclose(k.eval_laplacian_x(x, y), k.eval_laplacian_x(y, x))


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: f"{k.family.value}-{k.smoothness}-{k.dim}")
def test_derivatives_match_finite_differences(k, rng):
    for _ in range(20):
        x = rng.uniform(-1, 1, k.dim)
        y = rng.uniform(-1, 1, k.dim)
        if np.linalg.norm(x - y) < 0.05:
            continue
        f = lambda p: float(k.eval(p, y))
        g = k.gradient_x(x, y)
        assert np.allclose(g, fd_gradient(f, x), rtol=1e-5, atol=1e-8)
        if k.family.value == "matern" and k.nu <= 2:
            continue
        lap = float(k.eval_laplacian_x(x, y))
        assert abs(lap - fd_laplacian(f, x)) <= 1e-6 + 1e-5 * abs(lap)


def test_bilaplacian_matches_finite_differences(rng):
    k = RadialKernel("gaussian", shape=0.9, dim=2)
    for _ in range(10):
        x, y = rng.uniform(-1, 1, (2, 2))
        f = lambda p: float(k.eval_laplacian_x(p, y))
        val = float(k.eval_laplacian_xy(x, y))
        assert abs(val - fd_laplacian(f, x, 1e-3)) <= 1e-4 * max(1.0, abs(val))


def test_smoothness_guard():
    k = RadialKernel("matern", 3.5, 1.0, 2)  # nu = 2.5
    k.eval_laplacian_x([0.0, 0.0], [0.1, 0.0])
    with pytest.raises(SmoothnessError):
        k.eval_laplacian_xy([0.0, 0.0], [0.1, 0.0])
    with pytest.raises(SmoothnessError):
        RadialKernel("matern", 2.5, 1.0, 2).eval_laplacian_x([0.0, 0.0], [0.1, 0.0])


@pytest.mark.parametrize("k", [k for k in KERNELS if k.positive_definite],
                         ids=lambda k: f"{k.family.value}-{k.smoothness}-{k.dim}")
def test_gram_positive_definite(k, rng):
    X = rng.uniform(-1, 1, (12, k.dim))
    G = k.matrix(X, X)
    assert np.allclose(G, G.T)
    minors = [np.linalg.det(G[:j, :j]) for j in range(1, len(G) + 1)]
    assert all(m > 0 for m in minors)
    assert np.linalg.eigvalsh(G).min() > 0


def test_make_kernel_aliases():
    assert make_kernel("gauss").family.value == "gaussian"
    assert make_kernel("mq").positive_definite is False
    with pytest.raises(ValueError):
        make_kernel("wendland")
