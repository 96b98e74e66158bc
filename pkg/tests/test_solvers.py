import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from overtest.functionals import DiffOpEval, PointEval
from overtest.kernels import RadialKernel
from overtest.solvers import (RankDeficiencyError, gram_matrix, solve, solve_chebyshev, solve_least_squares,
                              symmetric_collocation)


def lp_chebyshev(A, b):
    """Reference minimax fit: min t s.t. -t <= b - A x <= t."""
    N, M = A.shape
    c = np.zeros(M + 1)
    c[-1] = 1.0
    ones = np.ones((N, 1))
    A_ub = np.block([[A, -ones], [-A, -ones]])
    res = linprog(c, A_ub=A_ub, b_ub=np.concatenate([b, -b]), bounds=[(None, None)] * M + [(0, None)],
                  method="highs")
    return res.x[-1]


def test_square_exact(rng):
    A = rng.standard_normal((6, 6))
    b = rng.standard_normal(6)
    for rep in (solve_least_squares(A, b), solve_chebyshev(A, b)):
        assert rep.residual_sup <= 1e-12
        assert np.allclose(A @ rep.coefficients, b)


def test_column_of_ones(rng):
    b = rng.uniform(-3, 5, 17)
    assert solve_least_squares(np.ones((17, 1)), b).coefficients[0] == pytest.approx(b.mean())
    rep = solve_chebyshev(np.ones((17, 1)), b, tol=1e-9)
    assert rep.coefficients[0] == pytest.approx((b.max() + b.min()) / 2, rel=1e-6)


def test_least_squares_normal_equations(rng):
    A = rng.standard_normal((8, 3))
    b = rng.standard_normal(8)
    x = solve_least_squares(A, b).coefficients
    assert np.allclose(A.T @ (A @ x - b), 0, atol=1e-12)


def test_rank_deficiency_reported():
    A = np.ones((5, 2))
    with pytest.raises(RankDeficiencyError):
        solve_least_squares(A, np.arange(5.0))
    with pytest.raises(RankDeficiencyError):
        solve_chebyshev(A, np.arange(5.0))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_chebyshev_near_lp_optimum_and_certified(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((10, 3))
    b = rng.standard_normal(10)
    rep = solve_chebyshev(A, b, tol=1e-3)
    opt = lp_chebyshev(A, b)
    assert rep.lower_bound <= opt * (1 + 1e-9)
    assert rep.residual_sup <= 1.02 * opt
    assert rep.residual_sup == pytest.approx(np.abs(b - A @ rep.coefficients).max())
    assert rep.achieved_CA == pytest.approx(rep.residual_sup / rep.lower_bound)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(4, 40), m=st.integers(1, 4))
def test_chebyshev_dominates_lsq_in_sup(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, m))
    b = rng.standard_normal(n)
    cheb = solve_chebyshev(A, b, tol=1e-6)
    lsq = solve_least_squares(A, b)
    assert cheb.residual_sup <= lsq.residual_sup * (1 + 1e-9)


def test_solve_dispatch():
    A = np.eye(2)
    assert solve(A, [1.0, 2.0], "lsq").residual_sup == 0
    with pytest.raises(ValueError):
        solve(A, [1.0, 2.0], "simplex")


def test_single_point_recovery_reproduces_kernel():
    k = RadialKernel("gaussian", shape=0.5)
    x0 = (0.3, 0.4)
    rec = symmetric_collocation(k, [PointEval(x0)], [1.0])
    assert rec.predict(PointEval(x0)) == pytest.approx(1.0)
    y = np.array([[0.5, 0.1], [0.9, 0.9]])
    assert np.allclose(rec.function.evaluate(y), k.eval(y, np.array([x0, x0])))


def _mixed(rng, n=10):
    pts = rng.uniform(0, 1, (n, 2))
    return [PointEval(tuple(p)) if i % 2 else DiffOpEval(tuple(p)) for i, p in enumerate(pts)]


def test_gram_symmetric_positive_definite(rng):
    G = gram_matrix(RadialKernel("gaussian", shape=0.5), _mixed(rng))
    assert np.allclose(G, G.T, rtol=1e-12, atol=1e-12)
    assert np.linalg.eigvalsh(G).min() > 0


def test_optimal_recovery_reproduces_data(rng):
    k = RadialKernel("gaussian", shape=0.5)
    funcs = _mixed(rng)
    data = rng.standard_normal(10)
    rec = symmetric_collocation(k, funcs, data)
    assert np.allclose(rec.predict_many(funcs), data, atol=1e-8)


def test_multiquadric_refused():
    with pytest.raises(ValueError):
        symmetric_collocation(RadialKernel("multiquadric"), [PointEval((0.0, 0.0))], [1.0])
