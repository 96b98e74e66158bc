"""Residual minimization and symmetric collocation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .functionals import Functional, apply_all
from .kernels import RadialKernel
from .trialspaces import RepresenterSpace, TrialFunction

log = logging.getLogger(__name__)

RANK_TOL = 1e-12


class RankDeficiencyError(np.linalg.LinAlgError):
    def __init__(self, rank: int, cols: int, diag: np.ndarray):
        super().__init__(f"numerical rank {rank} < {cols} columns "
                         f"(|R_kk| range {diag.min():.2e}..{diag.max():.2e})")
        self.rank = rank
        self.cols = cols
        self.diag = diag


class GramSingularError(np.linalg.LinAlgError):
    pass


@dataclass
class SolveReport:
    coefficients: np.ndarray
    residual_sup: float
    residual_l2: float
    achieved_CA: float = 1.0
    iterations: int = 0
    converged: bool = True
    lower_bound: float = 0.0  # certified lower bound on the optimal sup residual


def _entries(A) -> np.ndarray:
    return np.asarray(getattr(A, "entries", A), dtype=float)


def _pivoted_qr(A: np.ndarray):
    Q, R, piv = sla.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    colmax = np.linalg.norm(A, axis=0).max() if A.size else 0.0
    rank = int(np.sum(diag > RANK_TOL * colmax))
    if rank < A.shape[1]:
        raise RankDeficiencyError(rank, A.shape[1], diag)
    return Q, R, piv


def _lsq(A, b):
    Q, R, piv = _pivoted_qr(A)
    x = np.empty(A.shape[1])
    x[piv] = sla.solve_triangular(R, Q.T @ b)
    return x


def _report(A, b, x, **kw) -> SolveReport:
    r = b - A @ x
    return SolveReport(x, float(np.max(np.abs(r))) if r.size else 0.0, float(np.linalg.norm(r)), **kw)


def solve_least_squares(A, b) -> SolveReport:
    """Minimize ``||b - A a||_2`` by column-pivoted QR."""
    A = _entries(A)
    b = np.asarray(b, dtype=float)
    x = _lsq(A, b)
    rep = _report(A, b, x)
    rep.lower_bound = 0.0
    rep.achieved_CA = float("nan")
    return rep


def solve_chebyshev(A, b, tol: float = 1e-3, max_iter: int = 3000, stall: int = 200) -> SolveReport:
    """Minimize ``||b - A a||_inf`` by Lawson's iteratively reweighted least squares.

    For weights ``w >= 0`` summing to one, the weighted least-squares residual
    ``sqrt(sum w r^2)`` bounds the optimal sup residual from below, so every
    iterate carries a certificate ``achieved_CA = sup residual / lower bound``.
    Iteration stops once ``achieved_CA <= 1 + tol``, after ``max_iter`` steps,
    or after ``stall`` steps without progress in the lower bound; the best
    iterate is returned either way.
    """
    A = _entries(A)
    b = np.asarray(b, dtype=float)
    N, M = A.shape
    _pivoted_qr(A)  # rank check
    bscale = max(np.max(np.abs(b)), 1e-300) if N else 1.0

    w = np.full(N, 1.0 / N)
    best_x, best_sup, lower = None, np.inf, 0.0
    since = 0
    it = 0
    for it in range(1, max_iter + 1):
        sw = np.sqrt(w)
        try:
            x = _lsq(A * sw[:, None], b * sw)
        except RankDeficiencyError:
            # weights collapsed onto too few rows; keep the best iterate so far
            break
        r = b - A @ x
        absr = np.abs(r)
        sup = absr.max()
        lb = np.sqrt(np.sum(w * r * r))
        if sup < best_sup:
            best_x, best_sup = x, sup
        if lb > lower * (1 + 1e-12):
            lower, since = lb, 0
        else:
            since += 1
        if best_sup <= 1e-14 * bscale or best_sup <= (1 + tol) * lower:
            break
        if since >= stall:
            break
        wr = w * absr
        total = wr.sum()
        if total <= 0:
            break
        w = wr / total
    rep = _report(A, b, best_x, iterations=it)
    rep.lower_bound = float(lower)
    if rep.residual_sup <= 1e-14 * bscale:
        rep.achieved_CA = 1.0
    else:
        rep.achieved_CA = float(rep.residual_sup / lower) if lower > 0 else float("inf")
    rep.converged = rep.achieved_CA <= 1 + tol
    if not rep.converged:
        log.info("Lawson stopped at C_A=%.4f after %d iterations", rep.achieved_CA, it)
    return rep


def solve(A, b, solver: str = "chebyshev", tol: float = 1e-3) -> SolveReport:
    if solver == "chebyshev":
        return solve_chebyshev(A, b, tol=tol)
    if solver == "lsq":
        return solve_least_squares(A, b)
    raise ValueError(f"unknown solver {solver!r}")


@dataclass(eq=False)
class Recovery:
    """Optimal recovery from data ``lambda_k(u*)`` in the kernel's native space."""

    space: RepresenterSpace
    coefficients: np.ndarray
    gram: np.ndarray
    regularization: float = 0.0
    condition: float = float("nan")

    @property
    def function(self) -> TrialFunction:
        return TrialFunction(self.space, self.coefficients)

    def predict(self, mu: Functional) -> float:
        return float(apply_all([mu], self.space)[0] @ self.coefficients)

    def predict_many(self, mus: Sequence[Functional]) -> np.ndarray:
        return apply_all(mus, self.space) @ self.coefficients

    def native_norm_sq(self) -> float:
        c = self.coefficients
        return float(c @ self.gram @ c)


def gram_matrix(kernel: RadialKernel, functionals: Sequence[Functional]) -> np.ndarray:
    space = RepresenterSpace(kernel, tuple(functionals))
    G = apply_all(space.functionals, space)
    return 0.5 * (G + G.T)


def symmetric_collocation(kernel: RadialKernel, functionals: Sequence[Functional], data,
                          gram: Optional[np.ndarray] = None) -> Recovery:
    """Solve ``sum_j c_j lambda_k^x lambda_j^y K = data_k`` and return the recovery."""
    if not kernel.positive_definite:
        raise ValueError("symmetric collocation needs a positive definite kernel; "
                         f"{kernel.family.value} is only conditionally positive definite")
    space = RepresenterSpace(kernel, tuple(functionals))
    G = gram if gram is not None else gram_matrix(kernel, functionals)
    data = np.asarray(data, dtype=float)
    cond = float(np.linalg.cond(G))
    reg = 0.0
    try:
        factor = sla.cho_factor(G)
    except np.linalg.LinAlgError:
        reg = 1e-12 * np.trace(G) / len(G)
        log.warning("Gram matrix not numerically positive definite (cond %.2e); adding %.2e to the diagonal",
                    cond, reg)
        try:
            factor = sla.cho_factor(G + reg * np.eye(len(G)))
        except np.linalg.LinAlgError as exc:
            raise GramSingularError(f"Gram matrix singular, condition {cond:.2e}") from exc
    c = sla.cho_solve(factor, data)
    return Recovery(space, c, G, reg, cond)
