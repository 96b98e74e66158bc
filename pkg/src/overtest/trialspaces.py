"""Finite-dimensional trial spaces, nodal re-basing and fill distances."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import legendre as L
from scipy.spatial import cKDTree

from .fields import Field
from .functionals import DIRICHLET_TRACE, IDENTITY, NEG_LAPLACIAN, DiffOpEval, PointEval
from .kernels import RadialKernel


class SingularInterpolationError(np.linalg.LinAlgError):
    pass


class UnsupportedDerivative(ValueError):
    pass


class TrialSpace:
    """Span of ``M`` basis functions; ``evaluate`` returns one column per basis function."""

    dim: int  # M
    space_dim: int  # d

    def evaluate(self, points, op="value") -> np.ndarray:
        raise NotImplementedError

    def eval_basis(self, x, op="value") -> np.ndarray:
        """Basis values (or ``op`` applied to them) at a single point."""
        return self.evaluate(np.atleast_2d(np.asarray(x, dtype=float)), op)[0]

    def function(self, coeffs) -> "TrialFunction":
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} coefficients, got {coeffs.shape}")
        return TrialFunction(self, coeffs)

    def __len__(self):
        return self.dim


@dataclass(frozen=True, eq=False)
class TrialFunction(Field):
    space: TrialSpace
    coeffs: np.ndarray

    @property
    def dim(self):
        return self.space.space_dim

    def evaluate(self, points, op="value"):
        return self.space.evaluate(np.atleast_2d(points), op) @ self.coeffs


@dataclass(frozen=True, eq=False)
class PolynomialSpace(TrialSpace):
    """Polynomials of degree ``<= degree`` on an interval.

    ``basis`` is ``legendre`` (orthonormal in L2 of the interval, the
    default), ``chebyshev`` or ``monomial`` (kept to demonstrate what a bad
    basis does to the coefficient-norm constants).
    """

    degree: int
    interval: tuple = (-1.0, 1.0)
    basis: str = "legendre"

    space_dim = 1

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if self.basis not in ("legendre", "chebyshev", "monomial"):
            raise ValueError(f"unknown polynomial basis {self.basis!r}")

    @property
    def dim(self):
        return self.degree + 1

    def _t(self, x):
        a, b = self.interval
        return (2.0 * x - a - b) / (b - a), 2.0 / (b - a)

    def evaluate(self, points, op="value"):
        x = np.asarray(points, dtype=float)[:, 0]
        n = self.degree
        if self.basis == "monomial":
            V = np.vander(x, n + 1, increasing=True)
            if op == "value":
                return V
            k = np.arange(n + 1)
            if op == "grad":
                D = np.zeros_like(V)
                D[:, 1:] = V[:, :-1] * k[1:]
                return D[:, None, :]
            D2 = np.zeros_like(V)
            D2[:, 2:] = V[:, :-2] * (k[2:] * (k[2:] - 1))
            return D2
        t, dt = self._t(x)
        if self.basis == "legendre":
            vander, der = L.legvander, L.legder
            norm = np.sqrt((2 * np.arange(n + 1) + 1) / (self.interval[1] - self.interval[0]))
        else:
            vander, der = C.chebvander, C.chebder
            norm = np.ones(n + 1)
        if op == "value":
            return vander(t, n) * norm
        if op not in ("grad", "laplacian"):
            raise ValueError(f"unknown operator {op!r}")
        order = 1 if op == "grad" else 2
        # column j holds the coefficients of the order-th derivative of basis j
        D = np.zeros((n + 1, n + 1))
        for j in range(order, n + 1):
            c = der(np.eye(n + 1)[j], order)
            D[: len(c), j] = c
        out = vander(t, n) @ D * norm * dt**order
        return out[:, None, :] if op == "grad" else out


@dataclass(frozen=True, eq=False)
class KernelSpace(TrialSpace):
    """Span of kernel translates ``K(., x_j)``."""

    kernel: RadialKernel
    centers: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if c.shape[1] != self.kernel.dim:
            raise ValueError("center dimension does not match kernel")
        object.__setattr__(self, "centers", c)

    @property
    def dim(self):
        return len(self.centers)

    @property
    def space_dim(self):
        return self.kernel.dim

    def evaluate(self, points, op="value"):
        try:
            return self.kernel.matrix(points, self.centers, op)
        except ValueError as exc:
            raise UnsupportedDerivative(str(exc)) from exc


@dataclass(frozen=True, eq=False)
class RepresenterSpace(TrialSpace):
    """Span of ``lambda_j^y K(., y)`` for point and (negative) Laplacian functionals."""

    kernel: RadialKernel
    functionals: tuple

    def __post_init__(self):
        object.__setattr__(self, "functionals", tuple(self.functionals))
        for lam in self.functionals:
            self._kind(lam)

    @staticmethod
    def _kind(lam):
        if isinstance(lam, PointEval) or (isinstance(lam, DiffOpEval) and lam.op in (IDENTITY, DIRICHLET_TRACE)):
            return "point"
        if isinstance(lam, DiffOpEval) and lam.op == NEG_LAPLACIAN:
            return "neglap"
        raise UnsupportedDerivative(f"no kernel representer for {type(lam).__name__}")

    @property
    def dim(self):
        return len(self.functionals)

    @property
    def space_dim(self):
        return self.kernel.dim

    @cached_property
    def _split(self):
        pts = np.array([lam.point for lam in self.functionals], dtype=float)
        scale = np.array([lam.scale for lam in self.functionals])
        lap = np.array([self._kind(lam) == "neglap" for lam in self.functionals])
        return pts, scale, lap

    def evaluate(self, points, op="value"):
        pts, scale, lap = self._split
        points = np.atleast_2d(points)
        k = self.kernel
        shape = (len(points), k.dim, self.dim) if op == "grad" else (len(points), self.dim)
        out = np.zeros(shape)
        pe, lp = ~lap, lap
        if op == "value":
            if pe.any():
                out[:, pe] = k.matrix(points, pts[pe], "value")
            if lp.any():
                out[:, lp] = -k.matrix(points, pts[lp], "laplacian")
        elif op == "laplacian":
            if pe.any():
                out[:, pe] = k.matrix(points, pts[pe], "laplacian")
            if lp.any():
                out[:, lp] = -k.matrix(points, pts[lp], "bilaplacian")
        elif op == "grad":
            if pe.any():
                out[:, :, pe] = k.matrix(points, pts[pe], "grad")
            if lp.any():
                g = k.gradient_x_laplacian(points[:, None, :], pts[lp][None, :, :])
                out[:, :, lp] = -np.moveaxis(g, -1, 1)
        else:
            raise ValueError(f"unknown operator {op!r}")
        return out * scale


@dataclass(frozen=True, eq=False)
class NodalBasisMap:
    """Change of basis to Lagrange functions ``s_j(x_k) = delta_jk``.

    ``change_of_basis`` maps nodal values to raw coefficients; its inverse
    (``interpolation``) maps raw coefficients to nodal values.
    """

    nodes: np.ndarray
    change_of_basis: np.ndarray
    interpolation: np.ndarray

    def to_raw(self, nodal_values):
        return self.change_of_basis @ np.asarray(nodal_values, dtype=float)

    def to_nodal(self, raw_coeffs):
        return self.interpolation @ np.asarray(raw_coeffs, dtype=float)


@dataclass(frozen=True, eq=False)
class NodalSpace(TrialSpace):
    raw: TrialSpace
    nodal: NodalBasisMap

    @property
    def dim(self):
        return self.raw.dim

    @property
    def space_dim(self):
        return self.raw.space_dim

    def evaluate(self, points, op="value"):
        return self.raw.evaluate(points, op) @ self.nodal.change_of_basis


def to_nodal(space: TrialSpace, nodes, cond_limit: float = 1e14) -> NodalBasisMap:
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if len(nodes) != space.dim:
        raise SingularInterpolationError(f"{len(nodes)} nodes for a {space.dim}-dimensional space")
    if len(nodes) > 1:
        dmin = cKDTree(nodes).query(nodes, k=2)[0][:, 1].min()
        span = np.ptp(nodes, axis=0).max()
        if dmin <= 1e-12 * max(span, 1.0):
            raise SingularInterpolationError(f"nodes nearly coincide (distance {dmin:.1e})")
    V = space.evaluate(nodes, "value")
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularInterpolationError(f"interpolation matrix condition {cond:.2e} exceeds {cond_limit:.0e}")
    return NodalBasisMap(nodes, np.linalg.inv(V), V)


def rebase(space: TrialSpace, nodes) -> NodalSpace:
    return NodalSpace(space, to_nodal(space, nodes))


def fill_distance(centers, domain_samples) -> float:
    """``max_y min_j |y - x_j|`` over the supplied domain samples."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    samples = np.atleast_2d(np.asarray(domain_samples, dtype=float))
    if not len(centers) or not len(samples):
        raise ValueError("need nonempty centers and samples")
    return float(cKDTree(centers).query(samples)[0].max())


def separation_distance(centers) -> float:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    return float(0.5 * cKDTree(centers).query(centers, k=2)[0][:, 1].min())


def load_centers(path) -> np.ndarray:
    """Whitespace-separated point list, one point per line."""
    return np.loadtxt(path, ndmin=2)


def save_centers(path, centers) -> None:
    np.savetxt(path, np.atleast_2d(centers), fmt="%.17g")
