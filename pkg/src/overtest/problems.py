"""Concrete recovery problems with manufactured solutions.

A problem bundles a domain, a manufactured solution ``u*`` and the data
functional families of its kind.  Right-hand sides come from ``f = -Lap u*``
and ``g = u*`` on the boundary (or ``u*`` itself for interpolation), never
from applying functionals to ``u*`` directly, so the consistency check in
the tests means something.
"""

from __future__ import annotations

import math
from itertools import count, islice
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import sympy as sp

from .domains import Disk, Domain, Interval, Rectangle, van_der_corput, make_domain
from .fields import Field, KernelTranslate, ProductField, SineMode, SymbolicField
from .functionals import (DIRICHLET_TRACE, BoundaryFluxAverage, DataMap, DiffOpEval, Functional,
                          PointEval, WeakGradientPair, WeakL2Pair, apply_all, rhs_values)
from .kernels import RadialKernel
from .solvers import solve_chebyshev


class ProblemKind(str, Enum):
    INTERPOLATION_STRONG = "interpolation-strong"
    INTERPOLATION_WEAK = "interpolation-weak"
    POISSON_STRONG = "poisson-strong"
    POISSON_WEAK = "poisson-weak-dirichlet"
    POISSON_MLPG5 = "poisson-mlpg5"


class WPNorm(str, Enum):
    SUP = "sup-on-closure"
    L2 = "L2-on-domain"


# -- manufactured solutions ---------------------------------------------------

x_, y_ = sp.symbols("x y")

MANUFACTURED = {
    # name: (expression, dimension, smoothness tag)
    "smooth-square": (sp.sin(sp.pi * x_) * sp.sin(sp.pi * y_) + x_, 2, "analytic"),
    "harmonic-disk": (sp.exp(x_) * sp.cos(y_), 2, "analytic, harmonic"),
    "rough": ((((x_ - sp.Rational(3141, 10000)) ** 2 + (y_ - sp.Rational(4142, 10000)) ** 2))
              ** sp.Rational(5, 4), 2, "C^2 with r^2.5 singularity"),
    "runge": (1 / (1 + 25 * x_**2), 1, "analytic, poles at +-i/5"),
    "smooth-1d": (sp.exp(x_) * sp.sin(3 * x_), 1, "entire"),
    "linear-1d": (x_, 1, "polynomial"),
}


@dataclass(frozen=True, eq=False)
class ManufacturedSolution:
    name: str
    expr: object
    dim: int
    smoothness: str = ""

    @property
    def field(self) -> SymbolicField:
        return _symbolic(self.name, str(self.expr), self.dim)

    @property
    def source(self) -> SymbolicField:
        """``f = -Lap u*``."""
        lap = sum(sp.diff(self.expr, s, 2) for s in (x_, y_)[: self.dim])
        return _symbolic(self.name + ":source", str(sp.simplify(-lap)), self.dim)


_SYMBOLIC_CACHE: dict = {}


def _symbolic(name, expr, dim):
    key = (name, expr, dim)
    if key not in _SYMBOLIC_CACHE:
        _SYMBOLIC_CACHE[key] = SymbolicField(sp.sympify(expr), dim, name)
    return _SYMBOLIC_CACHE[key]


def manufactured(name: str) -> ManufacturedSolution:
    try:
        expr, dim, tag = MANUFACTURED[name]
    except KeyError:
        raise ValueError(f"unknown manufactured solution {name!r}; known: {sorted(MANUFACTURED)}") from None
    return ManufacturedSolution(name, expr, dim, tag)


def manufactured_from_expression(expr: str, dim: int = 2, name: str = "custom") -> ManufacturedSolution:
    syms = (x_, y_)[:dim]
    return ManufacturedSolution(name, sp.sympify(expr, locals=dict(zip(("x", "y"), syms))), dim)


# -- problems -----------------------------------------------------------------


_COVERS = {
    ProblemKind.INTERPOLATION_STRONG: (PointEval,),
    ProblemKind.INTERPOLATION_WEAK: (WeakL2Pair,),
    ProblemKind.POISSON_STRONG: (DiffOpEval, PointEval),
    ProblemKind.POISSON_WEAK: (WeakGradientPair, PointEval),
    ProblemKind.POISSON_MLPG5: (BoundaryFluxAverage, PointEval),
}


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One recovery problem.

    ``pool_density`` and ``reference_density`` are total functional counts
    of the two nested samplers; ``boundary_fraction`` of them sit on the
    boundary for the PDE kinds.  ``r_max`` bounds MLPG5 ball radii.
    """

    kind: ProblemKind
    domain: Domain
    manufactured: ManufacturedSolution
    wp_norm: WPNorm = WPNorm.SUP
    wp_constant: Optional[float] = None
    pool_density: int = 1000
    reference_density: int = 4000
    boundary_fraction: float = 0.2
    r_max: float = 0.1
    test_kernel_shape: float = 0.3
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", ProblemKind(self.kind))
        object.__setattr__(self, "wp_norm", WPNorm(self.wp_norm))
        if self.manufactured.dim != self.domain.dim:
            raise ValueError("manufactured solution and domain dimensions differ")

    # data definition used by functionals.rhs_values
    @property
    def point_data(self) -> str:
        return "solution" if self.kind in (ProblemKind.INTERPOLATION_STRONG,) else "boundary"

    def covers(self, lam: Functional) -> bool:
        ok = isinstance(lam, _COVERS[self.kind])
        if ok and isinstance(lam, PointEval) and self.kind not in (ProblemKind.INTERPOLATION_STRONG,):
            return lam.op == DIRICHLET_TRACE
        return ok

    def data_field(self, which: str) -> Field:
        u = self.manufactured.field
        if which in ("solution", "boundary"):
            return u
        if which == "source":
            if self.kind == ProblemKind.INTERPOLATION_WEAK:
                return u  # L2 pairings see u itself
            return self.manufactured.source
        raise ValueError(f"unknown data field {which!r}")

    @property
    def solution(self) -> SymbolicField:
        return self.manufactured.field

    def rhs(self, functionals) -> np.ndarray:
        return rhs_values(functionals, self)

    # samplers
    def sampler(self, n: int) -> list:
        if self.kind == ProblemKind.INTERPOLATION_STRONG:
            return _point_family(self.domain, n)
        if self.kind == ProblemKind.INTERPOLATION_WEAK:
            return _l2_family(self.domain, n)
        nb = max(4, int(round(self.boundary_fraction * n)))
        ni = max(n - nb, 1)
        bpts, _ = self.domain.boundary_points(nb)
        boundary = [PointEval(tuple(p), 1.0, DIRICHLET_TRACE) for p in bpts]
        if self.kind == ProblemKind.POISSON_STRONG:
            inner = [DiffOpEval(tuple(p)) for p in self.domain.interior_points(ni)]
        elif self.kind == ProblemKind.POISSON_WEAK:
            inner = self._weak_tests(ni)
        else:
            inner = _flux_family(self.domain, ni, self.r_max)
        return inner + boundary

    def _weak_tests(self, n):
        key = ("weak", n)
        if key not in self._cache:
            self._cache[key] = _gradient_family(self.domain, n, self.test_kernel_shape)
        return self._cache[key]

    def pool(self) -> DataMap:
        return DataMap(self.sampler, self.pool_density, f"{self.kind.value}:pool")

    def reference(self) -> DataMap:
        return DataMap(self.sampler, self.reference_density, f"{self.kind.value}:reference")

    def describe(self) -> dict:
        return {"kind": self.kind.value, "domain": self.domain.name, "solution": self.manufactured.name,
                "wp_norm": self.wp_norm.value, "pool_density": self.pool_density,
                "reference_density": self.reference_density, "r_max": self.r_max}


def make_problem(kind, domain="square", solution: Optional[str] = None, **kw) -> ProblemSpec:
    kind = ProblemKind(kind)
    dom = make_domain(domain) if isinstance(domain, str) else domain
    if solution is None:
        if dom.dim == 1:
            solution = "runge"
        elif isinstance(dom, Disk):
            solution = "harmonic-disk"
        else:
            solution = "smooth-square"
    wp = WPNorm.L2 if kind in (ProblemKind.INTERPOLATION_WEAK, ProblemKind.POISSON_WEAK) else WPNorm.SUP
    # strong interpolation: the data map is the identity on the closure
    const = 1.0 if kind == ProblemKind.INTERPOLATION_STRONG else None
    kw.setdefault("wp_norm", wp)
    kw.setdefault("wp_constant", const)
    return ProblemSpec(kind, dom, manufactured(solution), **kw)


def build(problem: ProblemSpec):
    """``(pool, reference, rhs)`` with ``rhs(functionals) -> data values``."""
    return problem.pool(), problem.reference(), problem.rhs


# -- functional families ------------------------------------------------------


def _point_family(domain: Domain, n: int) -> list:
    if isinstance(domain, Interval):
        pts = domain.dense_points(n)
    else:
        nb = max(4, n // 5)
        pts = np.vstack([domain.boundary_points(nb)[0], domain.interior_points(max(n - nb, 0))])
    return [PointEval(tuple(p)) for p in pts]


def _l2_family(domain: Domain, n: int) -> list:
    """L2-normalized test functions: Legendre polynomials, then narrow bumps."""
    if not isinstance(domain, Interval):
        raise NotImplementedError("weak interpolation is implemented on intervals")
    a, b = domain.a, domain.b
    t = (2 * x_ - a - b) / (b - a)
    npoly = min(n, max(1, int(math.sqrt(n))))
    out = []
    for k in range(npoly):
        v = sp.legendre(k, t) * sp.sqrt(sp.Rational(2 * k + 1, 1) / (b - a))
        out.append(WeakL2Pair(_symbolic(f"leg{k}", str(v), 1), domain, 1.0, 8, 16))
    centers = a + (b - a) * van_der_corput(n - npoly)
    for i, c in enumerate(centers):
        r = (b - a) * 2.0 ** -(2 + i % 4)
        # bump (1 - ((x-c)/r)^2)^2 on its support, unit L2 norm: int = 256 r / 315
        z = (x_ - float(c)) / r
        v = sp.Piecewise(((1 - z**2) ** 2 / sp.sqrt(256 * r / 315), z**2 < 1), (0, True))
        out.append(WeakL2Pair(_symbolic(f"bump{c:.6f}:{r}", str(v), 1), domain, 1.0, 8, 64))
    return out


def _gradient_family(domain: Domain, n: int, shape: float) -> list:
    """Tests in H_0^1 with unit gradient L2 norm.

    Sine modes (exact norms) on rectangles, then bubble-weighted Gaussian
    translates normalized by quadrature.
    """
    out = []
    if isinstance(domain, Rectangle):
        # diagonal enumeration keeps the family nested in n
        modes = islice(((k, s - k) for s in count(2) for k in range(1, s)), n // 2)
        for k, l in modes:
            s = SineMode(k, l, domain.box)
            out.append(WeakGradientPair(SineMode(k, l, domain.box, 1.0 / s.h1_seminorm()), domain))
    rule = domain.quadrature(8, 8)
    bubble = domain.bubble()
    for i, c in enumerate(domain.interior_points(n - len(out))):
        sh = shape * (1.0, 0.5)[i % 2]
        v = ProductField(bubble, KernelTranslate(RadialKernel("gaussian", shape=sh, dim=2), tuple(c)))
        g = v.evaluate(rule.nodes, "grad")
        norm = math.sqrt(float(rule.weights @ np.sum(g * g, axis=1)))
        out.append(WeakGradientPair(ProductField(v.a, v.b, 1.0 / norm), domain))
    return out


def _flux_family(domain: Domain, n: int, r_max: float) -> list:
    """Balls inside the domain with radii cycling through [r_max/4, r_max]."""
    out = []
    k = n
    while True:
        pts = domain.interior_points(k)
        dist = domain.distance_to_boundary(pts)
        radii = r_max * (0.25 + 0.75 * van_der_corput(k, 3))
        out = []
        for p, d, r in zip(pts, dist, radii):
            r = min(r, 0.999 * d)
            if r >= 1e-3:
                out.append(BoundaryFluxAverage(tuple(p), float(r)))
        if len(out) >= n or k > 8 * n:
            return out[:n]
        k = int(k * 1.25) + 1


# -- error measurement --------------------------------------------------------


def wp_error(problem: ProblemSpec, approx, grid=None) -> float:
    """Sup or L2 norm of ``u* - approx`` on the domain's fixed measurement grid."""
    pts, w = grid if grid is not None else problem.domain.measurement_grid()
    e = problem.solution.evaluate(pts) - approx.evaluate(pts, "value")
    if problem.wp_norm == WPNorm.SUP:
        return float(np.max(np.abs(e)))
    return float(math.sqrt(float(w @ (e * e))))


def trial_space_data_error(problem: ProblemSpec, space, reference: Optional[DataMap] = None,
                           tol: float = 1e-3) -> float:
    """``min_{u in U_M} max_lambda |lambda(u* - u)|`` over the reference functionals."""
    funcs = (reference or problem.reference()).functionals()
    A = apply_all(funcs, space)
    b = apply_all(funcs, problem.solution)
    rep = solve_chebyshev(A, b, tol=tol)
    return rep.residual_sup


# -- noise --------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    amplitude: float = 0.0
    shape: str = "uniform"  # or "signed"

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be >= 0")
        if self.shape not in ("uniform", "signed"):
            raise ValueError(f"unknown noise shape {self.shape!r}")


def perturb_data(values, model: NoiseModel, seed: int = 0) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    eps = model.amplitude
    if eps == 0:
        return values.copy()
    if model.shape == "signed":
        noise = eps * (1.0 - 2.0 * (np.arange(values.size) % 2))
    else:
        noise = np.clip(np.random.default_rng(seed).uniform(-eps, eps, values.size), -eps, eps)
    return values + noise.reshape(values.shape)


# -- MLPG norm check ----------------------------------------------------------


def random_smooth_field(seed: int, box=((0.0, 1.0), (0.0, 1.0)), terms: int = 4) -> Field:
    """Random cosine series ``sum a_kl cos(k pi x) cos(l pi y)``, ``k, l <= 2``."""
    rng = np.random.default_rng(seed)
    (ax, bx), (ay, by) = box
    expr = 0
    for _ in range(terms):
        k, l = rng.integers(0, 3, size=2)
        a = rng.normal()
        expr += a * sp.cos(k * sp.pi * (x_ - ax) / (bx - ax)) * sp.cos(l * sp.pi * (y_ - ay) / (by - ay))
    expr += rng.normal() * 0.5
    return SymbolicField(expr, 2, f"random-{seed}")


def seed_functionals(problem: ProblemSpec, pool: Optional[DataMap] = None) -> list:
    """Greedy start for PDE kinds: one boundary functional per quadrant plus one interior one.

    Quadrants are taken around the domain's centroid; the first pool member
    in each is used, so seeds are part of the pool.
    """
    if problem.kind in (ProblemKind.INTERPOLATION_STRONG, ProblemKind.INTERPOLATION_WEAK):
        return []
    funcs = (pool or problem.pool()).functionals()
    pts, _ = problem.domain.measurement_grid()
    center = pts.mean(axis=0)
    seeds, seen = [], set()
    interior = None
    for lam in funcs:
        if isinstance(lam, PointEval):
            d = np.asarray(lam.point) - center
            q = (d[0] >= 0, d[1] >= 0)
            if q not in seen:
                seen.add(q)
                seeds.append(lam)
        elif interior is None:
            interior = lam
    return seeds + ([interior] if interior is not None else [])
