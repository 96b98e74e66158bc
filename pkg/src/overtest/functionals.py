"""Linear data functionals, their batched application, and data maps.

Every functional compiles to a short list of :class:`Term` objects, each a
weighted sum of one pointwise derivative (value, Laplacian or gradient
contracted with a vector).  Application to anything with an
``evaluate(points, op)`` method then reduces to one evaluation per distinct
point set, which keeps assembly of large pools cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Hashable, Optional, Sequence

import numpy as np

from . import quadrature as quad
from .fields import ConstantField, Field, field_from_description

IDENTITY = "identity"
NEG_LAPLACIAN = "negative-laplacian"
DIRICHLET_TRACE = "dirichlet-trace"

DIRECT = "direct"
ONCE = "once-integrated"
TWICE = "twice-integrated"


class UnsupportedFunctional(ValueError):
    """Functional not covered by the problem's data definition."""


@dataclass(frozen=True, eq=False)
class Term:
    points: np.ndarray
    op: str
    weights: np.ndarray  # (n,) or (n, d) for grad
    key: Optional[Hashable] = None  # terms with equal keys share their points


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    @property
    def volume(self) -> float:
        d = len(self.center)
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius**d

    def rule(self, order: int) -> quad.QuadratureRule:
        if len(self.center) == 1:
            c = self.center[0]
            return quad.gauss_rule(order, (c - self.radius, c + self.radius))
        return quad.disk_rule(self.center, self.radius, order)

    def boundary_rule(self, order: int) -> quad.QuadratureRule:
        if len(self.center) == 1:
            c = self.center[0]
            return quad.QuadratureRule(np.array([[c - self.radius], [c + self.radius]]),
                                       np.ones(2), quad.Region.CIRCLE_BOUNDARY, degree=None,
                                       normals=np.array([[-1.0], [1.0]]), measure=2.0)
        return quad.circle_rule(self.center, self.radius, 4 * order)


def _region_rule(region, order: int, cells: int) -> quad.QuadratureRule:
    if isinstance(region, Ball):
        return region.rule(order)
    return _domain_rule(region, order, cells)


@lru_cache(maxsize=64)
def _domain_rule(domain, order, cells):
    return domain.quadrature(order, cells)


class Functional:
    scale: float

    def terms(self) -> list:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError

    def __call__(self, target):
        return apply(self, target)


@dataclass(frozen=True)
class PointEval(Functional):
    point: tuple
    scale: float = 1.0
    op: str = IDENTITY  # or DIRICHLET_TRACE for boundary data

    def terms(self):
        return [Term(np.asarray([self.point], dtype=float), "value", np.array([self.scale]))]

    def describe(self):
        return {"type": "point", "point": list(self.point), "scale": self.scale, "op": self.op}


@dataclass(frozen=True)
class DiffOpEval(Functional):
    point: tuple
    op: str = NEG_LAPLACIAN
    scale: float = 1.0

    def terms(self):
        pt = np.asarray([self.point], dtype=float)
        if self.op == NEG_LAPLACIAN:
            return [Term(pt, "laplacian", np.array([-self.scale]))]
        if self.op in (IDENTITY, DIRICHLET_TRACE):
            return [Term(pt, "value", np.array([self.scale]))]
        raise ValueError(f"unknown operator {self.op!r}")

    def describe(self):
        return {"type": "diffop", "point": list(self.point), "op": self.op, "scale": self.scale}


@dataclass(frozen=True)
class WeakGradientPair(Functional):
    """``u -> scale * int_region grad u . grad v``."""

    test: Field
    region: object
    scale: float = 1.0
    order: int = quad.DEFAULT_ORDER
    cells: int = 8

    def terms(self):
        rule = _region_rule(self.region, self.order, self.cells)
        w = self.scale * rule.weights[:, None] * self.test.evaluate(rule.nodes, "grad")
        return [Term(rule.nodes, "grad", w, key=("rule", self.region, self.order, self.cells))]

    def describe(self):
        return {"type": "weak-grad", "test": self.test.describe(), "region": _describe_region(self.region),
                "scale": self.scale, "order": self.order, "cells": self.cells}


@dataclass(frozen=True)
class WeakL2Pair(Functional):
    """``u -> scale * int_region u v``."""

    test: Field
    region: object
    scale: float = 1.0
    order: int = quad.DEFAULT_ORDER
    cells: int = 8

    def terms(self):
        rule = _region_rule(self.region, self.order, self.cells)
        w = self.scale * rule.weights * self.test.evaluate(rule.nodes, "value")
        return [Term(rule.nodes, "value", w, key=("rule", self.region, self.order, self.cells))]

    def describe(self):
        return {"type": "weak-l2", "test": self.test.describe(), "region": _describe_region(self.region),
                "scale": self.scale, "order": self.order, "cells": self.cells}


@dataclass(frozen=True)
class LocalWeakAverage(Functional):
    """``u -> -(scale/vol) int_ball v * Laplacian u`` in one of three forms.

    The once- and twice-integrated forms move derivatives onto ``v`` by
    integration by parts; all three agree on C^2 fields.
    """

    center: tuple
    radius: float
    test: Field = field(default_factory=ConstantField)
    form: str = DIRECT
    scale: float = 1.0
    order: int = quad.DEFAULT_ORDER

    @property
    def ball(self) -> Ball:
        return Ball(tuple(self.center), self.radius)

    def terms(self):
        ball = self.ball
        c = self.scale / ball.volume
        inner = ball.rule(self.order)
        if self.form == DIRECT:
            return [Term(inner.nodes, "laplacian", -c * inner.weights * self.test.evaluate(inner.nodes, "value"))]
        outer = ball.boundary_rule(self.order)
        v_out = self.test.evaluate(outer.nodes, "value")
        flux = Term(outer.nodes, "grad", -c * (outer.weights * v_out)[:, None] * outer.normals)
        if self.form == ONCE:
            gv = self.test.evaluate(inner.nodes, "grad")
            return [Term(inner.nodes, "grad", c * inner.weights[:, None] * gv), flux]
        if self.form == TWICE:
            lv = self.test.evaluate(inner.nodes, "laplacian")
            dvn = np.sum(self.test.evaluate(outer.nodes, "grad") * outer.normals, axis=1)
            return [Term(inner.nodes, "value", -c * inner.weights * lv),
                    Term(outer.nodes, "value", c * outer.weights * dvn), flux]
        raise ValueError(f"unknown form {self.form!r}")

    def describe(self):
        return {"type": "local-weak", "center": list(self.center), "radius": self.radius,
                "test": self.test.describe(), "form": self.form, "scale": self.scale,
                "order": self.order}


@dataclass(frozen=True)
class BoundaryFluxAverage(Functional):
    """MLPG5 functional ``u -> -(scale/vol) * boundary integral of du/dn``."""

    center: tuple
    radius: float
    scale: float = 1.0
    order: int = quad.DEFAULT_ORDER

    @property
    def ball(self) -> Ball:
        return Ball(tuple(self.center), self.radius)

    def terms(self):
        ball = self.ball
        outer = ball.boundary_rule(self.order)
        c = self.scale / ball.volume
        return [Term(outer.nodes, "grad", -c * outer.weights[:, None] * outer.normals)]

    def describe(self):
        return {"type": "flux", "center": list(self.center), "radius": self.radius,
                "scale": self.scale, "order": self.order}


# -- batched application ------------------------------------------------------


def _weighted(values: np.ndarray, weights: np.ndarray, op: str) -> np.ndarray:
    if op == "grad":
        return np.einsum("nd...,nd->n...", values, weights)
    return values * weights.reshape(weights.shape + (1,) * (values.ndim - 1))


def apply_all(functionals: Sequence[Functional], target) -> np.ndarray:
    """Apply each functional to ``target``.

    Returns ``(N,)`` for a scalar field, ``(N, M)`` for a trial space.
    """
    functionals = list(functionals)
    loose: dict = {}
    keyed: dict = {}
    for row, lam in enumerate(functionals):
        for t in lam.terms():
            if t.key is None:
                loose.setdefault(t.op, []).append((row, t))
            else:
                keyed.setdefault((t.key, t.op), []).append((row, t))

    out = None

    def accumulate(rows, contrib):
        nonlocal out
        if out is None:
            out = np.zeros((len(functionals),) + contrib.shape[1:])
        np.add.at(out, rows, contrib)

    for op, items in loose.items():
        pts = np.vstack([t.points for _, t in items])
        rows = np.concatenate([np.full(len(t.points), r) for r, t in items])
        w = np.concatenate([t.weights for _, t in items])
        accumulate(rows, _weighted(target.evaluate(pts, op), w, op))
    for (_, op), items in keyed.items():
        pts = items[0][1].points
        vals = target.evaluate(pts, op)
        W = np.stack([t.weights for _, t in items])  # (F, Q) or (F, Q, d)
        if op == "grad":
            contrib = np.tensordot(W, vals, axes=([1, 2], [0, 1]))
        else:
            contrib = np.tensordot(W, vals, axes=([1], [0]))
        accumulate(np.array([r for r, _ in items]), contrib)
    if out is None:
        raise ValueError("no functionals given")
    return out


def apply(lam: Functional, target):
    return apply_all([lam], target)[0]


# -- right-hand sides ---------------------------------------------------------


def _rhs_terms(lam: Functional, problem) -> list:
    """(points, weights, which) triples; ``which`` names the data field."""
    if isinstance(lam, PointEval):
        which = "boundary" if (lam.op == DIRICHLET_TRACE) else problem.point_data
        return [(np.asarray([lam.point], float), np.array([lam.scale]), which)]
    if isinstance(lam, DiffOpEval):
        if lam.op == NEG_LAPLACIAN:
            return [(np.asarray([lam.point], float), np.array([lam.scale]), "source")]
        which = "boundary" if lam.op == DIRICHLET_TRACE else problem.point_data
        return [(np.asarray([lam.point], float), np.array([lam.scale]), which)]
    if isinstance(lam, (WeakGradientPair, WeakL2Pair)):
        rule = _region_rule(lam.region, lam.order, lam.cells)
        return [(rule.nodes, lam.scale * rule.weights * lam.test.evaluate(rule.nodes, "value"), "source")]
    if isinstance(lam, LocalWeakAverage):
        rule = lam.ball.rule(lam.order)
        w = lam.scale / lam.ball.volume * rule.weights * lam.test.evaluate(rule.nodes, "value")
        return [(rule.nodes, w, "source")]
    if isinstance(lam, BoundaryFluxAverage):
        rule = lam.ball.rule(lam.order)
        return [(rule.nodes, lam.scale / lam.ball.volume * rule.weights, "source")]
    raise UnsupportedFunctional(f"no data definition for {type(lam).__name__}")


def rhs_values(functionals: Sequence[Functional], problem) -> np.ndarray:
    """Data values ``f_lambda`` computed from the problem's ``f`` and ``g``.

    The manufactured solution is never consulted.
    """
    groups: dict = {}
    for row, lam in enumerate(functionals):
        if not problem.covers(lam):
            raise UnsupportedFunctional(f"{lam.describe()['type']} functional not in problem {problem.kind}")
        for pts, w, which in _rhs_terms(lam, problem):
            groups.setdefault(which, []).append((row, pts, w))
    out = np.zeros(len(functionals))
    for which, items in groups.items():
        fld = problem.data_field(which)
        pts = np.vstack([p for _, p, _ in items])
        rows = np.concatenate([np.full(len(p), r) for r, p, _ in items])
        w = np.concatenate([w for _, _, w in items])
        np.add.at(out, rows, w * fld.evaluate(pts, "value"))
    return out


def rhs_value(lam: Functional, problem) -> float:
    return float(rhs_values([lam], problem)[0])


# -- data maps ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DataMap:
    """A functional family Lambda represented by a nested sampler.

    ``sampler(density)`` must return a list whose prefix structure is nested
    in ``density`` so that sampled suprema are monotone.
    """

    sampler: Callable[[int], list]
    density: int
    name: str = ""

    def functionals(self) -> list:
        return _sample(self, self.density)

    def with_density(self, density: int) -> "DataMap":
        return DataMap(self.sampler, density, self.name)

    def __len__(self):
        return len(self.functionals())


_SAMPLE_CACHE: dict = {}


def _sample(dm: DataMap, density: int) -> list:
    # samplers are functions or bound methods; both hash by identity of what they call
    key = (dm.sampler, density)
    hit = _SAMPLE_CACHE.get(key)
    if hit is None:
        hit = _SAMPLE_CACHE[key] = list(dm.sampler(density))
    return hit


def data_seminorm(data_map: DataMap, u) -> float:
    """``max |lambda(u)|`` over the map's sampled functionals."""
    funcs = data_map.functionals()
    if not funcs:
        raise ValueError("empty data map")
    return float(np.max(np.abs(apply_all(funcs, u))))


# -- serialization ------------------------------------------------------------


def _describe_region(region):
    if isinstance(region, Ball):
        return {"ball": list(region.center), "radius": region.radius}
    return {"domain": region.name, **({"box": [list(b) for b in region.box]} if hasattr(region, "box") else {})}


def _region_from(desc):
    from .domains import make_domain, Rectangle

    if "ball" in desc:
        return Ball(tuple(desc["ball"]), desc["radius"])
    if "box" in desc:
        return Rectangle(tuple(tuple(b) for b in desc["box"]))
    return make_domain(desc["domain"])


def functional_from_description(desc: dict) -> Functional:
    kind = desc["type"]
    if kind == "point":
        return PointEval(tuple(desc["point"]), desc.get("scale", 1.0), desc.get("op", IDENTITY))
    if kind == "diffop":
        return DiffOpEval(tuple(desc["point"]), desc["op"], desc.get("scale", 1.0))
    if kind == "weak-grad":
        return WeakGradientPair(field_from_description(desc["test"]), _region_from(desc["region"]),
                                desc["scale"], desc["order"], desc["cells"])
    if kind == "weak-l2":
        return WeakL2Pair(field_from_description(desc["test"]), _region_from(desc["region"]),
                          desc["scale"], desc["order"], desc["cells"])
    if kind == "local-weak":
        return LocalWeakAverage(tuple(desc["center"]), desc["radius"], field_from_description(desc["test"]),
                                desc["form"], desc["scale"], desc["order"])
    if kind == "flux":
        return BoundaryFluxAverage(tuple(desc["center"]), desc["radius"], desc["scale"], desc["order"])
    raise ValueError(f"unknown functional type {kind!r}")
