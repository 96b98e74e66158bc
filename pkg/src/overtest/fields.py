"""Scalar fields with the derivatives functionals need.

Everything that a functional can act on exposes ``evaluate(points, op)`` with
``op`` in ``{"value", "laplacian", "grad"}``.  Scalar fields return ``(n,)``
(or ``(n, d)`` for ``grad``); trial spaces return an extra trailing axis of
length ``M``.  Functionals never need to know which of the two they hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

OPS = ("value", "laplacian", "grad")


class Field:
    dim: int

    def evaluate(self, points: np.ndarray, op: str = "value") -> np.ndarray:
        raise NotImplementedError

    def __call__(self, points):
        return self.evaluate(np.atleast_2d(points), "value")

    def gradient(self, points):
        return self.evaluate(np.atleast_2d(points), "grad")

    def laplacian(self, points):
        return self.evaluate(np.atleast_2d(points), "laplacian")

    def describe(self) -> dict:
        raise TypeError(f"{type(self).__name__} is not serializable")


def _check_op(op):
    if op not in OPS:
        raise ValueError(f"unknown operator {op!r}")


@dataclass(frozen=True)
class ConstantField(Field):
    c: float = 1.0
    dim: int = 2

    def evaluate(self, points, op="value"):
        _check_op(op)
        n = len(points)
        if op == "grad":
            return np.zeros((n, self.dim))
        return np.full(n, self.c if op == "value" else 0.0)

    def describe(self):
        return {"field": "constant", "c": self.c, "dim": self.dim}


@dataclass(frozen=True)
class BumpField(Field):
    """``scale * (1 - |x-c|^2/r^2)^3`` inside the ball, zero outside (C^2)."""

    center: tuple
    radius: float
    scale: float = 1.0

    @property
    def dim(self):
        return len(self.center)

    def evaluate(self, points, op="value"):
        _check_op(op)
        diff = np.asarray(points, dtype=float) - np.asarray(self.center)
        t = np.sum(diff * diff, axis=1) / self.radius**2
        inside = t < 1.0
        q = np.where(inside, 1.0 - t, 0.0)
        r2 = self.radius**2
        if op == "value":
            return self.scale * q**3
        if op == "grad":
            return self.scale * (-6.0 * q**2 / r2)[:, None] * diff
        d = self.dim
        # g(t) = (1-t)^3, Laplacian = (4 t g'' + 2 d g') / r^2
        return self.scale * (4.0 * t * 6.0 * q - 2.0 * d * 3.0 * q**2) / r2 * inside

    def h1_seminorm(self) -> float:
        # int |grad (1-t)^3|^2 over the ball; scale-free in 2D
        if self.dim != 2:
            raise NotImplementedError
        return abs(self.scale) * math.sqrt(6.0 * math.pi / 5.0)

    def describe(self):
        return {"field": "bump", "center": list(self.center), "radius": self.radius,
                "scale": self.scale}


@dataclass(frozen=True)
class SineMode(Field):
    """``scale * sin(k pi (x-ax)/Lx) sin(l pi (y-ay)/Ly)`` on a rectangle."""

    k: int
    l: int
    box: tuple = ((0.0, 1.0), (0.0, 1.0))
    scale: float = 1.0
    dim: int = 2

    def evaluate(self, points, op="value"):
        _check_op(op)
        (ax, bx), (ay, by) = self.box
        a = self.k * math.pi / (bx - ax)
        b = self.l * math.pi / (by - ay)
        X = a * (points[:, 0] - ax)
        Y = b * (points[:, 1] - ay)
        if op == "value":
            return self.scale * np.sin(X) * np.sin(Y)
        if op == "laplacian":
            return -self.scale * (a * a + b * b) * np.sin(X) * np.sin(Y)
        return self.scale * np.column_stack([a * np.cos(X) * np.sin(Y), b * np.sin(X) * np.cos(Y)])

    def h1_seminorm(self) -> float:
        (ax, bx), (ay, by) = self.box
        a = self.k * math.pi / (bx - ax)
        b = self.l * math.pi / (by - ay)
        area = (bx - ax) * (by - ay)
        return abs(self.scale) * math.sqrt((a * a + b * b) * area / 4.0)

    def describe(self):
        return {"field": "sine", "k": self.k, "l": self.l, "box": [list(b) for b in self.box],
                "scale": self.scale}


@dataclass(frozen=True)
class ProductField(Field):
    """Pointwise product ``scale * a * b``."""

    a: Field
    b: Field
    scale: float = 1.0

    @property
    def dim(self):
        return self.a.dim

    def evaluate(self, points, op="value"):
        _check_op(op)
        av, bv = self.a.evaluate(points, "value"), self.b.evaluate(points, "value")
        if op == "value":
            return self.scale * av * bv
        ag, bg = self.a.evaluate(points, "grad"), self.b.evaluate(points, "grad")
        if op == "grad":
            return self.scale * (ag * bv[:, None] + bg * av[:, None])
        al, bl = self.a.evaluate(points, "laplacian"), self.b.evaluate(points, "laplacian")
        return self.scale * (al * bv + 2.0 * np.sum(ag * bg, axis=1) + av * bl)

    def describe(self):
        return {"field": "product", "a": self.a.describe(), "b": self.b.describe(),
                "scale": self.scale}


@dataclass(frozen=True)
class KernelTranslate(Field):
    """``scale * K(., center)``."""

    kernel: object
    center: tuple
    scale: float = 1.0

    @property
    def dim(self):
        return self.kernel.dim

    def evaluate(self, points, op="value"):
        _check_op(op)
        return self.scale * self.kernel.matrix(points, np.asarray(self.center)[None, :], op)[..., 0]

    def describe(self):
        return {"field": "kernel", "kernel": self.kernel.describe(), "center": list(self.center),
                "scale": self.scale}


@dataclass(frozen=True)
class BoxBubble(Field):
    """``16 x(1-x) y(1-y)`` rescaled to a rectangle; vanishes on its boundary."""

    box: tuple = ((0.0, 1.0), (0.0, 1.0))
    dim: int = 2

    def evaluate(self, points, op="value"):
        _check_op(op)
        (ax, bx), (ay, by) = self.box
        lx, ly = bx - ax, by - ay
        X = (points[:, 0] - ax) / lx
        Y = (points[:, 1] - ay) / ly
        px, py = 4 * X * (1 - X), 4 * Y * (1 - Y)
        if op == "value":
            return px * py
        dpx, dpy = 4 * (1 - 2 * X) / lx, 4 * (1 - 2 * Y) / ly
        if op == "grad":
            return np.column_stack([dpx * py, px * dpy])
        return -8.0 / lx**2 * py - 8.0 / ly**2 * px

    def describe(self):
        return {"field": "box-bubble", "box": [list(b) for b in self.box]}


@dataclass(frozen=True)
class DiskBubble(Field):
    """``1 - |x - c|^2 / R^2``."""

    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    @property
    def dim(self):
        return 2

    def evaluate(self, points, op="value"):
        _check_op(op)
        diff = points - np.asarray(self.center)
        R2 = self.radius**2
        if op == "value":
            return 1.0 - np.sum(diff * diff, axis=1) / R2
        if op == "grad":
            return -2.0 * diff / R2
        return np.full(len(points), -2.0 * self.dim / R2)

    def describe(self):
        return {"field": "disk-bubble", "center": list(self.center), "radius": self.radius}


@dataclass(eq=False)
class SymbolicField(Field):
    """Closed-form field built from a sympy expression in ``x`` (and ``y``).

    Gradient and Laplacian are differentiated symbolically once and
    lambdified.
    """

    expr: object
    dim: int = 2
    name: str = ""
    _fns: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        syms = sp.symbols("x y")[: self.dim]
        e = sp.sympify(self.expr)
        grad = [sp.diff(e, s) for s in syms]
        lap = sum(sp.diff(e, s, 2) for s in syms)
        self._fns["value"] = sp.lambdify(syms, e, "numpy")
        self._fns["grad"] = [sp.lambdify(syms, g, "numpy") for g in grad]
        self._fns["laplacian"] = sp.lambdify(syms, lap, "numpy")

    def evaluate(self, points, op="value"):
        _check_op(op)
        pts = np.asarray(points, dtype=float)
        args = [pts[:, i] for i in range(self.dim)]
        n = len(pts)
        if op == "grad":
            return np.column_stack([np.broadcast_to(np.asarray(f(*args), dtype=float), (n,))
                                    for f in self._fns["grad"]])
        return np.broadcast_to(np.asarray(self._fns[op](*args), dtype=float), (n,)).copy()

    def describe(self):
        return {"field": "symbolic", "expr": str(self.expr), "dim": self.dim}


@dataclass(eq=False)
class CallableField(Field):
    """Field assembled from user callables (used for random smooth fields)."""

    value: Callable
    grad: Callable = None
    lap: Callable = None
    dim: int = 2

    def evaluate(self, points, op="value"):
        _check_op(op)
        fn = {"value": self.value, "grad": self.grad, "laplacian": self.lap}[op]
        if fn is None:
            raise ValueError(f"field does not provide {op}")
        return fn(np.asarray(points, dtype=float))


def field_from_description(desc: dict) -> Field:
    from .kernels import RadialKernel

    kind = desc["field"]
    if kind == "constant":
        return ConstantField(desc["c"], desc.get("dim", 2))
    if kind == "bump":
        return BumpField(tuple(desc["center"]), desc["radius"], desc.get("scale", 1.0))
    if kind == "sine":
        return SineMode(desc["k"], desc["l"], tuple(tuple(b) for b in desc["box"]), desc["scale"])
    if kind == "product":
        return ProductField(field_from_description(desc["a"]), field_from_description(desc["b"]),
                            desc.get("scale", 1.0))
    if kind == "kernel":
        return KernelTranslate(RadialKernel(**desc["kernel"]), tuple(desc["center"]),
                               desc.get("scale", 1.0))
    if kind == "box-bubble":
        return BoxBubble(tuple(tuple(b) for b in desc["box"]))
    if kind == "disk-bubble":
        return DiskBubble(tuple(desc["center"]), desc["radius"])
    if kind == "symbolic":
        return SymbolicField(desc["expr"], desc.get("dim", 2))
    raise ValueError(f"unknown field description {kind!r}")
