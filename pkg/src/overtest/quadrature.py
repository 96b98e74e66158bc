"""Quadrature rules for weak and local-weak functionals.

Rules are plain containers of nodes and weights.  Boundary rules also carry
outward unit normals so that flux integrals can be formed by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

DEFAULT_ORDER = 8


class Region(str, Enum):
    INTERVAL = "interval"
    TENSOR_SQUARE = "tensor-square"
    DISK = "disk"
    CIRCLE_BOUNDARY = "circle-boundary"
    SQUARE_BOUNDARY = "square-boundary"
    BALL_IN_DOMAIN = "ball-in-domain"


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    region: Region
    degree: Optional[int] = None  # polynomial exactness, None when not exact
    normals: Optional[np.ndarray] = None
    measure: Optional[float] = None

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def __len__(self) -> int:
        return len(self.weights)


def gauss_rule(order: int, interval=(-1.0, 1.0)) -> QuadratureRule:
    """Gauss-Legendre rule, exact up to degree ``2*order - 1`` on ``interval``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    a, b = map(float, interval)
    t, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (b - a) * t + 0.5 * (a + b)
    return QuadratureRule(x[:, None], 0.5 * (b - a) * w, Region.INTERVAL,
                          degree=2 * order - 1, measure=b - a)


def _composite_1d(order: int, a: float, b: float, cells: int):
    edges = np.linspace(a, b, cells + 1)
    t, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    ww = (half[:, None] * w[None, :]).ravel()
    return x, ww


def composite_gauss_rule(order: int, interval=(-1.0, 1.0), cells: int = 1) -> QuadratureRule:
    a, b = map(float, interval)
    x, w = _composite_1d(order, a, b, cells)
    return QuadratureRule(x[:, None], w, Region.INTERVAL, degree=2 * order - 1, measure=b - a)


def tensor_rule(order: int = DEFAULT_ORDER, box=((0.0, 1.0), (0.0, 1.0)), cells: int = 1) -> QuadratureRule:
    """Composite tensor Gauss rule on an axis-aligned rectangle."""
    (ax, bx), (ay, by) = box
    x, wx = _composite_1d(order, ax, bx, cells)
    y, wy = _composite_1d(order, ay, by, cells)
    X, Y = np.meshgrid(x, y, indexing="ij")
    W = np.outer(wx, wy)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    return QuadratureRule(nodes, W.ravel(), Region.TENSOR_SQUARE, degree=2 * order - 1,
                          measure=(bx - ax) * (by - ay))


def disk_rule(center=(0.0, 0.0), radius: float = 1.0, order: int = DEFAULT_ORDER) -> QuadratureRule:
    """Polar rule: Gauss in the radius, trapezoid with ``2*order`` angles."""
    c = np.asarray(center, dtype=float)
    t, w = np.polynomial.legendre.leggauss(order)
    rho = 0.5 * radius * (t + 1.0)
    wr = 0.5 * radius * w * rho
    nth = 2 * order
    th = 2.0 * np.pi * (np.arange(nth) + 0.5) / nth
    R, T = np.meshgrid(rho, th, indexing="ij")
    nodes = c + np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    W = np.outer(wr, np.full(nth, 2.0 * np.pi / nth)).ravel()
    return QuadratureRule(nodes, W, Region.DISK, degree=min(nth - 1, 2 * order - 2),
                          measure=np.pi * radius**2)


def circle_rule(center=(0.0, 0.0), radius: float = 1.0, n: int = 2 * DEFAULT_ORDER) -> QuadratureRule:
    """Trapezoid rule on a circle with outward normals; exact for trig degree < n."""
    c = np.asarray(center, dtype=float)
    th = 2.0 * np.pi * (np.arange(n) + 0.5) / n
    normals = np.column_stack([np.cos(th), np.sin(th)])
    return QuadratureRule(c + radius * normals, np.full(n, 2.0 * np.pi * radius / n),
                          Region.CIRCLE_BOUNDARY, degree=n - 1, normals=normals,
                          measure=2.0 * np.pi * radius)


def square_boundary_rule(order: int = DEFAULT_ORDER, box=((0.0, 1.0), (0.0, 1.0)), cells: int = 1) -> QuadratureRule:
    (ax, bx), (ay, by) = box
    xs, wx = _composite_1d(order, ax, bx, cells)
    ys, wy = _composite_1d(order, ay, by, cells)
    parts = [
        (np.column_stack([xs, np.full_like(xs, ay)]), wx, (0.0, -1.0)),
        (np.column_stack([np.full_like(ys, bx), ys]), wy, (1.0, 0.0)),
        (np.column_stack([xs, np.full_like(xs, by)]), wx, (0.0, 1.0)),
        (np.column_stack([np.full_like(ys, ax), ys]), wy, (-1.0, 0.0)),
    ]
    nodes = np.vstack([p[0] for p in parts])
    weights = np.concatenate([p[1] for p in parts])
    normals = np.vstack([np.tile(p[2], (len(p[1]), 1)) for p in parts])
    return QuadratureRule(nodes, weights, Region.SQUARE_BOUNDARY, degree=2 * order - 1,
                          normals=normals, measure=2.0 * ((bx - ax) + (by - ay)))


def clipped_ball_rule(center, radius: float, contains: Callable[[np.ndarray], np.ndarray],
                      order: int = DEFAULT_ORDER, cells: int = 4) -> QuadratureRule:
    """Ball intersected with a domain.

    Falls back to rejection weighting of a composite tensor rule on the
    bounding box: nodes outside the ball or the domain are dropped.  Only
    first-order accurate at the clipped edge; weights sum to the measure of
    the kept cloud, which is what averaging functionals divide by.
    """
    c = np.asarray(center, dtype=float)
    box = ((c[0] - radius, c[0] + radius), (c[1] - radius, c[1] + radius))
    base = tensor_rule(order, box, cells)
    keep = (np.sum((base.nodes - c) ** 2, axis=1) <= radius**2) & contains(base.nodes)
    w = base.weights[keep]
    return QuadratureRule(base.nodes[keep], w, Region.BALL_IN_DOMAIN, degree=None,
                          measure=float(w.sum()))


def integrate_region(rule: QuadratureRule, f) -> float:
    vals = np.asarray(f(rule.nodes), dtype=float)
    if vals.shape != (len(rule),):
        raise ValueError(f"field returned shape {vals.shape} for {len(rule)} nodes")
    return float(rule.weights @ vals)


def integrate_boundary(rule: QuadratureRule, f) -> float:
    if rule.normals is None:
        raise ValueError(f"{rule.region.value} rule is not a boundary rule")
    return integrate_region(rule, f)
