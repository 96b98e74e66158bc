"""Domains: nested samplers, boundary geometry, quadrature, measurement grids.

Samplers are low-discrepancy *prefixes*: asking for more points always
returns a superset of what a smaller request returned.  This is what makes
sampled data seminorms monotone in the sampling density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from . import quadrature as quad
from .fields import BoxBubble, DiskBubble


def van_der_corput(n: int, base: int = 2, start: int = 1) -> np.ndarray:
    out = np.empty(n)
    for i in range(n):
        k, f, v = i + start, 1.0, 0.0
        while k:
            f /= base
            v += f * (k % base)
            k //= base
        out[i] = v
    return out


@lru_cache(maxsize=32)
def _halton(dim: int, n: int) -> np.ndarray:
    # unscrambled Halton; drop the origin
    return qmc.Halton(d=dim, scramble=False).random(n + 1)[1:]


class Domain:
    name: str
    dim: int

    def interior_points(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def boundary_points(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def contains(self, pts) -> np.ndarray:
        raise NotImplementedError

    def distance_to_boundary(self, pts) -> np.ndarray:
        raise NotImplementedError

    def measurement_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Fixed dense grid and its trapezoid-type weights (sum = measure)."""
        raise NotImplementedError

    def quadrature(self, order: int = quad.DEFAULT_ORDER, cells: int = 8) -> quad.QuadratureRule:
        raise NotImplementedError

    def bubble(self):
        raise NotImplementedError

    @property
    def measure(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Interval(Domain):
    a: float = -1.0
    b: float = 1.0
    grid_size: int = 2001

    name = "interval"
    dim = 1

    def interior_points(self, n):
        return (self.a + (self.b - self.a) * van_der_corput(n))[:, None]

    def boundary_points(self, n=2):
        pts = np.array([[self.a], [self.b]])[: max(n, 0)]
        return pts, np.array([[-1.0], [1.0]])[: len(pts)]

    def contains(self, pts):
        x = np.asarray(pts)[:, 0]
        return (x >= self.a) & (x <= self.b)

    def distance_to_boundary(self, pts):
        x = np.asarray(pts)[:, 0]
        return np.minimum(x - self.a, self.b - x)

    def measurement_grid(self):
        x = np.linspace(self.a, self.b, self.grid_size)
        w = np.full_like(x, (self.b - self.a) / (self.grid_size - 1))
        w[[0, -1]] *= 0.5
        return x[:, None], w

    def quadrature(self, order=quad.DEFAULT_ORDER, cells=8):
        return quad.composite_gauss_rule(order, (self.a, self.b), cells)

    def dense_points(self, n):
        """Interval sampler used for point-evaluation families: both endpoints
        first, then the van der Corput prefix (nested in ``n``)."""
        ends = np.array([self.a, self.b])
        inner = self.a + (self.b - self.a) * van_der_corput(max(n - 2, 0))
        return np.concatenate([ends, inner])[:n, None]

    @property
    def measure(self):
        return self.b - self.a


@dataclass(frozen=True)
class Rectangle(Domain):
    box: tuple = ((0.0, 1.0), (0.0, 1.0))
    grid_size: int = 201

    name = "square"
    dim = 2

    @property
    def lo(self):
        return np.array([self.box[0][0], self.box[1][0]])

    @property
    def hi(self):
        return np.array([self.box[0][1], self.box[1][1]])

    def interior_points(self, n):
        return self.lo + (self.hi - self.lo) * _halton(2, n)

    def boundary_points(self, n):
        """Corners first, then a van der Corput prefix along the perimeter."""
        (ax, bx), (ay, by) = self.box
        lx, ly = bx - ax, by - ay
        per = 2 * (lx + ly)
        corners = np.array([[ax, ay], [bx, ay], [bx, by], [ax, by]])
        corner_normals = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]) / math.sqrt(2.0)
        t = van_der_corput(max(n - 4, 0)) * per
        pts = np.empty((len(t), 2))
        nrm = np.empty((len(t), 2))
        for i, s in enumerate(t):
            if s < lx:
                pts[i], nrm[i] = (ax + s, ay), (0, -1)
            elif s < lx + ly:
                pts[i], nrm[i] = (bx, ay + s - lx), (1, 0)
            elif s < 2 * lx + ly:
                pts[i], nrm[i] = (bx - (s - lx - ly), by), (0, 1)
            else:
                pts[i], nrm[i] = (ax, by - (s - 2 * lx - ly)), (-1, 0)
        return np.vstack([corners, pts])[:n], np.vstack([corner_normals, nrm])[:n]

    def contains(self, pts):
        pts = np.asarray(pts)
        return np.all((pts >= self.lo - 1e-14) & (pts <= self.hi + 1e-14), axis=1)

    def distance_to_boundary(self, pts):
        pts = np.asarray(pts)
        return np.minimum(pts - self.lo, self.hi - pts).min(axis=1)

    def measurement_grid(self):
        (ax, bx), (ay, by) = self.box
        x = np.linspace(ax, bx, self.grid_size)
        y = np.linspace(ay, by, self.grid_size)
        wx = np.full_like(x, (bx - ax) / (self.grid_size - 1))
        wy = np.full_like(y, (by - ay) / (self.grid_size - 1))
        wx[[0, -1]] *= 0.5
        wy[[0, -1]] *= 0.5
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()]), np.outer(wx, wy).ravel()

    def quadrature(self, order=quad.DEFAULT_ORDER, cells=8):
        return quad.tensor_rule(order, self.box, cells)

    def boundary_quadrature(self, order=quad.DEFAULT_ORDER, cells=4):
        return quad.square_boundary_rule(order, self.box, cells)

    def bubble(self):
        return BoxBubble(self.box)

    def grid(self, n: int) -> np.ndarray:
        """Uniform ``n x n`` grid including the boundary."""
        (ax, bx), (ay, by) = self.box
        X, Y = np.meshgrid(np.linspace(ax, bx, n), np.linspace(ay, by, n), indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def measure(self):
        (ax, bx), (ay, by) = self.box
        return (bx - ax) * (by - ay)


@dataclass(frozen=True)
class Disk(Domain):
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    grid_shape: tuple = (200, 100)  # (angles, radii)

    name = "disk"
    dim = 2

    def interior_points(self, n):
        # rejection from the bounding square keeps the prefix property
        k = max(2 * n, 16)
        while True:
            raw = 2.0 * _halton(2, k) - 1.0
            inside = raw[np.sum(raw * raw, axis=1) < 1.0]
            if len(inside) >= n:
                return np.asarray(self.center) + self.radius * inside[:n]
            k *= 2

    def boundary_points(self, n):
        th = 2.0 * np.pi * np.concatenate([[0.0], van_der_corput(max(n - 1, 0))])[:n]
        nrm = np.column_stack([np.cos(th), np.sin(th)])
        return np.asarray(self.center) + self.radius * nrm, nrm

    def contains(self, pts):
        d = np.asarray(pts) - np.asarray(self.center)
        return np.sum(d * d, axis=1) <= self.radius**2 * (1 + 1e-14)

    def distance_to_boundary(self, pts):
        d = np.asarray(pts) - np.asarray(self.center)
        return self.radius - np.sqrt(np.sum(d * d, axis=1))

    def measurement_grid(self):
        nth, nr = self.grid_shape
        th = 2.0 * np.pi * np.arange(nth) / nth
        r = np.linspace(0.0, self.radius, nr)
        wr = np.full_like(r, self.radius / (nr - 1)) * r
        wr[-1] *= 0.5
        R, T = np.meshgrid(r, th, indexing="ij")
        pts = np.asarray(self.center) + np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
        W = np.outer(wr, np.full(nth, 2.0 * np.pi / nth)).ravel()
        return pts, W

    def quadrature(self, order=quad.DEFAULT_ORDER, cells=8):
        return quad.disk_rule(self.center, self.radius, order * max(cells // 4, 1))

    def boundary_quadrature(self, order=quad.DEFAULT_ORDER, cells=4):
        return quad.circle_rule(self.center, self.radius, 2 * order * cells)

    def bubble(self):
        return DiskBubble(self.center, self.radius)

    @property
    def measure(self):
        return math.pi * self.radius**2


def make_domain(name: str) -> Domain:
    name = name.lower()
    if name in ("square", "unit-square"):
        return Rectangle()
    if name in ("disk", "unit-disk"):
        return Disk()
    if name in ("interval", "[-1,1]"):
        return Interval()
    if name == "unit-interval":
        return Interval(0.0, 1.0)
    raise ValueError(f"unknown domain {name!r}")
