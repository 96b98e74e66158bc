"""Radial kernels with closed-form Laplacians and gradients.

Every kernel is a radial profile ``phi(r / shape)``.  Derivatives are carried
symbolically as finite sums of *terms* in the squared scaled distance
``s = (r / shape)**2``.  For a radial function ``g(s)`` in ``d`` dimensions

    Laplacian g = 4 s g''(s) + 2 d g'(s)
    grad g      = 2 (x - y) / shape**2 * g'(s)

so each family only has to say how ``d/ds`` acts on its own term type.

Term types
----------
gaussian      (k, 0)    s**k * exp(-s)
matern        (k, mu)   s**k * r**mu * K_mu(r),   r = sqrt(s), mu half-integer
multiquadric  (k, beta) s**k * (1 + s)**beta
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np


class SmoothnessError(ValueError):
    """Requested derivative order exceeds what the kernel guarantees."""


class KernelFamily(str, Enum):
    WHITTLE_MATERN = "matern"
    GAUSSIAN = "gaussian"
    MULTIQUADRIC = "multiquadric"


Terms = dict  # (k, param) -> coefficient


def _add(acc: Terms, key, coef: float) -> None:
    if coef == 0.0:
        return
    acc[key] = acc.get(key, 0.0) + coef


def _matern_phi(mu: float, r: np.ndarray) -> np.ndarray:
    """``r**mu * K_mu(r)`` for positive half-integer ``mu``."""
    p = int(round(mu - 0.5))
    out = np.zeros_like(r)
    for k in range(p + 1):
        c = math.factorial(p + k) / (math.factorial(k) * math.factorial(p - k)) / 2.0**k
        out += c * r ** (p - k)
    return math.sqrt(math.pi / 2.0) * np.exp(-r) * out


def _matern_term(k: int, mu: float, s: np.ndarray) -> np.ndarray:
    r = np.sqrt(s)
    if mu > 0:
        return s**k * _matern_phi(mu, r) if k else _matern_phi(mu, r)
    # r**mu K_mu(r) = r**(2 mu) * r**|mu| K_|mu|(r) since K is even in its order
    expo = 2 * k + 2 * mu
    base = _matern_phi(-mu, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        powr = np.where(r > 0, r ** expo, 0.0 if expo > 0 else (1.0 if expo == 0 else np.inf))
    return powr * base


@dataclass(frozen=True)
class RadialKernel:
    """Translation-invariant kernel ``K(x, y) = phi(|x - y| / shape)``.

    ``smoothness`` is the Sobolev order ``m`` of the native space for the
    Whittle-Matern family (order ``nu = m - dim/2`` must be a half-integer);
    it is ignored by the other families.  Matern and Gaussian kernels are
    normalized to ``K(x, x) = 1``; the multiquadric is left as
    ``sqrt(1 + (r/shape)**2)`` and is only conditionally positive definite.
    """

    family: KernelFamily
    smoothness: float = 0.0
    shape: float = 1.0
    dim: int = 2

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if self.shape <= 0:
            raise ValueError("shape must be positive")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.family is KernelFamily.WHITTLE_MATERN:
            nu = self.smoothness - self.dim / 2.0
            if nu <= 0 or abs((nu - 0.5) - round(nu - 0.5)) > 1e-12:
                raise ValueError(
                    f"Matern order nu = m - d/2 = {nu} must be a positive half-integer"
                )

    # -- family bookkeeping -------------------------------------------------

    @property
    def nu(self) -> float:
        return self.smoothness - self.dim / 2.0

    @property
    def positive_definite(self) -> bool:
        return self.family is not KernelFamily.MULTIQUADRIC

    def max_derivative_order(self) -> float:
        """Largest even derivative order the profile is guaranteed to carry."""
        if self.family is KernelFamily.WHITTLE_MATERN:
            return self.nu
        return math.inf

    def require_order(self, order: int) -> None:
        # Matern of order nu is C^{2k} at the origin only when nu > k
        if self.family is KernelFamily.WHITTLE_MATERN and not self.nu > order:
            raise SmoothnessError(
                f"Matern kernel with m={self.smoothness}, d={self.dim} does not support "
                f"derivatives of order {order} (needs m > {order} + d/2)"
            )

    @cached_property
    def _base(self) -> Terms:
        if self.family is KernelFamily.WHITTLE_MATERN:
            return {(0, self.nu): 1.0}
        if self.family is KernelFamily.GAUSSIAN:
            return {(0, 0.0): 1.0}
        return {(0, 0.5): 1.0}

    @cached_property
    def _scale(self) -> float:
        if self.family is KernelFamily.WHITTLE_MATERN:
            return 1.0 / (math.gamma(self.nu) * 2.0 ** (self.nu - 1.0))
        return 1.0

    def _ds(self, terms: Terms) -> Terms:
        out: Terms = {}
        for (k, p), c in terms.items():
            if k:
                _add(out, (k - 1, p), c * k)
            if self.family is KernelFamily.GAUSSIAN:
                _add(out, (k, p), -c)
            elif self.family is KernelFamily.WHITTLE_MATERN:
                _add(out, (k, p - 1.0), -0.5 * c)
            else:
                _add(out, (k, p - 1.0), c * p)
        return out

    def _lap(self, terms: Terms) -> Terms:
        d1 = self._ds(terms)
        d2 = self._ds(d1)
        out: Terms = {}
        for (k, p), c in d2.items():
            _add(out, (k + 1, p), 4.0 * c)
        for key, c in d1.items():
            _add(out, key, 2.0 * self.dim * c)
        return out

    def _eval_terms(self, terms: Terms, s: np.ndarray) -> np.ndarray:
        out = np.zeros_like(s)
        for (k, p), c in terms.items():
            if self.family is KernelFamily.GAUSSIAN:
                out += c * s**k * np.exp(-s)
            elif self.family is KernelFamily.WHITTLE_MATERN:
                out += c * _matern_term(k, p, s)
            else:
                out += c * s**k * (1.0 + s) ** p
        return out * self._scale

    @cached_property
    def _profiles(self) -> dict:
        base = self._base
        lap = self._lap(base)
        return {
            "value": base,
            "ds": self._ds(base),
            "laplacian": lap,
            "ds_laplacian": self._ds(lap),
            "bilaplacian": self._lap(lap),
        }

    # -- evaluation ---------------------------------------------------------

    def _sqdist(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape[-1] != self.dim or y.shape[-1] != self.dim:
            raise ValueError(
                f"points of dimension {x.shape[-1]}/{y.shape[-1]} given to a {self.dim}-d kernel"
            )
        diff = x - y
        return np.sum(diff * diff, axis=-1) / self.shape**2, diff

    def eval(self, x, y) -> np.ndarray:
        s, _ = self._sqdist(x, y)
        return self._eval_terms(self._profiles["value"], s)

    def eval_laplacian_x(self, x, y) -> np.ndarray:
        """Laplacian in the first argument (equal to the one in the second)."""
        self.require_order(2)
        s, _ = self._sqdist(x, y)
        return self._eval_terms(self._profiles["laplacian"], s) / self.shape**2

    def eval_laplacian_xy(self, x, y) -> np.ndarray:
        self.require_order(4)
        s, _ = self._sqdist(x, y)
        return self._eval_terms(self._profiles["bilaplacian"], s) / self.shape**4

    def gradient_x(self, x, y) -> np.ndarray:
        """Gradient in the first argument, shape ``broadcast(x, y).shape``."""
        self.require_order(1)
        s, diff = self._sqdist(x, y)
        g = self._eval_terms(self._profiles["ds"], s)
        return 2.0 * diff * (g / self.shape**2)[..., None]

    def gradient_x_laplacian(self, x, y) -> np.ndarray:
        """Gradient in ``x`` of the Laplacian in ``y``."""
        self.require_order(3)
        s, diff = self._sqdist(x, y)
        g = self._eval_terms(self._profiles["ds_laplacian"], s)
        return 2.0 * diff * (g / self.shape**4)[..., None]

    def matrix(self, X, Y, op: str = "value") -> np.ndarray:
        """Kernel block ``op_x K(X_i, Y_j)``.

        ``op`` is one of ``value``, ``laplacian``, ``grad`` (trailing axes
        ``(n, m)`` or ``(n, d, m)``).
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        xa, ya = X[:, None, :], Y[None, :, :]
        if op == "value":
            return self.eval(xa, ya)
        if op == "laplacian":
            return self.eval_laplacian_x(xa, ya)
        if op == "bilaplacian":
            return self.eval_laplacian_xy(xa, ya)
        if op == "grad":
            return np.moveaxis(self.gradient_x(xa, ya), -1, 1)
        raise ValueError(f"unknown kernel operator {op!r}")

    def describe(self) -> dict:
        return {
            "family": self.family.value,
            "smoothness": self.smoothness,
            "shape": self.shape,
            "dim": self.dim,
        }


def make_kernel(name: str, smoothness: float = 4.5, shape: float = 1.0, dim: int = 2) -> RadialKernel:
    aliases = {"matern": "matern", "whittle-matern": "matern", "gaussian": "gaussian",
               "gauss": "gaussian", "mq": "multiquadric", "multiquadric": "multiquadric"}
    try:
        fam = aliases[name.lower()]
    except KeyError:
        raise ValueError(f"unknown kernel family {name!r}") from None
    return RadialKernel(KernelFamily(fam), smoothness=smoothness, shape=shape, dim=dim)
