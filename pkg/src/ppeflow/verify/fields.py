"""Closed-form separable fields for manufactured solutions.

A 1D factor is a sum of ``poly(s) * sin(k s + phase)`` terms, which is closed
under products and derivatives. A :class:`Field` is a sum of products
``T(t) X(x) Y(y)`` of such factors, so every derivative needed for the
forcing is exact rather than symbolic or numerical.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import polynomial as P

_TWO_PI = 2.0 * math.pi
_HALF_PI = 0.5 * math.pi


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    return c if c.size else np.zeros(1)


class Fn1D:
    """Sum of ``poly(s) sin(k s + phase)`` with ``k >= 0``; pure polynomials use ``k=0, phase=pi/2``."""

    def __init__(self, terms=()):
        merged: dict[tuple, np.ndarray] = {}
        for coeffs, k, phase in terms:
            coeffs = np.asarray(coeffs, dtype=float)
            if k < 0:
                k, phase = -k, math.pi - phase
            if k == 0:
                coeffs = coeffs * math.sin(phase)
                phase = _HALF_PI
            phase = phase % _TWO_PI
            key = (round(k, 12), round(phase, 12) % round(_TWO_PI, 12))
            prev = merged.get(key)
            merged[key] = coeffs if prev is None else P.polyadd(prev, coeffs)
        self.terms = [(_trim(c), k, ph) for (k, ph), c in merged.items() if np.any(_trim(c))]

    @classmethod
    def const(cls, c: float) -> "Fn1D":
        return cls([([c], 0.0, _HALF_PI)])

    @classmethod
    def poly(cls, coeffs) -> "Fn1D":
        return cls([(coeffs, 0.0, _HALF_PI)])

    @classmethod
    def sin(cls, k: float, amp: float = 1.0) -> "Fn1D":
        return cls([([amp], k, 0.0)])

    @classmethod
    def cos(cls, k: float, amp: float = 1.0) -> "Fn1D":
        return cls([([amp], k, _HALF_PI)])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, k, ph in self.terms:
            out += P.polyval(s, c) * np.sin(k * s + ph)
        return out

    def deriv(self, n: int = 1) -> "Fn1D":
        f = self
        for _ in range(n):
            new = []
            for c, k, ph in f.terms:
                if len(c) > 1:
                    new.append((P.polyder(c), k, ph))
                if k != 0:
                    new.append((c * k, k, ph + _HALF_PI))
            f = Fn1D(new)
        return f

    def __mul__(self, other) -> "Fn1D":
        if not isinstance(other, Fn1D):
            return Fn1D([(c * float(other), k, ph) for c, k, ph in self.terms])
        new = []
        for c1, k1, p1 in self.terms:
            for c2, k2, p2 in other.terms:
                c = 0.5 * P.polymul(c1, c2)
                new.append((c, k1 - k2, p1 - p2 + _HALF_PI))
                new.append((-c, k1 + k2, p1 + p2 + _HALF_PI))
        return Fn1D(new)

    __rmul__ = __mul__

    def __add__(self, other: "Fn1D") -> "Fn1D":
        return Fn1D(self.terms + other.terms)

    def __neg__(self) -> "Fn1D":
        return self * -1.0

    def __sub__(self, other: "Fn1D") -> "Fn1D":
        return self + (-other)

    def __pow__(self, n: int) -> "Fn1D":
        out = Fn1D.const(1.0)
        for _ in range(n):
            out = out * self
        return out

    def is_zero(self) -> bool:
        return not self.terms


class Field:
    """Sum of separable products ``T(t) X(x) Y(y)``."""

    def __init__(self, products=()):
        self.products = [(T, X, Y) for T, X, Y in products if not (T.is_zero() or X.is_zero() or Y.is_zero())]

    @classmethod
    def separable(cls, T: Fn1D, X: Fn1D, Y: Fn1D) -> "Field":
        return cls([(T, X, Y)])

    def __call__(self, x: np.ndarray, t) -> np.ndarray:
        """``t`` is a scalar or an array broadcasting against ``x.shape[:-1]``."""
        x = np.asarray(x, dtype=float)
        spatial = self._spatial(x)
        out = np.zeros(x.shape[:-1])
        for (T, _, _), xy in zip(self.products, spatial):
            out = out + np.asarray(T(t), dtype=float) * xy
        return out

    def _spatial(self, x: np.ndarray) -> list:
        """``X(x) Y(y)`` per product, memoized for the most recent point sets.

        Solvers evaluate forcing and boundary data at the same quadrature
        points every stage; only the time factor changes.
        """
        cache = self.__dict__.setdefault("_cache", [])
        key = (x.shape, hash(x.tobytes()))
        for k, pts, val in cache:
            if k == key and np.array_equal(pts, x):
                return val
        val = [X(x[..., 0]) * Y(x[..., 1]) for _, X, Y in self.products]
        cache.insert(0, (key, x.copy(), val))
        del cache[8:]
        return val

    def d(self, var: str, n: int = 1) -> "Field":
        i = "txy".index(var)
        out = []
        for prod in self.products:
            prod = list(prod)
            prod[i] = prod[i].deriv(n)
            out.append(tuple(prod))
        return Field(out)

    def laplacian(self) -> "Field":
        return self.d("x", 2) + self.d("y", 2)

    def __add__(self, other: "Field") -> "Field":
        return Field(self.products + other.products)

    def __neg__(self) -> "Field":
        return self * -1.0

    def __sub__(self, other: "Field") -> "Field":
        return self + (-other)

    def __mul__(self, other) -> "Field":
        if not isinstance(other, Field):
            return Field([(T * float(other), X, Y) for T, X, Y in self.products])
        return Field([(a[0] * b[0], a[1] * b[1], a[2] * b[2]) for a in self.products for b in other.products])

    __rmul__ = __mul__


ZERO = Field()


def sin_sum(k: float, amp: Fn1D, factor_y: Fn1D | None = None, cosine: bool = False) -> Field:
    """``amp(t) sin(k(x+y))`` (or cos) times ``factor_y(y)``, split into separable products."""
    one = Fn1D.const(1.0)
    fy = factor_y if factor_y is not None else one
    sx, cx, sy, cy = Fn1D.sin(k), Fn1D.cos(k), Fn1D.sin(k) * fy, Fn1D.cos(k) * fy
    if cosine:  # cos(a+b) = cos a cos b - sin a sin b
        return Field([(amp, cx, cy), (amp * -1.0, sx, sy)])
    return Field([(amp, sx, cy), (amp, cx, sy)])
