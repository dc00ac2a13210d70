"""Quaternion arithmetic.

Quaternions double as points of R^4 via ``x0 + i x1 + j x2 + k x3``.  Two
representations coexist:

* :class:`Quaternion`, an immutable value used at API boundaries and in JSON;
* plain ``ndarray`` with a trailing axis of length 4, used by the vectorized
  kernels (``qmul``, ``qinv``, ...) that every map evaluator runs on.

The public operations (:func:`mul`, :func:`inv`, :func:`conj`, ...) accept
either form and return the same kind they were given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NearZeroQuaternion

EPS_INV = 1e-12

_CONJ = np.array([1.0, -1.0, -1.0, -1.0])


@dataclass(frozen=True, slots=True)
class Quaternion:
    w: float = 0.0
    x1: float = 0.0
    x2: float = 0.0
    x3: float = 0.0

    def __post_init__(self):
        for name in ("w", "x1", "x2", "x3"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"quaternion component {name} is not finite: {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        a = np.asarray(a, dtype=float)
        if a.shape != (4,):
            raise ValueError(f"expected 4 components, got shape {a.shape}")
        return cls(*a.tolist())

    def to_array(self) -> np.ndarray:
        return np.array([self.w, self.x1, self.x2, self.x3])

    def to_json(self) -> list:
        return [self.w, self.x1, self.x2, self.x3]

    def __array__(self, dtype=None, copy=None):
        return np.array([self.w, self.x1, self.x2, self.x3], dtype=dtype)

    def __iter__(self):
        return iter((self.w, self.x1, self.x2, self.x3))

    def __add__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return Quaternion(self.w + o.w, self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3)

    __radd__ = __add__

    def __sub__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return Quaternion(self.w - o.w, self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3)

    def __rsub__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self):
        return Quaternion(-self.w, -self.x1, -self.x2, -self.x3)

    def __mul__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return _mul_scalar(self, o)

    def __rmul__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return _mul_scalar(o, self)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion(self.w / other, self.x1 / other, self.x2 / other, self.x3 / other)
        return NotImplemented

    def __abs__(self):
        return norm(self)

    def __repr__(self):
        return f"Quaternion({self.w!r}, {self.x1!r}, {self.x2!r}, {self.x3!r})"


def _coerce(v):
    if isinstance(v, Quaternion):
        return v
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return Quaternion(float(v))
    return None


def _mul_scalar(a: Quaternion, b: Quaternion) -> Quaternion:
    a0, a1, a2, a3 = a.w, a.x1, a.x2, a.x3
    b0, b1, b2, b3 = b.w, b.x1, b.x2, b.x3
    return Quaternion(
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    )


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


# -- vectorized kernels ------------------------------------------------------

def qmul(a, b):
    """Hamilton product of quaternion arrays, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    b0, b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=-1,
    )


def qconj(a):
    return np.asarray(a, dtype=float) * _CONJ


def qnorm2(a):
    a = np.asarray(a, dtype=float)
    return np.einsum("...i,...i->...", a, a)


def qinv(a, eps: float = EPS_INV):
    """Inverse ``conj(a)/|a|^2``; raises if any entry has ``|a| <= eps``."""
    a = np.asarray(a, dtype=float)
    n2 = qnorm2(a)
    if np.any(n2 <= eps * eps):
        raise NearZeroQuaternion("inverse of a quaternion with |a| <= eps", cause="near-zero quaternion")
    return qconj(a) / n2[..., None]


def left_matrix(a) -> np.ndarray:
    """Real 4x4 matrix of ``v -> a v``."""
    a0, a1, a2, a3 = np.asarray(a, dtype=float)
    return np.array(
        [
            [a0, -a1, -a2, -a3],
            [a1, a0, -a3, a2],
            [a2, a3, a0, -a1],
            [a3, -a2, a1, a0],
        ]
    )


def right_matrix(a) -> np.ndarray:
    """Real 4x4 matrix of ``v -> v a``."""
    a0, a1, a2, a3 = np.asarray(a, dtype=float)
    return np.array(
        [
            [a0, -a1, -a2, -a3],
            [a1, a0, a3, -a2],
            [a2, -a3, a0, a1],
            [a3, a2, -a1, a0],
        ]
    )


# -- public operations ------------------------------------------------------

def _both_scalar(*args):
    return all(isinstance(a, Quaternion) for a in args)


def mul(a, b):
    if _both_scalar(a, b):
        return _mul_scalar(a, b)
    return qmul(a, b)


def inv(a, eps: float = EPS_INV):
    if isinstance(a, Quaternion):
        n2 = a.w * a.w + a.x1 * a.x1 + a.x2 * a.x2 + a.x3 * a.x3
        if n2 <= eps * eps:
            raise NearZeroQuaternion(f"cannot invert {a!r}: |a| <= {eps}", cause="near-zero quaternion")
        return Quaternion(a.w / n2, -a.x1 / n2, -a.x2 / n2, -a.x3 / n2)
    return qinv(a, eps)


def conj(a):
    if isinstance(a, Quaternion):
        return Quaternion(a.w, -a.x1, -a.x2, -a.x3)
    return qconj(a)


def re(a):
    if isinstance(a, Quaternion):
        return a.w
    return np.asarray(a, dtype=float)[..., 0]


def im(a):
    if isinstance(a, Quaternion):
        return Quaternion(0.0, a.x1, a.x2, a.x3)
    out = np.array(a, dtype=float)
    out[..., 0] = 0.0
    return out


def norm(a):
    if isinstance(a, Quaternion):
        return math.hypot(a.w, a.x1, a.x2, a.x3)
    return np.linalg.norm(np.asarray(a, dtype=float), axis=-1)


def inner(xi, eta):
    """Euclidean inner product ``Re(xi * conj(eta))``, i.e. the R^4 dot product."""
    if _both_scalar(xi, eta):
        return xi.w * eta.w + xi.x1 * eta.x1 + xi.x2 * eta.x2 + xi.x3 * eta.x3
    return np.einsum("...i,...i->...", np.asarray(xi, dtype=float), np.asarray(eta, dtype=float))


def as_array(q) -> np.ndarray:
    """Array view of a Quaternion, sequence, or array of quaternions."""
    return np.asarray(q, dtype=float)


def from_json(v) -> Quaternion:
    if not isinstance(v, (list, tuple)) or len(v) != 4:
        raise ValueError(f"quaternion must be a JSON array of 4 numbers, got {v!r}")
    return Quaternion(*(float(c) for c in v))
