"""Quaternion-valued alternating forms on R^4.

A k-form is stored as its full antisymmetric coefficient tensor of shape
``(4,)*k + (4,)``: the leading axes index ``dx^mu`` and the trailing axis holds
the quaternion.  Products keep factor order, since quaternions do not commute
(``a ^ a`` is nonzero in general).
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .quat import qconj, qmul

PAIRS = list(combinations(range(4), 2))
TRIPLES = list(combinations(range(4), 3))


def _check_shape(arr, k):
    arr = np.asarray(arr, dtype=float)
    if arr.shape != (4,) * k + (4,):
        raise ValueError(f"expected coefficient shape {(4,) * k + (4,)}, got {arr.shape}")
    return arr


class QOneForm:
    """Quaternion 1-form; ``coeffs[nu]`` is its value on the basis vector ``e_nu``."""

    degree = 1

    def __init__(self, coeffs):
        self.coeffs = _check_shape(coeffs, 1)

    @classmethod
    def dx(cls) -> "QOneForm":
        """The identity form ``dx = dx^0 + i dx^1 + j dx^2 + k dx^3``."""
        return cls(np.eye(4))

    @classmethod
    def real(cls, covector) -> "QOneForm":
        c = np.zeros((4, 4))
        c[:, 0] = np.asarray(covector, dtype=float)
        return cls(c)

    @classmethod
    def basis(cls, mu: int) -> "QOneForm":
        c = np.zeros((4, 4))
        c[mu, 0] = 1.0
        return cls(c)

    def __call__(self, v):
        """Value on a vector (or a stack of vectors) of R^4."""
        return np.asarray(v, dtype=float) @ self.coeffs

    def conj(self) -> "QOneForm":
        return QOneForm(qconj(self.coeffs))

    def component(self, mu: int) -> np.ndarray:
        """Real covector of the ``mu``-th quaternion component."""
        return self.coeffs[:, mu].copy()

    def matrix(self) -> np.ndarray:
        """Real 4x4 matrix of the linear map ``v -> self(v)``."""
        return self.coeffs.T.copy()

    def precompose(self, linear) -> "QOneForm":
        """The form ``v -> self(linear @ v)``."""
        return QOneForm(np.asarray(linear, dtype=float).T @ self.coeffs)

    def lmul(self, q) -> "QOneForm":
        return QOneForm(qmul(np.asarray(q, dtype=float), self.coeffs))

    def rmul(self, q) -> "QOneForm":
        return QOneForm(qmul(self.coeffs, np.asarray(q, dtype=float)))

    def __add__(self, other):
        return QOneForm(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return QOneForm(self.coeffs - other.coeffs)

    def __neg__(self):
        return QOneForm(-self.coeffs)

    def __mul__(self, s):
        return QOneForm(self.coeffs * float(s))

    __rmul__ = __mul__

    def to_json(self) -> list:
        return self.coeffs.tolist()

    @classmethod
    def from_json(cls, v) -> "QOneForm":
        return cls(np.array(v, dtype=float))

    def __repr__(self):
        return f"QOneForm({self.coeffs.tolist()!r})"


class QTwoForm:
    degree = 2

    def __init__(self, tensor):
        self.tensor = _check_shape(tensor, 2)

    @classmethod
    def from_coefficients(cls, coeffs: dict) -> "QTwoForm":
        """Build from ``{(mu, nu): quaternion}`` with ``mu < nu`` (missing keys are zero)."""
        t = np.zeros((4, 4, 4))
        for (mu, nu), c in coeffs.items():
            c = np.array([float(c), 0, 0, 0]) if np.ndim(c) == 0 else np.asarray(c, dtype=float)
            if mu == nu:
                raise ValueError("repeated index in a 2-form coefficient")
            if mu > nu:
                mu, nu, c = nu, mu, -c
            t[mu, nu] += c
            t[nu, mu] -= c
        return cls(t)

    def coefficient(self, mu: int, nu: int) -> np.ndarray:
        return self.tensor[mu, nu].copy()

    def __call__(self, u, v):
        return np.einsum("m,n,mnq->q", np.asarray(u, float), np.asarray(v, float), self.tensor)

    def conj(self) -> "QTwoForm":
        return QTwoForm(qconj(self.tensor))

    def lmul(self, q) -> "QTwoForm":
        return QTwoForm(qmul(np.asarray(q, dtype=float), self.tensor))

    def __add__(self, other):
        return QTwoForm(self.tensor + other.tensor)

    def __sub__(self, other):
        return QTwoForm(self.tensor - other.tensor)

    def __mul__(self, s):
        return QTwoForm(self.tensor * float(s))

    __rmul__ = __mul__

    def to_json(self) -> dict:
        return {f"{mu}{nu}": self.tensor[mu, nu].tolist() for mu, nu in PAIRS}

    @classmethod
    def from_json(cls, d: dict) -> "QTwoForm":
        return cls.from_coefficients({(int(k[0]), int(k[1])): np.array(v, float) for k, v in d.items()})


class QThreeForm:
    degree = 3

    def __init__(self, tensor):
        self.tensor = _check_shape(tensor, 3)

    def coefficient(self, lam: int, mu: int, nu: int) -> np.ndarray:
        return self.tensor[lam, mu, nu].copy()

    def coefficients(self) -> np.ndarray:
        """The four independent coefficients, in :data:`TRIPLES` order, shape (4, 4)."""
        return np.array([self.tensor[t] for t in TRIPLES])

    def __call__(self, u, v, w):
        return np.einsum(
            "l,m,n,lmnq->q", np.asarray(u, float), np.asarray(v, float), np.asarray(w, float), self.tensor
        )

    def __add__(self, other):
        return QThreeForm(self.tensor + other.tensor)

    def __sub__(self, other):
        return QThreeForm(self.tensor - other.tensor)

    def lmul(self, q) -> "QThreeForm":
        return QThreeForm(qmul(np.asarray(q, dtype=float), self.tensor))

    def __mul__(self, s):
        return QThreeForm(self.tensor * float(s))

    __rmul__ = __mul__

    def to_json(self) -> dict:
        return {f"{a}{b}{c}": self.tensor[a, b, c].tolist() for a, b, c in TRIPLES}


def wedge11(a: QOneForm, b: QOneForm) -> QTwoForm:
    """``(a ^ b)(u, v) = a(u) b(v) - a(v) b(u)``."""
    return QTwoForm(qmul(a.coeffs[:, None, :], b.coeffs[None, :, :]) - qmul(a.coeffs[None, :, :], b.coeffs[:, None, :]))


def wedge12(a: QOneForm, w: QTwoForm) -> QThreeForm:
    """``(a ^ w)(u, v, t) = a(u) w(v, t) - a(v) w(u, t) + a(t) w(u, v)``."""
    c, W = a.coeffs, w.tensor
    t = (
        qmul(c[:, None, None, :], W[None, :, :, :])
        - qmul(c[None, :, None, :], W[:, None, :, :])
        + qmul(c[None, None, :, :], W[:, :, None, :])
    )
    return QThreeForm(t)


def wedge21(w: QTwoForm, a: QOneForm) -> QThreeForm:
    """``(w ^ a)(u, v, t) = w(u, v) a(t) - w(u, t) a(v) + w(v, t) a(u)``."""
    c, W = a.coeffs, w.tensor
    t = (
        qmul(W[:, :, None, :], c[None, None, :, :])
        - qmul(W[:, None, :, :], c[None, :, None, :])
        + qmul(W[None, :, :, :], c[:, None, None, :])
    )
    return QThreeForm(t)


def omega_basis() -> tuple[QTwoForm, QTwoForm, QTwoForm]:
    """The real 2-forms with ``dx ^ conj(dx) = i w1 + j w2 + k w3``."""
    w1 = QTwoForm.from_coefficients({(1, 0): 2.0, (3, 2): 2.0})
    w2 = QTwoForm.from_coefficients({(2, 0): 2.0, (1, 3): 2.0})
    w3 = QTwoForm.from_coefficients({(3, 0): 2.0, (2, 1): 2.0})
    return w1, w2, w3
