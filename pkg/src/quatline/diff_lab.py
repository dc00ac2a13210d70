"""Numerical jets of black-box maps and the invariants A, B, C.

A *map handle* is any callable taking an ``(N, 4)`` array of points and
returning an ``(N, 4)`` array of quaternions; every :mod:`quatline.map_zoo`
spec qualifies.  Derivatives are nested central differences refined by
Ridders' version of Richardson extrapolation, with all stencil points of a
request evaluated in one batch.

Invariants at a point, left case (``d_a A_a = B_a A_a``)::

    A_a        = D f[a]
    B          = best linear fit of  D^2 f[a, a] A_a^-1  over sample directions
    d_a B_b    = (D^3 f[a, b, b] - B_b D^2 f[a, b]) A_b^-1
    C_ab       = d_a B_b - B_a B_b / 2
    C          = sum_b C_bb / sum_b |A_b|^2

The right case (``d_a A_a = A_a B_a``) is computed as the left case of the
conjugated map ``conj o f``, whose B is ``conj(B)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, permutations, product

import numpy as np

from .errors import DegenerateA, DomainViolation, SideMismatch, StencilOutsideDomain
from .qforms import QOneForm
from .quat import Quaternion, as_array, left_matrix, qconj, qinv, qmul, qnorm2, right_matrix

CON = 1.4
NTAB = 10
SAFE = 2.0

TOL_SIDE = 1e-6
COND_MAX = 1e10

# 4 basis + 4 fixed pseudo-random unit directions
SAMPLE_DIRS = np.vstack([np.eye(4), np.random.default_rng(20240229).normal(size=(4, 4))])
SAMPLE_DIRS /= np.linalg.norm(SAMPLE_DIRS, axis=1, keepdims=True)


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    BOTH = "both"
    NEITHER = "neither"


def _side_name(side) -> str:
    s = Side(side).value if not isinstance(side, Side) else side.value
    if s not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {s!r}")
    return s


# -- differentiation --------------------------------------------------------

def default_radius(x) -> float:
    return 0.1 * max(1.0, float(np.linalg.norm(x)))


def _eval(f, pts):
    out = np.asarray(f(pts), dtype=float)
    return out.reshape(len(pts), -1)


def ridders(f, x, combos, radius=None, *, ntab=NTAB, con=CON, strict=False):
    """Mixed directional derivatives for several direction tuples at once.

    ``combos`` is a sequence of direction tuples; entry ``(d1, ..., dk)``
    requests ``d/dd1 ... d/ddk f(x)``.  Every stencil stays inside the ball
    of ``radius`` around ``x``; if the map refuses a point the radius is
    halved and the batch retried (``strict=True`` re-raises instead, so the
    stencil geometry is reproducible from the arguments alone).

    Returns ``(values, errors)`` with ``values`` of shape ``(len(combos), m)``
    (``m`` = flattened output size) and a Ridders error estimate per combo.
    """
    x = as_array(x)
    radius = default_radius(x) if radius is None else float(radius)
    floor = 1e-9 * max(1.0, float(np.linalg.norm(x)))
    offsets, weights, steps = [], [], []
    for dirs in combos:
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        signs = np.array(list(product((1.0, -1.0), repeat=len(dirs))))
        offsets.append(signs @ dirs)
        weights.append(np.prod(signs, axis=1))
        # largest stencil offset is sum |d_i| * h
        steps.append(1.0 / np.linalg.norm(dirs, axis=1).sum())
    levels = con ** -np.arange(ntab)

    while True:
        pts = np.concatenate(
            [
                (x + (radius * s * levels)[:, None, None] * off[None, :, :]).reshape(-1, 4)
                for off, s in zip(offsets, steps)
            ]
        )
        try:
            F = _eval(f, pts)
            break
        except DomainViolation:
            if strict:
                raise
            radius /= 2
            if radius < floor:
                raise StencilOutsideDomain(
                    "no finite-difference stencil fits inside the map's domain", cause="stencil"
                ) from None

    m = F.shape[1]
    estimates = []
    pos = 0
    for off, w, s, dirs in zip(offsets, weights, steps, combos):
        k = len(np.atleast_2d(dirs))
        n = len(off)
        block = F[pos : pos + ntab * n].reshape(ntab, n, m)
        pos += ntab * n
        h = radius * s * levels
        estimates.append(np.einsum("s,lsm->lm", w, block) / ((2 * h) ** k)[:, None])
    E = np.stack(estimates)  # (ncombo, ntab, m)
    return _neville(E, con)


def _neville(E, con):
    nc, ntab, m = E.shape
    con2 = con * con
    best = E[:, 0].copy()
    err = np.full(nc, np.inf)
    active = np.ones(nc, dtype=bool)
    prev = [E[:, 0]]
    for i in range(1, ntab):
        row = [E[:, i]]
        fac = con2
        for j in range(1, i + 1):
            new = (row[j - 1] * fac - prev[j - 1]) / (fac - 1)
            fac *= con2
            errt = np.maximum(np.abs(new - row[j - 1]).max(axis=1), np.abs(new - prev[j - 1]).max(axis=1))
            better = active & (errt <= err)
            best[better] = new[better]
            err[better] = errt[better]
            row.append(new)
        active &= np.abs(row[i] - prev[i - 1]).max(axis=1) < SAFE * err
        if not active.any():
            break
        prev = row
    return best, err


def derivative(f, x, dirs, radius=None):
    """Mixed directional derivative of order ``len(dirs)`` (1 to 3).

    Returns ``(value, error_estimate)``; ``value`` is a quaternion array.
    """
    dirs = [np.asarray(as_array(d), dtype=float) for d in dirs]
    if not 1 <= len(dirs) <= 3:
        raise ValueError("derivative order must be 1, 2 or 3")
    vals, errs = ridders(f, x, [np.array(dirs)], radius)
    return vals[0], float(errs[0])


@dataclass
class Tensors:
    """Derivative tensors of a map at a point, full symmetric storage."""

    x: np.ndarray
    f0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray | None = None
    d3: np.ndarray | None = None
    error: float = 0.0

    def conj(self) -> "Tensors":
        return Tensors(
            self.x,
            qconj(self.f0),
            qconj(self.d1),
            None if self.d2 is None else qconj(self.d2),
            None if self.d3 is None else qconj(self.d3),
            self.error,
        )


def derivative_tensors(f, x, order: int = 3, radius=None, strict=False) -> Tensors:
    x = as_array(x)
    eye = np.eye(4)
    idx = [c for k in range(1, order + 1) for c in combinations_with_replacement(range(4), k)]
    vals, errs = ridders(f, x, [eye[list(c)] for c in idx], radius, strict=strict)
    f0 = _eval(f, x[None])[0]
    d = {1: np.zeros((4, 4)), 2: np.zeros((4, 4, 4)), 3: np.zeros((4, 4, 4, 4))}
    for c, v in zip(idx, vals):
        k = len(c)
        for perm in set(permutations(c)):
            d[k][perm] = v
    return Tensors(x, f0, d[1], d[2] if order >= 2 else None, d[3] if order >= 3 else None, float(errs.max()))


# -- invariants -------------------------------------------------------------

@dataclass
class SideReport:
    side: Side
    left_linearity_residual: float
    right_linearity_residual: float

    def admits(self, side) -> bool:
        s = _side_name(side)
        res = self.left_linearity_residual if s == "left" else self.right_linearity_residual
        return res <= TOL_SIDE

    def to_json(self) -> dict:
        return {
            "side": self.side.value,
            "left_linearity_residual": self.left_linearity_residual,
            "right_linearity_residual": self.right_linearity_residual,
        }


@dataclass
class CTensor:
    """``C_ab = d_a B_b - B_a B_b / 2`` on basis pairs; ``c[a, b]`` is a quaternion."""

    c: np.ndarray

    def __call__(self, alpha, beta):
        return np.einsum("a,b,abq->q", as_array(alpha), as_array(beta), self.c)

    def to_json(self) -> list:
        return self.c.tolist()


def _check_A(d1):
    M = d1.T
    if not np.all(np.isfinite(M)) or np.linalg.cond(M) > COND_MAX:
        raise DegenerateA("the differential A is degenerate at this point")


def _linear_fit(dirs, vals):
    coef, *_ = np.linalg.lstsq(dirs, vals, rcond=None)
    err = dirs @ coef - vals
    scale = max(np.sqrt(np.mean(vals**2)) * 2, 1.0)
    return coef, float(np.sqrt(np.mean(err**2)) * 2 / scale)


def _fit_B(t: Tensors):
    """Left candidate ``D_a = (d_a A_a) A_a^-1`` fitted linearly in a."""
    dirs = SAMPLE_DIRS
    A = dirs @ t.d1
    H = np.einsum("am,an,mnq->aq", dirs, dirs, t.d2)
    return _linear_fit(dirs, qmul(H, qinv(A)))


def side_report(t: Tensors) -> SideReport:
    _check_A(t.d1)
    _, res_l = _fit_B(t)
    _, res_r = _fit_B(t.conj())
    ok_l, ok_r = res_l <= TOL_SIDE, res_r <= TOL_SIDE
    side = {(True, True): Side.BOTH, (True, False): Side.LEFT, (False, True): Side.RIGHT}.get(
        (ok_l, ok_r), Side.NEITHER
    )
    return SideReport(side, res_l, res_r)


def _left_C(t: Tensors, B):
    """C tensor on basis pairs plus the averaged scalar C and its consistency."""
    Ainv = qinv(t.d1)
    dB = qmul(np.einsum("abbq->abq", t.d3) - qmul(B[None, :, :], t.d2), Ainv[None, :, :])
    ctens = dB - 0.5 * qmul(B[:, None, :], B[None, :, :])

    dirs = SAMPLE_DIRS
    A = dirs @ t.d1
    Bd = dirs @ B
    H = np.einsum("am,an,mnq->aq", dirs, dirs, t.d2)
    T3 = np.einsum("am,an,ao,mnoq->aq", dirs, dirs, dirs, t.d3)
    dBdd = qmul(T3 - qmul(Bd, H), qinv(A))
    Cbb = dBdd - 0.5 * qmul(Bd, Bd)
    nA2 = qnorm2(A)
    C = Cbb.sum(axis=0) / nA2.sum()
    ratios = Cbb / nA2[:, None]
    scale = max(np.linalg.norm(C), float(np.mean(qnorm2(Bd) / nA2)), 1.0)
    consistency = float(np.max(np.linalg.norm(ratios - C, axis=1)) / scale)
    return ctens, C, consistency


@dataclass
class FrameData:
    """Invariants of a map at one point."""

    x: Quaternion
    f0: Quaternion
    A: QOneForm
    B: QOneForm
    C: Quaternion
    c_tensor: CTensor
    consistency: float
    side: str
    side_report: SideReport
    tensors: Tensors = field(repr=False)

    def to_json(self) -> dict:
        return {
            "x": self.x.to_json(),
            "f0": self.f0.to_json(),
            "A": self.A.to_json(),
            "B": self.B.to_json(),
            "C": self.C.to_json(),
            "C_tensor": self.c_tensor.to_json(),
            "consistency": self.consistency,
            "side": self.side,
            "side_report": self.side_report.to_json(),
            "derivative_error": self.tensors.error,
        }


def frame(f, x, side=None, radius=None, strict=False) -> FrameData:
    """All invariants of ``f`` at ``x``.

    With ``side=None`` the left case is used whenever it fits (including
    ``Both``), else the right case, else whichever fits better; no error is
    raised for maps that fit neither, so residual checks can still run.
    """
    t = derivative_tensors(f, x, 3, radius, strict)
    rep = side_report(t)
    if side is None:
        if rep.admits("left"):
            s = "left"
        elif rep.admits("right"):
            s = "right"
        else:
            s = "left" if rep.left_linearity_residual <= rep.right_linearity_residual else "right"
    else:
        s = _side_name(side)
    tt = t if s == "left" else t.conj()
    B, _ = _fit_B(tt)
    ctens, C, consistency = _left_C(tt, B)
    if s == "right":
        B, ctens, C = qconj(B), qconj(ctens), qconj(C)
    return FrameData(
        x=Quaternion.from_array(t.x),
        f0=Quaternion.from_array(t.f0),
        A=QOneForm(t.d1),
        B=QOneForm(B),
        C=Quaternion.from_array(C),
        c_tensor=CTensor(ctens),
        consistency=consistency,
        side=s,
        side_report=rep,
        tensors=t,
    )


def extract_A(f, x, radius=None) -> QOneForm:
    return QOneForm(derivative_tensors(f, x, 1, radius).d1)


def detect_side(f, x, radius=None) -> SideReport:
    return side_report(derivative_tensors(f, x, 2, radius))


def extract_B(f, x, side="left", radius=None) -> QOneForm:
    t = derivative_tensors(f, x, 2, radius)
    rep = side_report(t)
    if not rep.admits(side):
        raise SideMismatch(
            f"{_side_name(side)} case rejected (linearity residual "
            f"left={rep.left_linearity_residual:.3g}, right={rep.right_linearity_residual:.3g})"
        )
    if _side_name(side) == "left":
        return QOneForm(_fit_B(t)[0])
    return QOneForm(qconj(_fit_B(t.conj())[0]))


def extract_C(f, x, side="left", radius=None):
    """``(C, C tensor, consistency)``; C is kept as a full quaternion."""
    fr = frame(f, x, side, radius)
    if not fr.side_report.admits(fr.side):
        raise SideMismatch(f"{fr.side} case rejected by the linearity test")
    return fr.C, fr.c_tensor, fr.consistency


def admissible_decompose(B: QOneForm, A: QOneForm, side="left"):
    """Fit ``B(A^-1 xi) = p(xi) + xi q`` (right case: ``p(xi) + q xi``).

    Returns ``(p, q, residual)`` with ``p`` a real covector, ``q`` a
    Quaternion and the relative l2 residual of the 16 real components.
    """
    M = A.matrix()
    if not np.all(np.isfinite(M)) or np.linalg.cond(M) > COND_MAX:
        raise DegenerateA("A is not invertible")
    b = B.precompose(np.linalg.inv(M)).coeffs
    mult = left_matrix if _side_name(side) == "left" else right_matrix
    rows = []
    for nu in range(4):
        blk = np.zeros((4, 8))
        blk[0, nu] = 1.0
        blk[:, 4:] = mult(np.eye(4)[nu])
        rows.append(blk)
    G = np.vstack(rows)
    rhs = b.reshape(-1)
    z, *_ = np.linalg.lstsq(G, rhs, rcond=None)
    nb = np.linalg.norm(rhs)
    residual = 0.0 if nb == 0 else float(np.linalg.norm(G @ z - rhs) / nb)
    return z[:4], Quaternion.from_array(z[4:]), residual


# -- 3-jets -----------------------------------------------------------------

@dataclass
class Jet3:
    """Cubic Taylor model ``(f(x0), A, B, C)`` of a line-to-circle map at ``x0``."""

    f0: Quaternion
    A: QOneForm
    B: QOneForm
    C: Quaternion
    x0: Quaternion = Quaternion()
    side: str = "left"
    cross_check: float | None = None

    def to_json(self) -> dict:
        d = {
            "f0": self.f0.to_json(),
            "A": self.A.to_json(),
            "B": self.B.to_json(),
            "C": self.C.w if self.C.x1 == self.C.x2 == self.C.x3 == 0 else self.C.to_json(),
            "x0": self.x0.to_json(),
            "side": self.side,
        }
        if self.cross_check is not None:
            d["cross_check"] = self.cross_check
        return d


def _third_prediction(A_a, B_a, C, side):
    inner = 1.5 * qmul(B_a, B_a) + C * qnorm2(A_a)[..., None]
    return qmul(inner, A_a) if side == "left" else qmul(A_a, inner)


def extract_jet3(f, x, side=None, radius=None) -> Jet3:
    """3-jet at ``x``; ``cross_check`` compares direct third derivatives along
    sample directions with ``(3/2 B_a^2 + C|A_a|^2) A_a`` (relative error)."""
    fr = frame(f, x, side, radius)
    dirs = SAMPLE_DIRS[4:]
    direct, _ = ridders(f, fr.x.to_array(), [np.array([d, d, d]) for d in dirs], radius)
    pred = _third_prediction(fr.A(dirs), fr.B(dirs), fr.C.to_array(), fr.side)
    scale = max(float(np.abs(pred).max()), float(np.abs(fr.A.coeffs).max()))
    check = float(np.abs(direct - pred).max() / scale)
    return Jet3(fr.f0, fr.A, fr.B, fr.C, x0=fr.x, side=fr.side, cross_check=check)
