"""Sphere geometry in R^5 and circle recognition in R^4.

Points of R^5 are plain arrays ``(..., 5)`` split as ``(y, z)`` with
``y`` in R^4 and ``z`` the polar coordinate; the unit sphere is centered at
the origin and the North pole is ``(0, 0, 0, 0, 1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import (
    AtProjectionCenter,
    CoincidentPoints,
    DomainViolation,
    LineCase,
    NoIntersection,
    NotOnSphere,
    TangentDegenerate,
    TooFewPoints,
)
from .quat import Quaternion, as_array, im, inv, mul, norm

EPS_POLE = 1e-12
EPS_DISC = 1e-12
EPS_SEP = 1e-10
EPS_IMB = 1e-9

TOL_LINE = 1e-9
TOL_PLANE = 1e-8
TOL_CIRC = 1e-7

NORTH_POLE = np.array([0.0, 0.0, 0.0, 0.0, 1.0])


def stereographic_inv(y):
    """Point of the unit sphere whose stereographic image is ``y``."""
    y = as_array(y)
    n2 = np.einsum("...i,...i->...", y, y)[..., None]
    return np.concatenate([2 * y / (1 + n2), (n2 - 1) / (1 + n2)], axis=-1)


def stereographic(P, tol: float = 1e-9):
    """Project a point of the unit sphere from the North pole to R^4."""
    P = np.asarray(P, dtype=float)
    if P.shape[-1] != 5:
        raise ValueError(f"expected points of R^5, got shape {P.shape}")
    r = np.linalg.norm(P, axis=-1)
    if np.any(np.abs(r - 1) > tol):
        raise NotOnSphere(f"point not on the unit sphere (| |P| - 1 | up to {np.max(np.abs(r - 1)):.3g})")
    den = 1 - P[..., 4]
    if np.any(den <= EPS_POLE):
        raise AtProjectionCenter("point at the North pole", cause="at projection center")
    return P[..., :4] / den[..., None]


def central_project(plane_point, plane_frame, center, x, branch: str = "far"):
    """Central projection of the hyperplane point ``plane_point + x @ plane_frame`` to the unit sphere.

    Of the two intersections of the line through ``center`` with the sphere,
    ``branch="far"`` picks the one with the larger parameter along the ray
    from ``center`` toward the plane point.
    """
    if branch not in ("far", "near"):
        raise ValueError(f"branch must be 'far' or 'near', got {branch!r}")
    c = np.asarray(center, dtype=float)
    X = np.asarray(plane_point, dtype=float) + as_array(x) @ np.asarray(plane_frame, dtype=float)
    d = X - c
    a = np.einsum("...i,...i->...", d, d)
    b = d @ c
    cc = c @ c - 1.0
    if abs(cc) <= EPS_DISC:
        raise TangentDegenerate("projection center lies on the sphere", cause="center on sphere")
    if np.any(a == 0):
        raise DomainViolation("plane point coincides with the projection center", cause="point at center")
    disc = b * b - a * cc
    scale = b * b + a * abs(cc)
    if np.any(disc < -EPS_DISC * scale):
        raise NoIntersection("projection line misses the sphere", cause="no intersection")
    if np.any(np.abs(disc) <= EPS_DISC * scale):
        raise TangentDegenerate("projection line is tangent to the sphere", cause="tangent")
    sq = np.sqrt(disc)
    q = -(b + np.copysign(sq, b))
    s1, s2 = q / a, cc / q
    s = np.maximum(s1, s2) if branch == "far" else np.minimum(s1, s2)
    P = c + s[..., None] * d
    return P / np.linalg.norm(P, axis=-1, keepdims=True)


class FitKind(str, enum.Enum):
    CIRCLE = "circle"
    LINE = "line"
    DEGENERATE = "degenerate"


@dataclass
class CircleFit:
    kind: FitKind
    residual: float
    center: Quaternion | None = None
    radius: float | None = None
    direction: Quaternion | None = None

    @property
    def ok(self) -> bool:
        return self.kind is not FitKind.DEGENERATE

    def to_json(self) -> dict:
        d = {"kind": self.kind.value}
        if self.center is not None:
            d["center"] = self.center.to_json()
        if self.radius is not None:
            d["radius"] = self.radius
        if self.direction is not None:
            d["direction"] = self.direction.to_json()
        d["residual"] = self.residual
        return d


def cocircularity_fit(points, tol_line=TOL_LINE, tol_plane=TOL_PLANE, tol_circ=TOL_CIRC) -> CircleFit:
    """Classify a sampled curve in R^4 as a round circle, a line, or neither.

    The residual is the RMS distance of the points from the fitted curve,
    divided by the diameter of the point set.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 4)
    n = len(P)
    if n < 5:
        raise TooFewPoints(f"need at least 5 points, got {n}")
    dists = pdist(P)
    diam = dists.max()
    if diam == 0 or dists.min() <= EPS_SEP * diam:
        raise CoincidentPoints("sample points are not pairwise distinct")

    c = P.mean(axis=0)
    D = P - c
    _, S, Vt = np.linalg.svd(D, full_matrices=False)

    v = Vt[0]
    off_line = D - np.outer(D @ v, v)
    line_res = np.sqrt(np.mean(np.einsum("ij,ij->i", off_line, off_line))) / diam
    if line_res <= tol_line:
        k = np.flatnonzero(np.abs(v) > 1e-12)[0]
        v = v if v[k] > 0 else -v
        return CircleFit(FitKind.LINE, float(line_res), direction=Quaternion.from_array(v))

    # Algebraic fit in the best plane, in coordinates scaled by the diameter.
    basis = Vt[:2]
    Q = D @ basis.T / diam
    out_of_plane = (D - (Q * diam) @ basis) / diam
    M = np.column_stack([2 * Q, np.ones(n)])
    rhs = np.einsum("ij,ij->i", Q, Q)
    (a, b, k), *_ = np.linalg.lstsq(M, rhs, rcond=None)
    ctr = np.array([a, b])
    r2 = k + a * a + b * b
    if r2 <= 0:
        res = float(np.sqrt(np.mean(np.einsum("ij,ij->i", out_of_plane, out_of_plane))) + line_res)
        return CircleFit(FitKind.DEGENERATE, res)
    r = np.sqrt(r2)
    # |Q - ctr| - r without cancellation
    radial = (rhs - 2 * Q @ ctr - k) / (np.linalg.norm(Q - ctr, axis=1) + r)
    dev2 = radial**2 + np.einsum("ij,ij->i", out_of_plane, out_of_plane)
    res = float(np.sqrt(np.mean(dev2)))
    center = Quaternion.from_array(c + diam * ctr @ basis)
    radius = float(r * diam)
    coplanar = S[2] <= tol_plane * S[0]
    if coplanar and res <= tol_circ:
        return CircleFit(FitKind.CIRCLE, res, center=center, radius=radius)
    return CircleFit(FitKind.DEGENERATE, res, center=center, radius=radius)


def circle_center(f_x, A_a, B_a, side: str = "left", eps_imB: float = EPS_IMB):
    """Center of the circle traced by the image of the line through x along a.

    Left case: ``f(x) - Im(B_a)^-1 A_a``; right case: ``f(x) - A_a Im(B_a)^-1``.
    """
    imB = im(B_a)
    if norm(imB) <= eps_imB:
        raise LineCase("Im(B_a) vanishes: the image should be a straight line")
    if side == "left":
        return f_x - mul(inv(imB), A_a)
    return f_x - mul(A_a, inv(imB))
