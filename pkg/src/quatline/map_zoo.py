"""Map families that take lines to circles, plus controls and jet synthesis.

Every spec here is an immutable callable on ``(N, 4)`` arrays (a map handle
for :mod:`quatline.diff_lab`) and round-trips through the JSON schema of
:func:`map_from_json`.  :func:`eval` is the scalar-friendly entry point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diff_lab import Jet3
from .errors import DomainViolation, MobiusPole, OutsideDisk
from .qforms import QOneForm
from .quat import EPS_INV, Quaternion, as_array, from_json, qinv, qmul, qnorm2
from .sphere_geom import central_project, stereographic

EPS_DISC = 1e-12
EPS_POLE = 1e-12


def _finite(*vals):
    for v in vals:
        if not np.all(np.isfinite(np.asarray(v, dtype=float))):
            raise ValueError("map parameters must be finite")


@dataclass(frozen=True, eq=False)
class AffineMapR4:
    linear: np.ndarray
    offset: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        lin = np.array(self.linear, dtype=float)
        off = np.array(as_array(self.offset), dtype=float)
        if lin.shape != (4, 4) or off.shape != (4,):
            raise ValueError("affine map needs a 4x4 linear part and a 4-vector offset")
        _finite(lin, off)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "offset", off)

    @classmethod
    def identity(cls) -> "AffineMapR4":
        return cls(np.eye(4))

    @classmethod
    def constant(cls, q) -> "AffineMapR4":
        return cls(np.zeros((4, 4)), as_array(q))

    def __call__(self, x):
        return as_array(x) @ self.linear.T + self.offset

    def to_json(self) -> dict:
        return {"linear": self.linear.tolist(), "offset": self.offset.tolist()}

    @classmethod
    def from_json(cls, d) -> "AffineMapR4":
        return cls(np.array(d["linear"], dtype=float), np.array(d.get("offset", [0, 0, 0, 0]), dtype=float))


@dataclass(frozen=True, eq=False)
class HopfRestriction:
    """``x -> L(x)^-1 M(x)`` (left) or ``M(x) L(x)^-1`` (right)."""

    L: AffineMapR4
    M: AffineMapR4
    side: str = "left"

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")

    def __call__(self, x):
        Lx, Mx = self.L(x), self.M(x)
        try:
            Li = qinv(Lx, EPS_INV)
        except DomainViolation as exc:
            raise DomainViolation("L(x) vanishes on the evaluation set", cause="L(x) near zero") from exc
        return qmul(Li, Mx) if self.side == "left" else qmul(Mx, Li)

    def to_json(self) -> dict:
        return {"type": "hopf", "side": self.side, "L": self.L.to_json(), "M": self.M.to_json()}


@dataclass(frozen=True, eq=False)
class ModelProjection:
    """The classical projection ``f: x -> y`` defined by ``x = y / (1 + lam |y|^2)``.

    The solution is radial, ``y = t x/|x|`` with the root of
    ``lam s t^2 - t + s = 0`` continuous with the identity at 0, written
    without cancellation as ``t = 2 s / (1 + sqrt(1 - 4 lam s^2))``.
    At 0 the map has ``C = 6 lam``.
    """

    lam: float

    def __post_init__(self):
        _finite(self.lam)
        object.__setattr__(self, "lam", float(self.lam))

    def __call__(self, x):
        x = as_array(x)
        disc = 1.0 - 4.0 * self.lam * qnorm2(x)
        # the boundary circle itself (disc = 0, the fold |y|^2 = 1/lam) is still evaluable
        if np.any(disc < -EPS_DISC):
            raise OutsideDisk("point outside the disk where the model projection is defined", cause="outside disk")
        return x * (2.0 / (1.0 + np.sqrt(np.maximum(disc, 0.0))))[..., None]

    def domain_radius(self) -> float:
        return math.inf if self.lam <= 0 else 1.0 / (2.0 * math.sqrt(self.lam))

    def to_json(self) -> dict:
        return {"type": "model", "lambda": self.lam}


@dataclass(frozen=True, eq=False)
class JetMobius:
    """``y -> 2q^-1 (1 - (qy/2)(1 - p(y)/2)^-1)^-1 - 2q^-1``, with limit ``y/(1 - p(y)/2)`` at ``q = 0``.

    Evaluated through the equal closed form ``y (1 - p(y)/2 - q y/2)^-1``,
    which has no ``q^-1`` and no cancellation near ``y = 0``.
    """

    p: np.ndarray = field(default_factory=lambda: np.zeros(4))
    q: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        q = np.array(as_array(self.q), dtype=float)
        if p.shape != (4,) or q.shape != (4,):
            raise ValueError("p and q must have 4 components")
        _finite(p, q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def __call__(self, y):
        y = as_array(y)
        den = 1.0 - 0.5 * (y @ self.p)
        if np.any(np.abs(den) <= EPS_POLE):
            raise MobiusPole("1 - p(y)/2 vanishes", cause="mobius pole")
        Lq = -0.5 * qmul(self.q, y)
        Lq[..., 0] += den
        # |1 - u| = |L| / |den|
        if np.any(np.sqrt(qnorm2(Lq)) <= EPS_POLE * np.abs(den)):
            raise MobiusPole("1 - u is not invertible", cause="mobius pole")
        return qmul(y, qinv(Lq, 0.0))

    def to_json(self) -> dict:
        return {"type": "mobius", "p": self.p.tolist(), "q": self.q.tolist()}


@dataclass(frozen=True, eq=False)
class ClassicalProjectionR5:
    """Central projection of a hyperplane of R^5 to the unit sphere, read in the stereographic chart."""

    plane_point: np.ndarray
    plane_frame: np.ndarray
    center: np.ndarray
    branch: str = "far"

    def __post_init__(self):
        pp = np.array(self.plane_point, dtype=float)
        fr = np.array(self.plane_frame, dtype=float)
        c = np.array(self.center, dtype=float)
        if pp.shape != (5,) or fr.shape != (4, 5) or c.shape != (5,):
            raise ValueError("classical projection needs a point, a 4x5 frame and a center in R^5")
        _finite(pp, fr, c)
        if np.linalg.matrix_rank(fr) < 4:
            raise ValueError("plane frame must have rank 4")
        if self.branch not in ("far", "near"):
            raise ValueError("branch must be 'far' or 'near'")
        object.__setattr__(self, "plane_point", pp)
        object.__setattr__(self, "plane_frame", fr)
        object.__setattr__(self, "center", c)

    def __call__(self, x):
        P = central_project(self.plane_point, self.plane_frame, self.center, x, self.branch)
        return stereographic(P)

    def to_json(self) -> dict:
        return {
            "type": "classical",
            "plane_point": self.plane_point.tolist(),
            "frame": self.plane_frame.tolist(),
            "center": self.center.tolist(),
            "branch": self.branch,
        }


@dataclass(frozen=True, eq=False)
class Compose:
    """Composition applying ``maps[0]`` first."""

    maps: tuple

    def __post_init__(self):
        if len(self.maps) == 0:
            raise ValueError("composition needs at least one map")
        object.__setattr__(self, "maps", tuple(self.maps))

    def __call__(self, x):
        y = as_array(x)
        for m in self.maps:
            y = m(y)
        return y

    def to_json(self) -> dict:
        return {"type": "compose", "maps": [m.to_json() for m in self.maps]}


@dataclass(frozen=True, eq=False)
class JetMap:
    """The cubic polynomial of a :class:`Jet3`, as a map."""

    jet: Jet3

    def __call__(self, x):
        return jet3_eval(self.jet, x)

    def to_json(self) -> dict:
        return {"type": "jet", **self.jet.to_json()}


@dataclass(frozen=True, eq=False)
class Perturbed:
    """Negative control: ``base(x) + amplitude (x^0)^3 i``."""

    base: object
    amplitude: float = 1e-2

    def __call__(self, x):
        x = as_array(x)
        y = np.array(self.base(x), dtype=float)
        y[..., 1] += self.amplitude * x[..., 0] ** 3
        return y

    def to_json(self) -> dict:
        return {"type": "perturbed", "base": self.base.to_json(), "amplitude": self.amplitude}


MapSpec = HopfRestriction | ModelProjection | JetMobius | ClassicalProjectionR5 | Compose | JetMap | Perturbed


def eval(spec, x):  # noqa: A001 - mirrors the operation name
    """Evaluate a map at a Quaternion (returns a Quaternion) or at an array of points."""
    if isinstance(x, Quaternion):
        return Quaternion.from_array(spec(x.to_array()[None])[0])
    return spec(as_array(x))


def eval_model(m: ModelProjection, x):
    return eval(m, x)


def eval_jet_mobius(m: JetMobius, y):
    return eval(m, y)


def jet3_eval(j: Jet3, x):
    """``f0 + A_v + B_v A_v/2 + (3/2 B_v^2 + C|A_v|^2) A_v / 6`` with ``v = x - x0``.

    The right case mirrors every product.
    """
    scalar = isinstance(x, Quaternion)
    v = as_array(x) - j.x0.to_array()
    Av, Bv = j.A(v), j.B(v)
    C = j.C.to_array()
    cubic_coef = 1.5 * qmul(Bv, Bv) + C * qnorm2(Av)[..., None]
    if j.side == "left":
        out = j.f0.to_array() + Av + qmul(Bv, Av) / 2 + qmul(cubic_coef, Av) / 6
    else:
        out = j.f0.to_array() + Av + qmul(Av, Bv) / 2 + qmul(Av, cubic_coef) / 6
    return Quaternion.from_array(out) if scalar else out


def admissible_jet(p, q, C) -> Jet3:
    """The normalized 3-jet at 0 with ``A = dx`` and ``B_a = p(a) + a q``."""
    p = np.asarray(p, dtype=float)
    q = as_array(q)
    B = QOneForm.real(p) + QOneForm.dx().rmul(q)
    return Jet3(Quaternion(), QOneForm.dx(), B, Quaternion(float(C)))


def synth_from_jet(p, q, C) -> MapSpec:
    """A classical projection with the admissible 3-jet ``(p, q, C)`` at 0.

    ``y -> y/(1 - p(y)/2)`` is applied in the preimage, then the model
    projection with ``lam = C/6``, then ``w -> w (1 - q w/2)^-1``.  Both
    outer factors are members of :class:`JetMobius`.  The projective factor
    must precede the model map: applied after it, it bends circles into
    conics, although the 3-jet is the same.

    Factors that are exactly the identity are dropped, so ``(0, 0, 0)``
    yields :func:`identity` and ``(0, 0, C)`` a bare model projection.
    """
    p = np.asarray(p, dtype=float)
    q = as_array(q)
    _finite(p, q, C)
    maps = []
    if np.any(p):
        maps.append(JetMobius(p, np.zeros(4)))
    if C:
        maps.append(ModelProjection(float(C) / 6.0))
    if np.any(q):
        maps.append(JetMobius(np.zeros(4), q))
    if not maps:
        return identity()
    return maps[0] if len(maps) == 1 else Compose(tuple(maps))


def map_from_json(d) -> MapSpec:
    """Parse the JSON map-spec schema (see README)."""
    if not isinstance(d, dict) or "type" not in d:
        raise ValueError("map spec must be an object with a 'type' field")
    kind = d["type"]
    if kind == "hopf":
        return HopfRestriction(AffineMapR4.from_json(d["L"]), AffineMapR4.from_json(d["M"]), d.get("side", "left"))
    if kind == "model":
        return ModelProjection(float(d["lambda"]))
    if kind == "mobius":
        return JetMobius(np.array(d.get("p", [0, 0, 0, 0]), float), np.array(d.get("q", [0, 0, 0, 0]), float))
    if kind == "classical":
        return ClassicalProjectionR5(
            np.array(d["plane_point"], float),
            np.array(d["frame"], float),
            np.array(d["center"], float),
            d.get("branch", "far"),
        )
    if kind == "compose":
        return Compose(tuple(map_from_json(m) for m in d["maps"]))
    if kind == "jet":
        C = d.get("C", 0.0)
        Cq = from_json(C) if isinstance(C, list) else Quaternion(float(C))
        jet = Jet3(
            from_json(d.get("f0", [0, 0, 0, 0])),
            QOneForm.from_json(d["A"]),
            QOneForm.from_json(d.get("B", np.zeros((4, 4)).tolist())),
            Cq,
            x0=from_json(d.get("x0", [0, 0, 0, 0])),
            side=d.get("side", "left"),
        )
        return JetMap(jet)
    if kind == "perturbed":
        return Perturbed(map_from_json(d["base"]), float(d.get("amplitude", 1e-2)))
    raise ValueError(f"unknown map type {kind!r}")


def identity() -> ModelProjection:
    return ModelProjection(0.0)
