"""End-to-end checks for line-to-circle maps.

Two independent routes are combined into one :class:`VerificationReport`:

* sampling: random segments are mapped and their images tested for
  cocircularity (:func:`verify_lines_to_circles`);
* differential: the integrability identities between the extracted
  invariants A, B, C are evaluated at random points
  (:func:`residual_eq2`, :func:`residual_first_integrability`,
  :func:`residual_eq7_sys8`).

Right-case identities are checked as the left-case identities of the
conjugated data, which is how :mod:`quatline.diff_lab` defines them.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import diff_lab
from .diff_lab import FrameData, admissible_decompose, frame
from .errors import DomainViolation, LineCase, RealX
from .qforms import QOneForm, omega_basis, wedge11, wedge12, wedge21
from .quat import as_array, qconj, qinv, qmul, qnorm2
from .sphere_geom import FitKind, circle_center, cocircularity_fit

DSIDE_RADIUS = 0.05
# the outer level of the nested dC differentiation; deeper tableaus cost time, not accuracy
DC_NTAB = 6
EPS_C = 1e-6
EPS_IMB_REL = 1e-7


@dataclass
class Tolerances:
    circle: float = 1e-7
    eq2: float = 1e-5
    eq6pp: float = 1e-5
    sys8: float = 1e-4
    consistency: float = 1e-5
    c_real_rel: float = 1e-5
    c_real_abs: float = 1e-8
    c_zero: float = 1e-5
    admissibility: float = 1e-8


@dataclass
class Segment:
    x0: np.ndarray
    alpha: np.ndarray
    t_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        self.x0 = np.array(as_array(self.x0), dtype=float)
        self.alpha = np.array(as_array(self.alpha), dtype=float)
        if not np.linalg.norm(self.alpha) > 0:
            raise ValueError("segment direction must be nonzero")

    def points(self, n: int) -> np.ndarray:
        t = np.linspace(*self.t_range, n)
        return self.x0 + t[:, None] * self.alpha


@dataclass
class System8Residual:
    applicable: bool
    C_norm: float
    gamma: list | None = None
    r1: float | None = None
    r2: float | None = None
    r3: float | None = None
    eq7: float | None = None
    admissibility_residual: float | None = None

    @property
    def sys8(self) -> float | None:
        if not self.applicable:
            return None
        return max(self.r1, self.r2, self.r3)


@dataclass
class PointCheck:
    x: list
    side: str
    eq2: float
    eq6pp: float
    C: list
    consistency: float
    sys8: System8Residual


@dataclass
class VerificationReport:
    map_id: str
    points_tested: int = 0
    segments: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    c_stats: dict = field(default_factory=dict)
    side: str | None = None
    verdicts: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False, allow_nan=True)


def map_id(spec) -> str:
    if hasattr(spec, "to_json"):
        blob = json.dumps(spec.to_json(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]
    return getattr(spec, "__name__", type(spec).__name__)


def _pmap(fn, items):
    n = int(os.environ.get("QUATLINE_THREADS", "1") or 1)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# -- sampling ---------------------------------------------------------------

def sample_ball(rng, center, radius, n):
    """``n`` points uniform in the ball of R^4."""
    v = rng.normal(size=(n, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.uniform(size=n) ** 0.25
    return as_array(center) + v * r[:, None]


def random_segment(rng, center, radius) -> Segment:
    a, b = sample_ball(rng, center, radius, 2)
    return Segment(a, b - a)


def verify_lines_to_circles(
    f, center=0.0, radius=0.4, n_segments=50, n_samples=9, tol=1e-7, seed=0, retries=10, spec_id=None
) -> VerificationReport:
    """Map random segments of the ball and test every image for cocircularity."""
    if n_samples < 7:
        raise ValueError("need at least 7 samples per segment")
    center = np.broadcast_to(as_array(center), (4,)).astype(float)
    rng = np.random.default_rng(seed)
    segs, images = [], []
    budget = retries * n_segments
    while len(segs) < n_segments:
        seg = random_segment(rng, center, radius)
        try:
            images.append(np.asarray(f(seg.points(n_samples)), dtype=float))
        except DomainViolation:
            budget -= 1
            if budget < 0:
                raise
            continue
        segs.append(seg)

    fits = _pmap(lambda img: cocircularity_fit(img, tol_circ=tol), images)
    rows = []
    ok = True
    for k, (seg, fit) in enumerate(zip(segs, fits)):
        good = fit.kind is not FitKind.DEGENERATE and fit.residual <= tol
        ok &= good
        rows.append({"segment": k, "x0": seg.x0.tolist(), "alpha": seg.alpha.tolist(), **fit.to_json(), "pass": good})
    worst = max(fit.residual for fit in fits)
    rep = VerificationReport(spec_id or map_id(f), segments=rows, tolerances={"circle": tol})
    rep.residuals["circle_max"] = worst
    rep.verdicts["lines_to_circles"] = bool(ok)
    return rep


def center_constancy(f, seg: Segment, n_samples=9, side=None) -> float:
    """Spread of the predicted circle centers along ``seg``, relative to the radius.

    Raises :class:`LineCase` (carrying the image's line-fit residual) when
    ``Im B_alpha`` vanishes along the segment.
    """
    pts = seg.points(n_samples)
    frames = [frame(f, p, side) for p in pts]
    alpha = seg.alpha
    A = [fr.A(alpha) for fr in frames]
    B = [fr.B(alpha) for fr in frames]
    if any(np.linalg.norm(b[1:]) <= EPS_IMB_REL * max(np.linalg.norm(b), 1.0) for b in B):
        img = np.asarray(f(pts), dtype=float)
        fit = cocircularity_fit(img)
        line_res = fit.residual if fit.kind is FitKind.LINE else _line_residual(img)
        raise LineCase("Im B_alpha vanishes: image should be straight", collinearity=line_res)
    centers = np.array(
        [circle_center(fr.f0.to_array(), a, b, side=fr.side) for fr, a, b in zip(frames, A, B)]
    )
    f0 = np.array([fr.f0.to_array() for fr in frames])
    r = float(np.mean(np.linalg.norm(centers - f0, axis=1)))
    spread = max(np.linalg.norm(c1 - c2) for c1 in centers for c2 in centers)
    return float(spread / r)


def _line_residual(P):
    c = P.mean(axis=0)
    D = P - c
    _, S, Vt = np.linalg.svd(D, full_matrices=False)
    off = D - np.outer(D @ Vt[0], Vt[0])
    diam = max(np.linalg.norm(a - b) for a in P for b in P)
    return float(np.sqrt(np.mean(np.sum(off**2, axis=1))) / diam)


# -- differential residuals ---------------------------------------------------

def _left_data(fr: FrameData):
    """``(A, B, C tensor, C, D^2 f)`` arrays, conjugated for the right case."""
    t = fr.tensors
    A, B, ct, C, d2 = fr.A.coeffs, fr.B.coeffs, fr.c_tensor.c, fr.C.to_array(), t.d2
    if fr.side == "right":
        A, B, ct, C, d2 = qconj(A), qconj(B), qconj(ct), qconj(C), qconj(d2)
    return A, B, ct, C, d2


def _qmax(a):
    return float(np.max(np.linalg.norm(np.asarray(a).reshape(-1, 4), axis=1)))


def residual_eq2(f, x, fr: FrameData | None = None) -> float:
    """``max |d_a A_b - (B_a A_b + B_b A_a)/2|`` over basis pairs, relative."""
    fr = fr or frame(f, x)
    A, B, _, _, d2 = _left_data(fr)
    rhs = 0.5 * (qmul(B[:, None], A[None, :]) + qmul(B[None, :], A[:, None]))
    scale = max(_qmax(d2), _qmax(B) * _qmax(A), _qmax(A))
    return _qmax(d2 - rhs) / scale


def residual_first_integrability(f, x, fr: FrameData | None = None) -> float:
    """``max |C_ab - C (conj(A_a) A_b + conj(A_b) A_a + A_a conj(A_b)) / 3|``, relative."""
    fr = fr or frame(f, x)
    A, B, ct, C, _ = _left_data(fr)
    Ab = qconj(A)
    S = qmul(Ab[:, None], A[None, :]) + qmul(Ab[None, :], A[:, None]) + qmul(A[:, None], Ab[None, :])
    rhs = qmul(C, S) / 3
    nA = _qmax(A)
    scale = max(_qmax(ct), float(np.linalg.norm(C)) * nA * nA, _qmax(B) ** 2, nA * nA)
    return _qmax(ct - rhs) / scale


def _c_scale(fr: FrameData) -> float:
    A = fr.A.coeffs
    B = fr.B.coeffs
    return max(float(np.mean(qnorm2(B) / qnorm2(A))), 1.0)


def dC(f, x, side, radius=None):
    """Differential of the extracted C, as a quaternion 1-form.

    The inner stencil radius is fixed once at ``x`` so that every outer
    sample of C carries the same truncation error.
    """
    x = as_array(x)
    inner = diff_lab.default_radius(x)
    while True:
        try:
            frame(f, x, side, inner, strict=True)
            break
        except DomainViolation:
            inner /= 2
            if inner < 1e-9 * max(1.0, float(np.linalg.norm(x))):
                raise
    inner /= 2
    radius = DSIDE_RADIUS * max(1.0, float(np.linalg.norm(x))) if radius is None else radius

    def C_at(pts):
        return np.array([frame(f, p, side, inner, strict=True).C.to_array() for p in pts])

    vals, _ = diff_lab.ridders(C_at, x, [np.eye(4)[[k]] for k in range(4)], min(radius, inner), ntab=DC_NTAB)
    return QOneForm(vals)


def system8_residual(A: QOneForm, B: QOneForm, C, dC_form: QOneForm | None, side="left") -> System8Residual:
    """Second integrability condition for given invariants.

    ``eq7`` is checked as 3-form coefficients in the given frame; the three
    real equations ``r1..r3`` after normalizing ``A`` to ``dx``.  With
    ``C`` numerically zero only the admissibility residual is reported.
    """
    C = as_array(C)
    p, q, adm = admissible_decompose(B, A, side)
    Cn = float(np.linalg.norm(C))
    if dC_form is None:
        return System8Residual(False, Cn, admissibility_residual=adm)
    if side == "right":
        A, B, C, dC_form = A.conj(), B.conj(), qconj(C), dC_form.conj()

    AA = wedge11(A, A.conj())
    lhs = wedge12(dC_form, AA)
    rhs = (wedge12(B, AA) - wedge21(AA, B)).lmul(C / 2)
    nA = _qmax(A.coeffs)
    scale7 = max(_qmax(lhs.tensor), _qmax(rhs.tensor), Cn * nA * nA)
    eq7 = _qmax(lhs.tensor - rhs.tensor) / scale7

    Minv = np.linalg.inv(A.matrix())
    b = B.precompose(Minv)
    gq = 2 * qmul(dC_form.precompose(Minv).coeffs, qinv(C))
    gamma = QOneForm.real(gq[:, 0])
    Bm = [QOneForm.real(b.component(mu)) for mu in range(4)]
    w1, w2, w3 = omega_basis()
    res = []
    for (u, wu), (v, wv), wg in (((2, w3), (3, w2), w1), ((3, w1), (1, w3), w2), ((1, w2), (2, w1), w3)):
        t1, t2, tg = wedge12(Bm[u], wu).tensor, wedge12(Bm[v], wv).tensor, wedge12(gamma, wg).tensor
        num = _qmax(2 * (t1 - t2) - tg)
        res.append(num / max(2 * _qmax(t1), 2 * _qmax(t2), _qmax(tg), 2.0))
    return System8Residual(True, Cn, gq[:, 0].tolist(), res[0], res[1], res[2], eq7, adm)


def residual_eq7_sys8(f, x, fr: FrameData | None = None) -> System8Residual:
    fr = fr or frame(f, x)
    Cn = float(np.linalg.norm(fr.C.to_array()))
    if Cn <= EPS_C * _c_scale(fr):
        return system8_residual(fr.A, fr.B, fr.C.to_array(), None, fr.side)
    return system8_residual(fr.A, fr.B, fr.C.to_array(), dC(f, x, fr.side), fr.side)


def check_point(f, x, side=None) -> PointCheck:
    fr = frame(f, x, side)
    return PointCheck(
        x=as_array(x).tolist(),
        side=fr.side,
        eq2=residual_eq2(f, x, fr),
        eq6pp=residual_first_integrability(f, x, fr),
        C=fr.C.to_json(),
        consistency=fr.consistency,
        sys8=residual_eq7_sys8(f, x, fr),
    )


def verify_map(
    f,
    center=0.0,
    radius=0.4,
    n_segments=50,
    n_samples=9,
    n_points=10,
    seed=0,
    tol: Tolerances | None = None,
    spec_id=None,
) -> VerificationReport:
    """Sampling check plus the full residual suite at ``n_points`` random points."""
    tol = tol or Tolerances()
    rep = verify_lines_to_circles(f, center, radius, n_segments, n_samples, tol.circle, seed, spec_id=spec_id)
    rep.tolerances = asdict(tol)
    rng = np.random.default_rng([seed, 1])
    pts = sample_ball(rng, np.broadcast_to(as_array(center), (4,)), radius, n_points)
    checks = _pmap(lambda p: check_point(f, p), list(pts))
    _summarize(rep, checks, tol)
    return rep


def _summarize(rep: VerificationReport, checks, tol: Tolerances):
    rep.points_tested = len(checks)
    if not checks:
        return
    C = np.array([c.C for c in checks])
    im_c = np.linalg.norm(C[:, 1:], axis=1)
    abs_c = np.linalg.norm(C, axis=1)
    rep.c_stats = {
        "mean": float(C[:, 0].mean()),
        "max_abs_im": float(im_c.max()),
        "consistency": float(max(c.consistency for c in checks)),
    }
    rep.residuals.update(
        eq2=float(max(c.eq2 for c in checks)),
        eq6pp=float(max(c.eq6pp for c in checks)),
    )
    applicable = [c.sys8 for c in checks if c.sys8.applicable]
    flat = [c.sys8 for c in checks if not c.sys8.applicable]
    rep.residuals["eq7"] = max((s.eq7 for s in applicable), default=None)
    rep.residuals["sys8"] = max((s.sys8 for s in applicable), default=None)
    rep.residuals["admissibility"] = max((s.admissibility_residual for s in applicable), default=None)
    sides = sorted({c.side for c in checks})
    rep.side = sides[0] if len(sides) == 1 else "mixed"

    v = rep.verdicts
    v["eq2"] = rep.residuals["eq2"] <= tol.eq2
    v["eq6pp"] = rep.residuals["eq6pp"] <= tol.eq6pp
    v["c_consistency"] = rep.c_stats["consistency"] <= tol.consistency
    v["c_real"] = bool(np.all(im_c <= tol.c_real_rel * abs_c + tol.c_real_abs))
    v["eq7_sys8"] = all(max(s.eq7, s.sys8) <= tol.sys8 for s in applicable) and all(
        s.C_norm <= tol.c_zero for s in flat
    )
    v["admissibility"] = all(s.admissibility_residual <= tol.admissibility for s in applicable)
    rep.residuals["points"] = [
        {
            "x": c.x,
            "side": c.side,
            "eq2": c.eq2,
            "eq6pp": c.eq6pp,
            "C": c.C,
            "consistency": c.consistency,
            "sys8": asdict(c.sys8),
        }
        for c in checks
    ]


# -- jets and scalar oracles ---------------------------------------------------

def jet_match(jet, target, tol=1e-5):
    """Coefficientwise comparison of two 3-jets.

    Each of ``f0, A, B, C`` must agree to ``tol * max(1, max|target|)``.
    Returns ``(ok, errors)`` with the absolute error per coefficient.
    """
    errors, ok = {}, True
    for name in ("f0", "A", "B", "C"):
        a, b = getattr(jet, name), getattr(target, name)
        a = a.coeffs if isinstance(a, QOneForm) else as_array(a)
        b = b.coeffs if isinstance(b, QOneForm) else as_array(b)
        err = float(np.abs(a - b).max())
        errors[name] = err
        ok &= err <= tol * max(1.0, float(np.abs(b).max()))
    return bool(ok), errors


def lemma1_oracle(a, x, b, trials=16, seed=0, tol_lemma=1e-10):
    """Is ``a y + b y^-1`` constant over the conjugates ``y = q x q^-1``?

    Returns ``(is_constant, spread)``; the spread is compared with
    ``tol_lemma * (|a||x| + |b|/|x|)``.
    """
    a, x, b = as_array(a), as_array(x), as_array(b)
    nx = float(np.linalg.norm(x))
    if np.linalg.norm(x[1:]) <= 1e-12 * max(1.0, nx):
        raise RealX("x must have a nonzero imaginary part")
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(trials, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    y = qmul(qmul(q, x), qconj(q))
    vals = qmul(a, y) + qmul(b, qinv(y))
    diff = vals[:, None, :] - vals[None, :, :]
    spread = float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))
    scale = float(np.linalg.norm(a)) * nx + float(np.linalg.norm(b)) / nx
    return spread <= tol_lemma * scale, spread


def compare_maps(f, g, center=0.0, radius=0.1, n_points=200, seed=0) -> float:
    """``sup |f(x) - g(x)|`` over seeded random points of the ball.

    The same seed yields the same points up to the scale ``radius``, so
    sups at different radii are directly comparable.
    """
    rng = np.random.default_rng(seed)
    pts = sample_ball(rng, np.zeros(4), 1.0, n_points) * radius + as_array(center)
    d = np.asarray(f(pts), dtype=float) - np.asarray(g(pts), dtype=float)
    return float(np.sqrt(qnorm2(d)).max())


def decay_exponent(f, g, radius=0.1, levels=3, n_points=200, seed=0) -> list[float]:
    """Observed exponents ``log2(sup(r) / sup(r/2))`` for ``r`` halved ``levels - 1`` times."""
    sups = [compare_maps(f, g, 0.0, radius / 2**k, n_points, seed) for k in range(levels)]
    return [float(np.log2(sups[k] / sups[k + 1])) for k in range(levels - 1)]


__all__ = [
    "Tolerances",
    "Segment",
    "System8Residual",
    "VerificationReport",
    "verify_lines_to_circles",
    "verify_map",
    "center_constancy",
    "residual_eq2",
    "residual_first_integrability",
    "residual_eq7_sys8",
    "system8_residual",
    "lemma1_oracle",
    "jet_match",
    "compare_maps",
    "decay_exponent",
]
