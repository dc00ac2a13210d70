from concurrent.futures import ThreadPoolExecutor
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import hopf_A_B, model_A, model_B, random_hopf, tilted_classical, unit
from quatline.diff_lab import (
    Side,
    admissible_decompose,
    derivative,
    derivative_tensors,
    detect_side,
    extract_A,
    extract_B,
    extract_C,
    extract_jet3,
    frame,
)
from quatline.errors import DegenerateA, SideMismatch, StencilOutsideDomain
from quatline.map_zoo import AffineMapR4, HopfRestriction, ModelProjection, identity, synth_from_jet
from quatline.qforms import QOneForm
from quatline.quat import left_matrix, qconj, qmul, qnorm2, right_matrix

ONE = np.array([1.0, 0, 0, 0])


def cube(x):
    return qmul(qmul(x, x), x)


def relerr(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)).max() / max(np.abs(np.asarray(b)).max(), 1.0)


def test_derivative_examples(rng):
    a = unit(rng)
    val, err = derivative(identity(), rng.normal(size=4), [a])
    assert np.allclose(val, a) and err < 1e-10
    val, _ = derivative(lambda x: qmul(x, x), np.zeros(4), [[0, 1, 0, 0], [0, 1, 0, 0]])
    assert np.allclose(val, [-2, 0, 0, 0])
    val, _ = derivative(ModelProjection(1.0), np.zeros(4), [a])
    assert np.allclose(val, a)
    with pytest.raises(ValueError):
        derivative(identity(), np.zeros(4), [])


def test_third_derivative_of_cube(rng):
    x = rng.normal(size=4) * 0.5
    d = [unit(rng) for _ in range(3)]
    want = sum(qmul(qmul(d[i], d[j]), d[k]) for i, j, k in permutations(range(3)))
    val, _ = derivative(cube, x, d)
    assert relerr(val, want) < 1e-8
    # second derivative of x^3 along (a, b): sum over the 3 positions of x
    val, _ = derivative(cube, x, d[:2])
    a, b = d[:2]
    want = sum(qmul(qmul(p, q), r) for p, q, r in [(a, b, x), (b, a, x), (a, x, b), (b, x, a), (x, a, b), (x, b, a)])
    assert relerr(val, want) < 1e-8


def test_second_derivatives_symmetric(rng):
    t = derivative_tensors(tilted_classical(), rng.normal(size=4) * 0.2, order=2)
    assert relerr(t.d2, np.swapaxes(t.d2, 0, 1)) < 1e-6
    # storage is filled by symmetry; compare against an independent mixed derivative
    x = t.x
    v01, _ = derivative(tilted_classical(), x, [np.eye(4)[1], np.eye(4)[0]])
    assert relerr(v01, t.d2[0, 1]) < 1e-6


def test_extract_A_examples():
    assert np.allclose(extract_A(identity(), np.full(4, 0.3)).coeffs, np.eye(4))
    h = HopfRestriction(AffineMapR4(np.eye(4), ONE), AffineMapR4.identity())
    assert np.allclose(extract_A(h, np.zeros(4)).coeffs, np.eye(4), atol=1e-10)


def test_model_invariants_match_closed_forms(rng):
    for r in (0.0, 0.3, 0.5, 0.7, 0.8):
        y = r * unit(rng)
        x = y / (1 + y @ y)
        fr = frame(ModelProjection(1.0), x)
        assert relerr(fr.A.coeffs, model_A(y)) < 1e-6
        assert relerr(fr.B.coeffs, model_B(y)) < 1e-6
        assert abs(fr.C.w - 6 / (1 - y @ y) ** 2) <= 1e-5 * fr.C.w
        assert np.linalg.norm(fr.C.to_array()[1:]) < 1e-5 * fr.C.w
        assert fr.consistency <= 1e-5


def test_hopf_invariants_match_closed_forms(rng):
    for side in ("left", "right"):
        h = random_hopf(rng, side)
        x = 0.4 * unit(rng)
        A, B = hopf_A_B(h, x)
        fr = frame(h, x, side)
        assert relerr(fr.A.coeffs, A) < 1e-6
        assert relerr(fr.B.coeffs, B) < 1e-6
        assert np.linalg.norm(fr.C.to_array()) <= 1e-5
        assert fr.consistency <= 1e-5


def test_extract_B_examples():
    assert np.allclose(extract_B(ModelProjection(1.0), np.zeros(4)).coeffs, 0, atol=1e-8)
    h = HopfRestriction(AffineMapR4(np.eye(4), ONE), AffineMapR4.identity())
    assert np.allclose(extract_B(h, np.zeros(4)).coeffs, -2 * np.eye(4), atol=1e-8)
    assert np.allclose(extract_B(identity(), np.ones(4)).coeffs, 0, atol=1e-8)


def test_extract_B_side_mismatch(rng):
    with pytest.raises(SideMismatch):
        extract_B(random_hopf(rng, "left"), np.zeros(4), side="right")


def test_extract_C_examples(rng):
    C, ct, cons = extract_C(random_hopf(rng, "right"), 0.2 * unit(rng), side="right")
    assert np.linalg.norm(C.to_array()) <= 1e-5 and cons <= 1e-5
    assert np.abs(ct.c).max() <= 1e-5
    C, _, _ = extract_C(ModelProjection(1.0), np.zeros(4))
    assert abs(C.w - 6) < 1e-5
    C, _, _ = extract_C(identity(), np.zeros(4))
    assert np.linalg.norm(C.to_array()) < 1e-8


def test_side_detection(rng):
    for side in ("left", "right"):
        for _ in range(3):
            rep = detect_side(random_hopf(rng, side), 0.3 * unit(rng))
            assert rep.side is Side(side)
            assert rep.admits(side) and not rep.admits("left" if side == "right" else "right")
    assert detect_side(identity(), np.zeros(4)).side is Side.BOTH
    assert detect_side(ModelProjection(1.0), [0.1, 0.2, 0, 0]).side is Side.BOTH


def test_one_plus_x_hopf_is_two_sided():
    # (1+x)^-1 x = x (1+x)^-1, so this particular instance satisfies both equations
    h = HopfRestriction(AffineMapR4(np.eye(4), ONE), AffineMapR4.identity())
    rep = detect_side(h, np.zeros(4))
    assert rep.side is Side.BOTH and rep.left_linearity_residual <= 1e-8


def test_conjugation_flips_side(rng):
    for _ in range(5):
        h = random_hopf(rng, "left")
        flipped = lambda x, h=h: qconj(h(qconj(x)))  # noqa: E731
        assert detect_side(flipped, 0.3 * unit(rng)).side is Side.RIGHT


def test_degenerate_A():
    flat = lambda x: np.column_stack([x[:, 0], x[:, 0], x[:, 2], x[:, 3]])  # noqa: E731
    with pytest.raises(DegenerateA):
        detect_side(flat, np.zeros(4))


def test_stencil_outside_domain():
    with pytest.raises(StencilOutsideDomain):
        extract_A(ModelProjection(1.0), [0.5, 0, 0, 0])


def test_admissible_decompose_examples():
    dx = QOneForm.dx()
    p, q, res = admissible_decompose(QOneForm(np.zeros((4, 4))), dx)
    assert np.allclose(p, 0) and np.allclose(q.to_array(), 0) and res == 0
    p, q, res = admissible_decompose(-2 * dx, dx)
    assert np.allclose(p, 0, atol=1e-12) and np.allclose(q.to_array(), [-2, 0, 0, 0]) and res <= 1e-12
    iB = QOneForm(qmul(np.array([0, 1.0, 0, 0]), np.eye(4)))
    assert admissible_decompose(iB, dx)[2] >= 0.5
    with pytest.raises(DegenerateA):
        admissible_decompose(dx, QOneForm(np.zeros((4, 4))))


@settings(max_examples=40)
@given(st.integers(0, 2**31), st.sampled_from(["left", "right"]))
def test_admissible_decompose_recovers_p_q(seed, side):
    rng = np.random.default_rng(seed)
    p, q = rng.normal(size=4), rng.normal(size=4)
    A = QOneForm(rng.normal(size=(4, 4)) + 3 * np.eye(4))
    mult = left_matrix if side == "left" else right_matrix
    # B(a) = p(A a) + (A a) q  (right: q (A a))
    xi = A.coeffs  # rows are A(e_nu)
    B = np.outer(xi @ p, ONE) + np.array([mult(v) @ q for v in xi])
    p2, q2, res = admissible_decompose(QOneForm(B), A, side)
    assert res < 1e-10
    assert np.allclose(p2, p, atol=1e-8) and np.allclose(q2.to_array(), q, atol=1e-8)


def test_admissible_form_satisfies_displayed_relations(rng):
    # B = p + dx q in the normalized frame; components B^mu_nu = coeff of dx^nu in B^mu
    p, q = rng.normal(size=4), rng.normal(size=4)
    b = (QOneForm.real(p) + QOneForm.dx().rmul(q)).coeffs
    Bm = lambda mu, nu: b[nu, mu]  # noqa: E731
    assert np.isclose(Bm(1, 1), Bm(2, 2)) and np.isclose(Bm(2, 2), Bm(3, 3))
    assert np.isclose(Bm(1, 0), Bm(2, 3)) and np.isclose(Bm(2, 3), -Bm(3, 2))
    assert np.isclose(Bm(2, 0), Bm(3, 1)) and np.isclose(Bm(3, 1), -Bm(1, 3))
    assert np.isclose(Bm(3, 0), Bm(1, 2)) and np.isclose(Bm(1, 2), -Bm(2, 1))


def test_extract_jet3_examples():
    j = extract_jet3(identity(), [0.1, 0, 0, 0])
    assert np.allclose(j.f0.to_array(), [0.1, 0, 0, 0])
    assert np.allclose(j.A.coeffs, np.eye(4)) and np.allclose(j.B.coeffs, 0, atol=1e-8)
    assert abs(j.C.w) < 1e-8
    j = extract_jet3(ModelProjection(1.0), np.zeros(4))
    assert np.allclose(j.B.coeffs, 0, atol=1e-8) and abs(j.C.w - 6) < 1e-5
    assert j.cross_check < 1e-6
    p, q = np.array([1.0, 0, 0, 0]), np.array([-2.0, 0, 0, 0])
    j = extract_jet3(synth_from_jet(p, q, 3.0), np.zeros(4))
    want = (QOneForm.real(p) + QOneForm.dx().rmul(q)).coeffs
    assert np.abs(j.B.coeffs - want).max() < 1e-5 and abs(j.C.w - 3) < 1e-5


def test_jet_json_fields():
    d = extract_jet3(ModelProjection(1.0), np.zeros(4)).to_json()
    assert set(d) >= {"f0", "A", "B", "C", "x0", "side", "cross_check"}
    assert isinstance(d["C"], (float, list))


def test_frame_json(rng):
    d = frame(random_hopf(rng, "right"), np.zeros(4)).to_json()
    assert d["side"] == "right" and d["side_report"]["side"] == "right"
    for key in ("A", "B", "C", "C_tensor", "consistency", "derivative_error"):
        assert key in d


def test_frames_thread_safe(rng):
    f = tilted_classical()
    pts = list(rng.normal(size=(6, 4)) * 0.2)
    serial = [frame(f, p).C.to_array() for p in pts]
    with ThreadPoolExecutor(4) as ex:
        par = list(ex.map(lambda p: frame(f, p).C.to_array(), pts))
    assert np.array_equal(np.array(serial), np.array(par))


def test_right_case_is_conjugate_left_case(rng):
    h = random_hopf(rng, "right")
    x = 0.3 * unit(rng)
    fr = frame(h, x)
    g = lambda y: qconj(h(y))  # noqa: E731
    fl = frame(g, x, "left")
    assert np.allclose(fr.B.coeffs, qconj(fl.B.coeffs))
    # right defining relation d_a A_a = A_a B_a along a random direction
    a = unit(rng)
    H, _ = derivative(h, x, [a, a])
    assert relerr(H, qmul(fr.A(a), fr.B(a))) < 1e-6
    assert qnorm2(fr.C.to_array()) < 1e-10
