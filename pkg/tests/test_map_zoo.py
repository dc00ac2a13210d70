import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import model_as_classical, random_hopf, tilted_classical, unit
from quatline.diff_lab import Jet3, derivative_tensors
from quatline.errors import DomainViolation, MobiusPole, OutsideDisk
from quatline.map_zoo import (
    AffineMapR4,
    Compose,
    HopfRestriction,
    JetMap,
    JetMobius,
    ModelProjection,
    Perturbed,
    admissible_jet,
    eval,
    eval_jet_mobius,
    eval_model,
    identity,
    jet3_eval,
    map_from_json,
    synth_from_jet,
)
from quatline.qforms import QOneForm
from quatline.quat import Quaternion, I, qconj, qinv, qmul, qnorm2

small = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).map(np.array)


def one_plus_x():
    return AffineMapR4(np.eye(4), [1, 0, 0, 0])


def test_hopf_examples():
    h = HopfRestriction(AffineMapR4.constant([1, 0, 0, 0]), AffineMapR4.identity())
    assert eval(h, Quaternion(0.3, -1, 2, 0.5)) == Quaternion(0.3, -1, 2, 0.5)
    h = HopfRestriction(one_plus_x(), AffineMapR4.identity())
    assert np.allclose(eval(h, I).to_array(), [0.5, 0.5, 0, 0])


def test_hopf_sides_brute_force(rng):
    x = rng.normal(size=(6, 4)) * 0.3
    for side in ("left", "right"):
        h = random_hopf(rng, side)
        Li, M = qinv(h.L(x)), h.M(x)
        want = qmul(Li, M) if side == "left" else qmul(M, Li)
        assert np.allclose(h(x), want)


def test_hopf_pole():
    h = HopfRestriction(one_plus_x(), AffineMapR4.identity())
    with pytest.raises(DomainViolation):
        h(np.array([[-1.0, 0, 0, 0]]))


def test_model_examples():
    m = ModelProjection(1.0)
    e = unit(np.random.default_rng(1))
    assert np.allclose(eval(m, np.zeros(4)), 0)
    assert np.allclose(eval_model(m, e / 2), e)
    assert np.allclose(eval_model(m, 0.3 * e), e / 3)
    with pytest.raises(OutsideDisk):
        eval_model(m, 0.6 * e)


@settings(max_examples=60)
@given(st.floats(-2, 2), small)
def test_model_solves_implicit_equation(lam, x):
    m = ModelProjection(lam)
    x = x * 0.9 * min(m.domain_radius(), 1.0) / max(np.linalg.norm(x), 1.0)
    y = m(x)
    n2 = y @ y
    assert np.allclose(y / (1 + lam * n2), x, rtol=1e-12, atol=1e-15)


def test_model_is_the_classical_projection():
    # central projection of the plane z = 3 - sqrt(2) from (0, 3), read after y -> y/sqrt(2)
    c = model_as_classical()
    x = np.random.default_rng(2).normal(size=(10, 4)) * 0.1
    assert np.allclose(c(x) / np.sqrt(2), ModelProjection(1.0)(x))


def closed_form_mobius(p, q, y):
    """The displayed transformation ``2q^-1 (1 - (q y/2)(1 - p(y)/2)^-1)^-1 - 2q^-1``."""
    qi = qinv(q)
    s = 1 - y @ p / 2
    u = qmul(q, y) / 2 / s
    return 2 * qmul(qi, qinv(np.array([1.0, 0, 0, 0]) - u)) - 2 * qi


@given(small, small, small)
def test_mobius_matches_display(p, q, y):
    if np.linalg.norm(q) < 0.1:
        return
    y = y * 0.3
    assert np.allclose(eval_jet_mobius(JetMobius(p, q), y), closed_form_mobius(p, q, y), atol=1e-10)


def test_mobius_examples():
    assert np.allclose(eval_jet_mobius(JetMobius(), [0.3, 0.1, 0, 2]), [0.3, 0.1, 0, 2])
    assert np.allclose(eval_jet_mobius(JetMobius([1, 0, 0, 0]), [1, 0, 0, 0]), [2, 0, 0, 0])
    assert np.allclose(eval_jet_mobius(JetMobius(q=[2, 0, 0, 0]), [0.25, 0, 0, 0]), [1 / 3, 0, 0, 0])
    with pytest.raises(MobiusPole):
        eval_jet_mobius(JetMobius([1, 0, 0, 0]), [2, 0, 0, 0])


def test_mobius_fixes_zero_with_identity_differential(rng):
    m = JetMobius(rng.normal(size=4), rng.normal(size=4))
    t = derivative_tensors(m, np.zeros(4), order=1)
    assert np.allclose(t.f0, 0)
    assert np.allclose(t.d1, np.eye(4), atol=1e-10)


def test_compose_order():
    a, b = ModelProjection(1.0), JetMobius([1, 0, 0, 0])
    x = np.array([[0.1, 0.2, 0, 0]])
    assert np.allclose(Compose((a, b))(x), b(a(x)))
    with pytest.raises(ValueError):
        Compose(())


def test_perturbed():
    base = ModelProjection(1.0)
    x = np.array([[0.2, 0.1, 0, 0]])
    d = Perturbed(base, 0.01)(x) - base(x)
    assert np.allclose(d, [[0, 0.01 * 0.2**3, 0, 0]])


def test_synth_examples():
    assert isinstance(synth_from_jet(np.zeros(4), np.zeros(4), 0), ModelProjection)
    assert synth_from_jet(np.zeros(4), np.zeros(4), 0).lam == 0
    m = synth_from_jet(np.zeros(4), np.zeros(4), 6.0)
    x = np.random.default_rng(0).normal(size=(5, 4)) * 0.1
    assert np.array_equal(m(x), ModelProjection(1.0)(x))
    assert isinstance(synth_from_jet([1, 0, 0, 0], [-2, 0, 0, 0], 3.0), Compose)
    with pytest.raises(ValueError):
        synth_from_jet(np.zeros(4), np.zeros(4), np.inf)


def test_jet3_eval_examples(rng):
    x = rng.normal(size=(5, 4))
    base = dict(f0=Quaternion(), A=QOneForm.dx(), B=QOneForm(np.zeros((4, 4))))
    assert np.allclose(jet3_eval(Jet3(C=Quaternion(), **base), x), x)
    cubic = x + qnorm2(x)[:, None] * x
    assert np.allclose(jet3_eval(Jet3(C=Quaternion(6.0), **base), x), cubic)


def test_admissible_jet_matches_display(rng):
    # x + (p(x) + xq)x/2 + ((3/2)(p(x) + xq)^2 + C|x|^2)x/6
    p, q, C = rng.normal(size=4), rng.normal(size=4), 2.5
    x = rng.normal(size=(6, 4)) * 0.3
    b = (x @ p)[:, None] * np.array([1.0, 0, 0, 0]) + qmul(x, q)
    want = x + qmul(b, x) / 2 + qmul(1.5 * qmul(b, b) + C * qnorm2(x)[:, None] * np.array([1, 0, 0, 0]), x) / 6
    assert np.allclose(jet3_eval(admissible_jet(p, q, C), x), want)


def test_jet3_right_side_mirrors(rng):
    A, B = QOneForm(rng.normal(size=(4, 4))), QOneForm(rng.normal(size=(4, 4)))
    f0, C = Quaternion(*rng.normal(size=4)), Quaternion(1.3, 0.2)
    x = rng.normal(size=(4, 4))
    right = jet3_eval(Jet3(f0, A, B, C, side="right"), x)
    left = jet3_eval(Jet3(Quaternion.from_array(qconj(f0.to_array())), A.conj(), B.conj(), Quaternion(1.3, -0.2)), x)
    assert np.allclose(qconj(right), left)


def all_specs(rng):
    return [
        random_hopf(rng, "left"),
        random_hopf(rng, "right"),
        ModelProjection(0.7),
        JetMobius(rng.normal(size=4), rng.normal(size=4)),
        tilted_classical(),
        synth_from_jet(rng.normal(size=4), rng.normal(size=4), 2.0),
        JetMap(admissible_jet(rng.normal(size=4), rng.normal(size=4), 1.5)),
        Perturbed(ModelProjection(1.0), 0.02),
        identity(),
    ]


def test_json_roundtrip_all_families(rng):
    x = rng.normal(size=(5, 4)) * 0.1
    for spec in all_specs(rng):
        d = json.loads(json.dumps(spec.to_json()))
        again = map_from_json(d)
        assert np.array_equal(again(x), spec(x)), d["type"]
        assert again.to_json() == d


def test_json_jet_accepts_quaternion_C(rng):
    d = JetMap(admissible_jet(rng.normal(size=4), rng.normal(size=4), 1.5)).to_json()
    d["C"] = [1.5, 0.5, 0, 0]
    assert map_from_json(d).jet.C == Quaternion(1.5, 0.5)


@pytest.mark.parametrize(
    "bad",
    [{}, {"type": "nope"}, {"type": "model"}, {"type": "compose", "maps": []}, {"type": "model", "lambda": "x"}],
)
def test_json_rejects_bad_specs(bad):
    with pytest.raises((ValueError, KeyError)):
        map_from_json(bad)


def test_quaternion_eval_roundtrip():
    q = eval(ModelProjection(1.0), Quaternion(0.3))
    assert isinstance(q, Quaternion) and np.isclose(q.w, 1 / 3)
