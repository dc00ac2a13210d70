import os

import numpy as np
import pytest
from hypothesis import settings

from quatline.map_zoo import AffineMapR4, ClassicalProjectionR5, HopfRestriction
from quatline.quat import qconj, qinv, qmul

ONE = np.array([1.0, 0, 0, 0])

# reproducible property tests; HYPOTHESIS_PROFILE=explore for fresh examples
settings.register_profile("ci", derandomize=True)
settings.register_profile("explore", derandomize=False)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def random_hopf(rng, side="left"):
    """Well-conditioned L^-1 M (or M L^-1) on the ball |x| <= 0.5."""
    Lm = rng.normal(size=(4, 4)) * 0.3
    L0 = rng.normal(size=4)
    L0 *= 1.5 / np.linalg.norm(L0)
    M = AffineMapR4(rng.normal(size=(4, 4)), rng.normal(size=4))
    return HopfRestriction(AffineMapR4(Lm, L0), M, side)


def tilted_classical():
    frame = np.hstack([np.eye(4), np.zeros((4, 1))])
    frame[0, 4] = 0.3
    return ClassicalProjectionR5([0.1, 0, 0.2, 0, -2], frame, [0.05, 0.1, 0, 0, 0.3])


def model_as_classical():
    """Central projection that reproduces x = y/(1+|y|^2) after scaling y by 1/sqrt(2)."""
    z0, z1 = 3.0, 3.0 - np.sqrt(2.0)
    frame = np.hstack([np.eye(4), np.zeros((4, 1))])
    return ClassicalProjectionR5([0, 0, 0, 0, z1], frame, [0, 0, 0, 0, z0])


def unit(rng, n=4):
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


# closed forms for the two families, written from their displays


def model_A(y):
    n2 = y @ y
    return np.array([(1 + n2) * (2 * (y @ a) * y / (1 - n2) + a) for a in np.eye(4)])


def model_B(y):
    n2 = y @ y
    A = model_A(y)
    return np.array([2 * (2 * (1 + n2) / (1 - n2) * (y @ a) * ONE + qmul(y, qconj(A[k])) / (1 - n2)) for k, a in enumerate(np.eye(4))])


def hopf_A_B(h, x):
    Li, M = qinv(h.L(x)), h.M(x)
    Lv, Mv = h.L.linear, h.M.linear
    if h.side == "left":
        A = np.array([-qmul(qmul(qmul(Li, Lv @ a), Li), M) + qmul(Li, Mv @ a) for a in np.eye(4)])
        B = np.array([-2 * qmul(Li, Lv @ a) for a in np.eye(4)])
    else:
        A = np.array([-qmul(qmul(qmul(M, Li), Lv @ a), Li) + qmul(Mv @ a, Li) for a in np.eye(4)])
        B = np.array([-2 * qmul(Lv @ a, Li) for a in np.eye(4)])
    return A, B


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
