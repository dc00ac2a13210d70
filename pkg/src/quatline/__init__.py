"""Verification and synthesis of line-to-circle maps of R^4 = H."""

from . import diff_lab, map_zoo, qforms, quat, sphere_geom, verifier
from .diff_lab import Jet3, extract_jet3, frame
from .errors import DomainViolation, QuatlineError
from .map_zoo import map_from_json, synth_from_jet
from .quat import Quaternion
from .verifier import VerificationReport, verify_lines_to_circles, verify_map

__version__ = "0.1.0"

__all__ = [
    "diff_lab",
    "map_zoo",
    "qforms",
    "quat",
    "sphere_geom",
    "verifier",
    "Jet3",
    "extract_jet3",
    "frame",
    "DomainViolation",
    "QuatlineError",
    "map_from_json",
    "synth_from_jet",
    "Quaternion",
    "VerificationReport",
    "verify_lines_to_circles",
    "verify_map",
]
