"""Planar vectors, headings, bearings and orthogonal projections.

Vectors are plain ``numpy`` arrays of shape ``(2,)``; matrices are ``(2, 2)``.
"""
import math

import numpy as np

from .errors import DegenerateBearingError, InputError

TWO_PI = 2.0 * math.pi
UNIT_TOL = 1e-9
MIN_NORM = 1e-12
MIN_SEPARATION = 1e-9


def as_vec2(v, name="vector"):
    arr = np.asarray(v, dtype=float)
    if arr.shape != (2,):
        raise InputError(f"{name} must have shape (2,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite components: {arr}")
    return arr


def unit(v):
    """Return ``v / |v|``; rejects vectors shorter than 1e-12."""
    arr = as_vec2(v)
    norm = math.hypot(arr[0], arr[1])
    if norm < MIN_NORM:
        raise InputError(f"cannot normalize near-zero vector {arr}")
    return arr / norm


def check_unit(u, name="unit vector", tol=UNIT_TOL):
    arr = as_vec2(u, name)
    norm = math.hypot(arr[0], arr[1])
    if abs(norm - 1.0) > tol:
        raise InputError(f"{name} must have unit norm, got |{name}| = {norm!r}")
    return arr


def normalize_angle(phi):
    """Wrap an angle into [0, 2*pi)."""
    out = math.fmod(phi, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    # fmod + shift can round up to exactly 2*pi for tiny negative inputs
    if out >= TWO_PI:
        out = 0.0
    return out


def heading_from_angle(phi):
    if not math.isfinite(phi):
        raise InputError(f"heading angle must be finite, got {phi!r}")
    return np.array([math.cos(phi), math.sin(phi)])


def projection_matrix(u):
    """``I - u u^T`` for a unit vector ``u``.

    Projects onto the line orthogonal to ``u``. The caller normalizes; a
    non-unit argument is an error rather than being silently rescaled.
    """
    u = check_unit(u)
    return np.eye(2) - np.outer(u, u)


def bearing(p, q, min_separation=MIN_SEPARATION):
    """Unit vector pointing from ``p`` toward ``q``."""
    p = as_vec2(p, "p")
    q = as_vec2(q, "q")
    r = q - p
    dist = math.hypot(r[0], r[1])
    if dist <= min_separation:
        raise DegenerateBearingError(
            f"bearing undefined: points {p} and {q} are {dist:.3g} apart "
            f"(minimum separation {min_separation:g})"
        )
    return r / dist


def bearing_angle(z):
    """Angle of a unit vector measured from the x axis, in [0, 2*pi)."""
    z = check_unit(z, "bearing")
    return normalize_angle(math.atan2(z[1], z[0]))


def cross(a, b):
    """Scalar z-component of the planar cross product."""
    return float(a[0] * b[1] - a[1] * b[0])


def angle_between(a, b):
    """Unsigned angle in [0, pi] between two nonzero vectors."""
    return math.atan2(abs(cross(a, b)), float(np.dot(a, b)))
