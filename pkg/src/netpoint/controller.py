"""Pointing law: rotate each heading toward the agent's current target estimate."""
import numpy as np

from .geometry import angle_between, as_vec2, bearing, projection_matrix


def heading_derivative(h, estimate, p):
    """``(I - h h^T)(estimate - p)``; always orthogonal to ``h``."""
    return projection_matrix(h) @ (as_vec2(estimate, "estimate") - as_vec2(p, "p"))


def pointing_error(h, p, q0):
    """Angle in radians, in [0, pi], between heading ``h`` and the true bearing to ``q0``."""
    return angle_between(as_vec2(h, "h"), bearing(p, q0))


def heading_derivatives(headings, estimates, positions):
    h = np.asarray(headings, dtype=float)
    return np.array([
        heading_derivative(h[i], estimates[i], positions[i]) for i in range(len(h))
    ])
