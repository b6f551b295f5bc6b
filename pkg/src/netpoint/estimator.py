"""Distributed bearing-only estimator for the target position.

Sensing agents (ids 1, 2) combine a consensus pull toward their peer with a
projection term that moves their estimate onto their own bearing line.
Non-sensing agents (ids 3..n) run pure consensus over NSA neighbours and the
two SAs. ``estimates`` is always an ``(n, 2)`` array indexed by ``id - 1``.
"""
import numpy as np

from .errors import InputError
from .geometry import as_vec2, bearing, bearing_angle, heading_from_angle, projection_matrix


def sa_derivative(own, peer, gain, z, p):
    """``gain * (peer - own) - M_z (own - p)``."""
    if not gain > 0:
        raise InputError(f"SA gain must be positive, got {gain!r}")
    own = as_vec2(own, "own")
    peer = as_vec2(peer, "peer")
    return gain * (peer - own) - projection_matrix(z) @ (own - as_vec2(p, "p"))


def nsa_derivative(i, estimates, topology):
    """Weighted disagreement of NSA ``i`` with its NSA neighbours and the SAs."""
    if not 3 <= i <= topology.n:
        raise InputError(f"NSA id must lie in 3..{topology.n}, got {i}")
    q = np.asarray(estimates, dtype=float)
    if q.shape != (topology.n, 2):
        raise InputError(f"estimates must have shape ({topology.n}, 2), got {q.shape}")
    row = i - 3
    own = q[i - 1]
    nsa = q[2:]
    weights = topology.nsa_adjacency[row]
    out = weights @ (nsa - own)
    beta1, beta2 = topology.sa_input[row]
    out = out + beta1 * (q[0] - own) + beta2 * (q[1] - own)
    return out


def estimate_derivatives(estimates, positions, target, topology):
    """Stack of estimate derivatives for all agents, SA bearings from true geometry."""
    q = np.asarray(estimates, dtype=float)
    p = np.asarray(positions, dtype=float)
    z1 = bearing(p[0], target)
    z2 = bearing(p[1], target)
    out = np.empty_like(q)
    out[0] = sa_derivative(q[0], q[1], topology.k12, z1, p[0])
    out[1] = sa_derivative(q[1], q[0], topology.k21, z2, p[1])
    for i in range(3, topology.n + 1):
        out[i - 1] = nsa_derivative(i, q, topology)
    return out


def error_derivatives(errors, positions, target, topology):
    """Derivatives of the estimation errors ``q0 - q_hat`` written in error form.

    Independent of :func:`estimate_derivatives`; both must satisfy
    ``d(err)/dt = -d(q_hat)/dt`` for a stationary target.
    """
    e = np.asarray(errors, dtype=float)
    p = np.asarray(positions, dtype=float)
    m1 = projection_matrix(bearing(p[0], target))
    m2 = projection_matrix(bearing(p[1], target))
    out = np.empty_like(e)
    out[0] = -topology.k12 * (e[0] - e[1]) - m1 @ e[0]
    out[1] = -topology.k21 * (e[1] - e[0]) - m2 @ e[1]
    lap = np.diag(topology.nsa_adjacency.sum(axis=1)) - topology.nsa_adjacency
    beta = topology.sa_input
    b_f = beta[:, 0] + beta[:, 1]
    b_e = beta[:, 1]
    # fusion-node form: SA pair merged with weight b_f, residual b_e (e1 - e2)
    out[2:] = (
        -(lap + np.diag(b_f)) @ e[2:]
        + np.outer(b_f, e[0])
        - np.outer(b_e, e[0] - e[1])
    )
    return out


def sa_error_system_matrix(k12, k21, theta1, theta2):
    """4x4 matrix ``H`` of the SA error system ``d/dt [e1; e2] = H [e1; e2]``."""
    m1 = projection_matrix(heading_from_angle(theta1))
    m2 = projection_matrix(heading_from_angle(theta2))
    eye = np.eye(2)
    return np.block([
        [-k12 * eye - m1, k12 * eye],
        [k21 * eye, -k21 * eye - m2],
    ])


def sa_bearing_angles(positions, target):
    p = np.asarray(positions, dtype=float)
    return bearing_angle(bearing(p[0], target)), bearing_angle(bearing(p[1], target))
