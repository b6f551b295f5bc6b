"""Pre-flight certificates for localizability and closed-loop stability."""
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EigenConvergenceError, InputError
from .estimator import sa_bearing_angles, sa_error_system_matrix
from .geometry import bearing, cross
from .topology import connectivity_certificate, fusion_reduce

COLLINEAR_TOL = 1e-6
MAX_EIG_DIM = 16

REASON_COLLINEAR = "localizability violated: sensing agents collinear with the target"
REASON_UNSTABLE = "SA error system not Hurwitz stable"
REASON_NSA = "fusion-node condition violated"


@dataclass
class StabilityCertificate:
    localizable: bool
    char_poly_coeffs: list
    hurwitz_stable: bool
    eigen_real_parts: list
    nsa_ok: bool
    sin_bearing_gap: float = 0.0
    nsa_eigen_real_parts: list = field(default_factory=list)
    reasons: list = field(default_factory=list)

    @property
    def overall(self):
        return self.localizable and self.hurwitz_stable and self.nsa_ok

    def to_dict(self):
        d = asdict(self)
        d["overall"] = self.overall
        return d


def localizability_check(p1, p2, q0, tol=COLLINEAR_TOL):
    """True iff the two SA bearings to ``q0`` are neither parallel nor antiparallel."""
    return abs(cross(bearing(p1, q0), bearing(p2, q0))) > tol


def characteristic_polynomial(k12, k21, theta1, theta2):
    """Coefficients, highest power first, of det(lambda I - H) for the SA error system."""
    if not (k12 > 0 and k21 > 0):
        raise InputError(f"gains must be positive, got k12={k12!r}, k21={k21!r}")
    return np.array([
        1.0,
        2.0 * k12 + 2.0 * k21 + 2.0,
        k12**2 + k21**2 + 2.0 * k12 * k21 + 3.0 * k12 + 3.0 * k21 + 1.0,
        k21**2 + k12**2 + 2.0 * k12 * k21 + k21 + k12,
        k12 * k21 * math.sin(theta1 - theta2) ** 2,
    ])


def hurwitz_minors(coeffs):
    """Leading principal minors of the Hurwitz matrix of a quartic."""
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (5,):
        raise InputError(f"expected 5 coefficients of a quartic, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InputError("coefficients must be finite")
    if c[0] <= 0:
        raise InputError(f"leading coefficient must be positive, got {c[0]}")
    a0, a1, a2, a3, a4 = c / c[0]
    d1 = a1
    d2 = a1 * a2 - a0 * a3
    d3 = a3 * d2 - a1 * a1 * a4
    d4 = a4 * d3
    return d1, d2, d3, d4


def hurwitz_test(coeffs):
    return all(d > 0 for d in hurwitz_minors(coeffs))


def eigen_real_parts(matrix):
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"matrix must be square, got shape {m.shape}")
    if m.shape[0] > MAX_EIG_DIM:
        raise InputError(f"matrix dimension {m.shape[0]} exceeds {MAX_EIG_DIM}")
    if not np.all(np.isfinite(m)):
        raise InputError("matrix has non-finite entries")
    try:
        eig = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"eigenvalue iteration failed: {exc}") from exc
    return np.sort(eig.real)


def nsa_matrix(reduced):
    return np.asarray(reduced.laplacian) + reduced.b_f_diag


def nsa_convergence_check(reduced):
    if not connectivity_certificate(reduced).satisfied:
        return False
    return bool(eigen_real_parts(nsa_matrix(reduced))[0] > 0)


def certify(scenario):
    p = scenario.positions
    q0 = scenario.target
    topo = scenario.topology
    theta1, theta2 = sa_bearing_angles(p, q0)
    sin_gap = cross(bearing(p[0], q0), bearing(p[1], q0))
    localizable = localizability_check(p[0], p[1], q0)
    coeffs = characteristic_polynomial(topo.k12, topo.k21, theta1, theta2)
    stable = hurwitz_test(coeffs)
    sa_eigs = eigen_real_parts(sa_error_system_matrix(topo.k12, topo.k21, theta1, theta2))

    reduced = fusion_reduce(topo)
    conn = connectivity_certificate(reduced)
    nsa_eigs = eigen_real_parts(nsa_matrix(reduced))
    nsa_ok = conn.satisfied and bool(nsa_eigs[0] > 0)

    reasons = []
    if not localizable:
        reasons.append(REASON_COLLINEAR)
    if not stable:
        reasons.append(REASON_UNSTABLE)
    if not nsa_ok:
        reasons.append(f"{REASON_NSA}: {conn.reason or 'L + diag(b_f) has an eigenvalue with nonpositive real part'}")
    return StabilityCertificate(
        localizable=localizable,
        char_poly_coeffs=[float(c) for c in coeffs],
        hurwitz_stable=stable,
        eigen_real_parts=[float(e) for e in sa_eigs],
        nsa_ok=nsa_ok,
        sin_bearing_gap=float(sin_gap),
        nsa_eigen_real_parts=[float(e) for e in nsa_eigs],
        reasons=reasons,
    )
