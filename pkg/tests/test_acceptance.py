"""Exit criteria for the reference-scenario reproduction and the analysis toolkit.

Each test records one PASS/FAIL line, printed in the pytest terminal summary.
"""
import dataclasses
import json
import math
import time

import mpmath
import numpy as np

from netpoint import cli
from netpoint.analysis import (
    certify,
    characteristic_polynomial,
    eigen_real_parts,
    hurwitz_test,
    nsa_convergence_check,
)
from netpoint.controller import heading_derivatives
from netpoint.engine import initial_state, run, step
from netpoint.estimator import estimate_derivatives, sa_error_system_matrix
from netpoint.geometry import bearing, heading_from_angle, projection_matrix
from netpoint.topology import ReducedGraph, fusion_spanning_tree_check, laplacian

EPS = 1e-3
HOLD = 10
T_FINAL = 60.0


def faddeev_leverrier(matrix):
    """Characteristic polynomial coefficients (highest power first) in 50-digit arithmetic."""
    mpmath.mp.dps = 50
    a = mpmath.matrix(matrix)
    n = a.rows
    coeffs = [mpmath.mpf(1)]
    m = mpmath.zeros(n, n)
    for k in range(1, n + 1):
        m = a * m + coeffs[-1] * mpmath.eye(n)
        am = a * m
        coeffs.append(-sum(am[i, i] for i in range(n)) / k)
    return coeffs


def mp_sa_matrix(k12, k21, th1, th2):
    mpmath.mp.dps = 50
    rows = [[mpmath.mpf(0)] * 4 for _ in range(4)]
    for blk, (th, k, other) in enumerate(((th1, k12, 1), (th2, k21, 0))):
        s, c = mpmath.sin(mpmath.mpf(th)), mpmath.cos(mpmath.mpf(th))
        proj = [[s * s, -c * s], [-c * s, c * c]]
        for i in range(2):
            for j in range(2):
                rows[2 * blk + i][2 * blk + j] = -proj[i][j] - (k if i == j else 0)
            rows[2 * blk + i][2 * other + i] = mpmath.mpf(k)
    return rows


def closure_oracle(b_f, adj):
    m = len(b_f)
    reach = np.zeros((m + 1, m + 1), dtype=bool)
    reach[0, 1:] = np.asarray(b_f) > 0
    reach[1:, 1:] = (np.asarray(adj) > 0).T
    for k in range(m + 1):
        reach |= reach[:, [k]] & reach[[k], :]
    return bool(reach[0, 1:].all())


def test_criterion_1_reference_reproduction(reference, tmp_path, acceptance_report):
    scenario = reference.replace(t_final=T_FINAL, convergence_eps=EPS, convergence_hold=HOLD)
    assert np.array_equal(scenario.positions, [[2, 4], [4, 4], [5, 2], [4, 1], [2, 1], [1, 2]])
    assert np.array_equal(scenario.target, [3, 6]) and scenario.dt == 0.1
    assert scenario.topology.k12 == scenario.topology.k21 == 1.0
    assert set(np.unique(scenario.topology.nsa_adjacency)) <= {0.0, 1.0}
    assert set(np.unique(scenario.topology.sa_input)) <= {0.0, 1.0}
    assert np.array_equal(initial_state(scenario).estimates, scenario.positions)

    started = time.perf_counter()
    trace = run(scenario)
    wall = time.perf_counter() - started

    ok = trace.converged_at is not None and trace.converged_at <= T_FINAL
    if ok:
        k = int(round(trace.converged_at / scenario.dt))
        window = slice(k, k + HOLD)
        ok = bool(np.all(trace.est_err[window] < EPS) and np.all(trace.point_err[window] < EPS))
    ok = ok and wall < 1.0

    code, summary = cli.execute(scenario, tmp_path, "test")
    saved = json.loads((tmp_path / "summary.json").read_text())
    recorded = (saved["config"]["convergence_eps"] == EPS
                and saved["config"]["convergence_hold_steps"] == HOLD
                and saved["config"]["t_final_seconds"] == T_FINAL
                and saved["converged_at"] == trace.converged_at)
    ok = ok and code == cli.EXIT_OK and recorded
    acceptance_report(
        "1 reference-scenario reproduction", ok,
        f"converged_at={trace.converged_at}s (<= {T_FINAL}), final max est err={trace.final_max_est_err:.3g}, "
        f"point err={trace.final_max_point_err:.3g}, wall={wall:.3f}s (< 1s)",
    )
    assert ok


def test_criterion_2_hurwitz_eigen_agreement(acceptance_report):
    rng = np.random.default_rng(20240601)
    samples = 0
    disagreements = 0
    worst_rel = 0.0
    while samples < 250:
        k12, k21 = rng.uniform(0.1, 10.0, 2)
        th1, th2 = rng.uniform(0.0, 2 * math.pi, 2)
        if abs(math.sin(th1 - th2)) < 1e-3:
            continue
        samples += 1
        coeffs = characteristic_polynomial(k12, k21, th1, th2)
        stable_poly = hurwitz_test(coeffs)
        stable_eig = bool(eigen_real_parts(sa_error_system_matrix(k12, k21, th1, th2))[-1] < 0)
        disagreements += stable_poly != stable_eig
        exact = faddeev_leverrier(mp_sa_matrix(k12, k21, th1, th2))
        for c, e in zip(coeffs, exact):
            worst_rel = max(worst_rel, float(abs(mpmath.mpf(c) - e) / abs(e)))
    ok = disagreements == 0 and worst_rel <= 1e-8
    acceptance_report(
        "2 Hurwitz vs eigenvalue agreement", ok,
        f"{samples} samples, {disagreements} disagreements, worst coefficient rel err={worst_rel:.2e} (<= 1e-8)",
    )
    assert ok


def test_criterion_3_collinearity_bifurcation(reference, tmp_path, acceptance_report):
    p1, p2 = reference.positions[:2]

    def oracle_sin(target):
        t1 = math.atan2(target[1] - p1[1], target[0] - p1[0])
        t2 = math.atan2(target[1] - p2[1], target[0] - p2[0])
        return abs(math.sin(t1 - t2))

    offsets = np.concatenate([-np.logspace(-10, -2, 40), [0.0], np.logspace(-10, -2, 40)])
    angles = np.concatenate([offsets, math.pi + offsets, np.linspace(0.1, math.pi - 0.1, 15)])
    mismatches = 0
    seen = set()
    for a in angles:
        cell = cli.apply_parameter(reference, "target-angle", float(a))
        s = oracle_sin(cell.target)
        if abs(s - 1e-6) < 1e-12:
            continue
        loc = certify(cell).localizable
        seen.add(loc)
        mismatches += loc != (s > 1e-6)
    flips = seen == {True, False}

    # engine runs through the collinear configurations (target on the SA line)
    retained = []
    rows = cli.run_sweep(reference.replace(t_final=T_FINAL), "target-angle", [0.0, math.pi / 2, math.pi], tmp_path)
    for a in (0.0, math.pi):
        cell = cli.apply_parameter(reference.replace(t_final=T_FINAL), "target-angle", a)
        z = bearing(p1, cell.target)
        assert abs(abs(bearing(p2, cell.target) @ z) - 1.0) < 1e-15
        err0 = cell.target - initial_state(cell).estimates
        err_t = cell.target - run(cell).final_state.estimates
        for i in range(2):
            retained.append(abs(err_t[i] @ z) / abs(err0[i] @ z))
    statuses = [r["status"] for r in rows]
    ok = (mismatches == 0 and flips and min(retained) >= 0.1
          and statuses == ["not-converged", "converged", "not-converged"])
    acceptance_report(
        "3 collinearity bifurcation", ok,
        f"{mismatches} localizable mismatches at |sin|=1e-6 boundary, flip observed={flips}, "
        f"min retained along-bearing error fraction={min(retained):.3f} (>= 0.1), sweep={statuses}",
    )
    assert ok


def test_criterion_4_fusion_reduction(acceptance_report):
    graphs = 0
    mismatches = 0
    passing = 0
    min_eig = math.inf
    for m in range(1, 7):
        for seed in range(40):
            rng = np.random.default_rng([4, m, seed])
            adj = (rng.random((m, m)) < rng.uniform(0.2, 0.7)) * rng.uniform(0.05, 3.0, (m, m))
            np.fill_diagonal(adj, 0)
            b_f = (rng.random(m) < rng.uniform(0.1, 0.6)) * rng.uniform(0.05, 3.0, m)
            reduced = ReducedGraph(laplacian=laplacian(adj), b_f=b_f, b_e=np.zeros(m))
            graphs += 1
            mismatches += fusion_spanning_tree_check(reduced) != closure_oracle(b_f, adj)
            if nsa_convergence_check(reduced):
                passing += 1
                min_eig = min(min_eig, eigen_real_parts(laplacian(adj) + np.diag(b_f))[0])
    ok = graphs >= 100 and mismatches == 0 and passing > 0 and min_eig > 1e-10
    acceptance_report(
        "4 fusion-node machinery", ok,
        f"{graphs} digraphs, {mismatches} closure mismatches, {passing} passing checks, "
        f"min Re eig(L + diag(b_f)) over passing={min_eig:.3g} (> 1e-10)",
    )
    assert ok


def test_criterion_5_structural_invariants(reference, acceptance_report):
    rng = np.random.default_rng(5)
    proj_err = 0.0
    for phi in rng.uniform(0, 2 * math.pi, 1000):
        u = heading_from_angle(phi)
        m = projection_matrix(u)
        proj_err = max(proj_err, np.abs(m @ m - m).max(), np.abs(m @ u).max())

    state = initial_state(reference)
    norm_err = 0.0
    for _ in range(reference.n_steps):
        state = step(state, reference)
        norm_err = max(norm_err, np.abs(np.linalg.norm(state.headings, axis=1) - 1).max())

    p = reference.positions
    q = np.tile(reference.target, (reference.n, 1))
    h = np.array([bearing(p[i], reference.target) for i in range(reference.n)])
    fixed = max(np.abs(estimate_derivatives(q, p, reference.target, reference.topology)).max(),
                np.abs(heading_derivatives(h, q, p)).max())

    a, b = run(reference), run(reference)
    deterministic = all(np.array_equal(getattr(a, f), getattr(b, f)) for f in ("times", "est_err", "point_err"))
    deterministic = deterministic and np.array_equal(a.final_state.flat(), b.final_state.flat())

    ref = run(reference.replace(dt=0.00625, integrator="rk4")).final_state.flat()
    e1 = np.linalg.norm(run(reference.replace(dt=0.1)).final_state.flat() - ref)
    e2 = np.linalg.norm(run(reference.replace(dt=0.05)).final_state.flat() - ref)
    ratio = e1 / e2

    ok = (proj_err <= 1e-12 and norm_err <= 1e-9 and fixed < 1e-12 and deterministic
          and 2 * 0.8 <= ratio <= 2 * 1.2)
    acceptance_report(
        "5 structural invariants", ok,
        f"projection err={proj_err:.1e}, heading norm err={norm_err:.1e}, fixed-point deriv={fixed:.1e}, "
        f"deterministic={deterministic}, Euler error ratio dt/2={ratio:.3f} (2 +/- 20%)",
    )
    assert ok


def test_criterion_6_pointing_over_seeds(reference, acceptance_report):
    worst = 0.0
    failures = []
    for seed in range(50):
        trace = run(reference.replace(seed=seed))
        final = trace.final_max_point_err
        worst = max(worst, final)
        if final >= 1e-3 or trace.converged_at is None:
            failures.append(seed)

    # exactly antipodal start for every agent, relies on the 1e-6 rad rule
    agents = []
    for agent in reference.agents:
        z = bearing(agent.position, reference.target)
        agents.append(dataclasses.replace(agent, initial_heading=math.atan2(-z[1], -z[0])))
    anti = run(reference.replace(agents=tuple(agents)))
    anti_ok = anti.final_max_point_err < 1e-3

    ok = not failures and anti_ok
    acceptance_report(
        "6 pointing consensus over 50 seeds", ok,
        f"failures={failures}, worst final pointing err={worst:.3g} rad, "
        f"antipodal start final err={anti.final_max_point_err:.3g} rad",
    )
    assert ok
