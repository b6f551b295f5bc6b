"""Layered communication graph and the virtual fusion-node reduction.

Agents are numbered 1..n. Agents 1 and 2 are the sensing agents (SAs); agents
3..n are non-sensing agents (NSAs). NSA-local matrices are indexed 0..n-3, so
NSA agent ``i`` sits at row ``i - 3``.

Edge convention: ``adjacency[i, j] > 0`` means NSA ``i`` *receives* from NSA
``j``. Likewise ``sa_input[i, 0]`` and ``sa_input[i, 1]`` are the weights with
which NSA ``i`` receives from SA 1 and SA 2.
"""
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InputError


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Topology:
    n: int
    k12: float
    k21: float
    nsa_adjacency: np.ndarray
    sa_input: np.ndarray

    def __post_init__(self):
        if self.n < 3:
            raise InputError(f"need at least 3 agents, got n={self.n}")
        if not (self.k12 > 0 and self.k21 > 0):
            raise InputError(f"SA gains must be positive, got k12={self.k12}, k21={self.k21}")
        m = self.n - 2
        adj = np.asarray(self.nsa_adjacency, dtype=float)
        if adj.shape != (m, m):
            raise InputError(f"nsa_adjacency must be {m}x{m}, got {adj.shape}")
        sa = np.asarray(self.sa_input, dtype=float)
        if sa.shape != (m, 2):
            raise InputError(f"sa_input must be {m}x2, got {sa.shape}")
        _check_adjacency(adj)
        if not np.all(np.isfinite(sa)) or np.any(sa < 0):
            raise InputError("sa_input weights must be finite and nonnegative")
        object.__setattr__(self, "nsa_adjacency", _frozen(adj))
        object.__setattr__(self, "sa_input", _frozen(sa))

    @property
    def n_nsa(self):
        return self.n - 2


@dataclass(frozen=True)
class ReducedGraph:
    """NSA layer seen from the virtual fusion node that merges both SAs."""

    laplacian: np.ndarray
    b_f: np.ndarray
    b_e: np.ndarray

    @property
    def b_f_diag(self):
        return np.diag(self.b_f)

    @property
    def adjacency(self):
        # L = D - A, so the off-diagonal part recovers A exactly
        adj = -np.array(self.laplacian)
        np.fill_diagonal(adj, 0.0)
        return adj + 0.0


@dataclass(frozen=True)
class ConnectivityReport:
    exists_positive_bf: bool
    spanning_tree: bool
    reason: str = ""

    @property
    def satisfied(self):
        return self.exists_positive_bf and self.spanning_tree


def _check_adjacency(adj):
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise InputError(f"adjacency must be square, got shape {adj.shape}")
    if not np.all(np.isfinite(adj)):
        raise InputError("adjacency has non-finite entries")
    if np.any(adj < 0):
        raise InputError("adjacency weights must be nonnegative")
    if np.any(np.diag(adj) != 0):
        raise InputError("adjacency must have a zero diagonal")


def laplacian(adjacency):
    """``L = D - A`` with ``D`` the diagonal of row sums of ``A``."""
    adj = np.asarray(adjacency, dtype=float)
    _check_adjacency(adj)
    lap = -adj
    np.fill_diagonal(lap, adj.sum(axis=1))
    return lap + 0.0  # drop negative zeros


def fusion_reduce(topology):
    b_f = topology.sa_input[:, 0] + topology.sa_input[:, 1]
    b_e = topology.sa_input[:, 1].copy()
    return ReducedGraph(
        laplacian=_frozen(laplacian(topology.nsa_adjacency)),
        b_f=_frozen(b_f),
        b_e=_frozen(b_e),
    )


def reachable_from_fusion(reduced):
    """Set of NSA indices (0-based) reachable from the fusion node by BFS."""
    adj = reduced.adjacency
    m = len(reduced.b_f)
    seen = set(int(i) for i in np.flatnonzero(reduced.b_f > 0))
    queue = deque(sorted(seen))
    while queue:
        j = queue.popleft()
        # information flows j -> i whenever i receives from j
        for i in np.flatnonzero(adj[:, j] > 0):
            i = int(i)
            if i not in seen:
                seen.add(i)
                queue.append(i)
    assert all(0 <= i < m for i in seen)
    return seen


def fusion_spanning_tree_check(reduced):
    """True iff every NSA has a directed path from the fusion node."""
    return len(reachable_from_fusion(reduced)) == len(reduced.b_f)


def connectivity_certificate(reduced):
    exists = bool(np.any(reduced.b_f > 0))
    tree = fusion_spanning_tree_check(reduced)
    if not exists:
        reason = "no-sa-link"
    elif not tree:
        unreached = sorted(set(range(len(reduced.b_f))) - reachable_from_fusion(reduced))
        reason = "unreachable-nsa: " + ",".join(str(i + 3) for i in unreached)
    else:
        reason = ""
    return ConnectivityReport(exists_positive_bf=exists, spanning_tree=tree, reason=reason)
