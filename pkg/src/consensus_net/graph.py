"""Weighted directed interconnection graphs and their Laplacian matrices.

The convention throughout: ``weights[i, j] > 0`` means agent ``i`` listens to
agent ``j`` (information flows j -> i).  The Laplacian has ``L[i, j] = -w_ij``
off the diagonal and row sums equal to zero, so the all-ones vector is always
a right null vector.  When the transmit-direction graph contains a rooted
spanning tree, the zero eigenvalue is simple, the rest of the spectrum lies in
the open right half plane, and a nonnegative left null vector exists; that
vector (normalized to sum 1) defines the weighted average the network agrees
on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, ValidationError

#: second-smallest |eigenvalue| below this means the zero eigenvalue is
#: numerically non-simple
_SIMPLE_ZERO_TOL = 1e-8

#: tolerance on the left-eigenvector residual ||v^T L||_inf
_LEFT_RESIDUAL_TOL = 1e-10


def _freeze(arr):
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DirectedGraph:
    """Weighted digraph on ``n`` agents.

    ``weights[i, j]`` is the coupling from agent j into agent i; all entries
    are nonnegative and the diagonal is zero (no self connections).
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValidationError(f"weights: expected a square matrix, got shape {w.shape}")
        if w.shape[0] < 1:
            raise ValidationError("weights: need at least one agent")
        if not np.all(np.isfinite(w)):
            i, j = np.argwhere(~np.isfinite(w))[0]
            raise ValidationError(f"weights[{i},{j}]: non-finite entry")
        neg = np.argwhere(w < 0)
        if neg.size:
            i, j = neg[0]
            raise ValidationError(f"weights[{i},{j}]: negative weight {w[i, j]}")
        nz_diag = np.argwhere(np.diag(w) != 0)
        if nz_diag.size:
            i = int(nz_diag[0][0])
            raise ValidationError(f"weights[{i},{i}]: self connections are not allowed")
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def n_agents(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges) -> "DirectedGraph":
        """Build from ``(sender, receiver, weight)`` triples with 0-based ids."""
        w = np.zeros((n, n))
        for j, i, wij in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"edge ({j}->{i}): agent id out of range for n={n}")
            w[i, j] = wij
        return cls(w)


@dataclass(frozen=True)
class LaplacianData:
    """Laplacian of a directed graph plus the spectral facts used downstream.

    ``v_left`` is None when the graph has no spanning tree (the left null
    space is then not one-dimensional).  ``lambda_L`` bounds the spectral
    norm of L (tight: it equals it).
    """

    L: np.ndarray
    has_spanning_tree: bool
    v_left: np.ndarray | None
    lambda_L: float
    nonzero_eigenvalue_real_parts_positive: bool

    def __post_init__(self):
        object.__setattr__(self, "L", _freeze(self.L))
        if self.v_left is not None:
            object.__setattr__(self, "v_left", _freeze(self.v_left))

    @property
    def n_agents(self) -> int:
        return self.L.shape[0]


def build_laplacian(g: DirectedGraph) -> LaplacianData:
    """Assemble L from the weights and record its relevant spectral facts.

    Row i has diagonal entry sum_k w_ik and off-diagonal entries -w_ij, so
    L @ ones == 0 holds by construction.  The spanning-tree flag, the left
    eigenvector of the zero eigenvalue and the spectral-norm bound are
    computed here once and carried along with the matrix.
    """
    w = g.weights
    L = np.diag(w.sum(axis=1)) - w
    tree = has_spanning_tree(g)
    v = left_eigenvector(L) if tree else None
    lam_L = float(np.linalg.norm(L, 2))
    if tree and L.shape[0] > 1:
        # all eigenvalues except the (simple) zero one must sit strictly in
        # the right half plane
        re_parts = np.sort(np.linalg.eigvals(L).real)
        rhp = bool(re_parts[1] > 0)
    else:
        rhp = tree
    return LaplacianData(
        L=L,
        has_spanning_tree=tree,
        v_left=v,
        lambda_L=lam_L,
        nonzero_eigenvalue_real_parts_positive=rhp,
    )


def has_spanning_tree(g: DirectedGraph) -> bool:
    """True iff some root agent reaches every agent along transmit direction.

    Transmit direction: j -> i exists when weights[i, j] > 0.  Checked by
    breadth-first search from each candidate root.
    """
    n = g.n_agents
    adj = g.weights > 0  # adj[i, j]: j transmits to i
    for root in range(n):
        seen = np.zeros(n, dtype=bool)
        seen[root] = True
        frontier = [root]
        while frontier:
            j = frontier.pop()
            for i in np.flatnonzero(adj[:, j]):
                if not seen[i]:
                    seen[i] = True
                    frontier.append(int(i))
        if seen.all():
            return True
    return False


def left_eigenvector(L: np.ndarray) -> np.ndarray:
    """Nonnegative left null vector of L, normalized so its entries sum to 1.

    Computed from the null space of L^T via SVD (rank-revealing, robust for
    the exactly known zero eigenvalue).  Raises DegenerateSpectrumError when
    the zero eigenvalue is numerically non-simple.  Entries may be exactly
    zero when the graph is not strongly connected; tiny negative entries
    (>= -1e-12) are clamped to zero.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if n == 1:
        return np.array([1.0])
    eigs = np.sort(np.abs(np.linalg.eigvals(L)))
    if eigs[1] < _SIMPLE_ZERO_TOL:
        raise DegenerateSpectrumError(
            f"zero eigenvalue of L is not simple: second-smallest |eig| = {eigs[1]:.3e}"
        )
    _, _, vt = np.linalg.svd(L.T)
    v = vt[-1]
    s = v.sum()
    if abs(s) < 1e-12:
        raise DegenerateSpectrumError("left null vector has zero sum; cannot normalize")
    v = v / s
    if np.any(v < -1e-12):
        raise DegenerateSpectrumError(
            f"left eigenvector has a significantly negative entry: min = {v.min():.3e}"
        )
    v = np.where(v < 0, 0.0, v)
    v = v / v.sum()
    residual = float(np.abs(v @ L).max())
    if residual > _LEFT_RESIDUAL_TOL:
        raise DegenerateSpectrumError(f"left eigenvector residual too large: {residual:.3e}")
    return v


def graph_to_json(g: DirectedGraph) -> dict:
    """Serialize as ``{"n": ..., "edges": [{"from": j, "to": i, "w": ...}]}``.

    Agent indices are 1-based in the document.
    """
    edges = []
    for i in range(g.n_agents):
        for j in range(g.n_agents):
            if g.weights[i, j] != 0:
                edges.append({"from": j + 1, "to": i + 1, "w": float(g.weights[i, j])})
    return {"n": g.n_agents, "edges": edges}


def graph_from_json(doc: dict) -> DirectedGraph:
    """Parse the JSON object form; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ValidationError("graph: expected a JSON object")
    try:
        n = int(doc["n"])
    except (KeyError, TypeError, ValueError):
        raise ValidationError("n: missing or not an integer") from None
    if n < 1:
        raise ValidationError(f"n: must be >= 1, got {n}")
    edges = doc.get("edges", [])
    if not isinstance(edges, list):
        raise ValidationError("edges: expected a list")
    w = np.zeros((n, n))
    for k, e in enumerate(edges):
        if not isinstance(e, dict):
            raise ValidationError(f"edges[{k}]: expected an object")
        try:
            j = int(e["from"])
            i = int(e["to"])
            wij = float(e["w"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"edges[{k}]: needs integer 'from', 'to' and numeric 'w'") from None
        if not (1 <= i <= n):
            raise ValidationError(f"edges[{k}].to: agent index {i} out of range 1..{n}")
        if not (1 <= j <= n):
            raise ValidationError(f"edges[{k}].from: agent index {j} out of range 1..{n}")
        if wij < 0:
            raise ValidationError(f"edges[{k}].w: negative weight {wij}")
        if i == j and wij != 0:
            raise ValidationError(f"edges[{k}]: self connection on agent {i}")
        w[i - 1, j - 1] = wij
    return DirectedGraph(w)
