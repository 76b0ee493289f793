"""Graph containers and normalized-Laplacian constructions.

Undirected simple graphs, 0-based node ids. The pipeline convention is: add a
self-loop to every node, then form the degree-normalized adjacency
A_hat = D^{-1/2} A D^{-1/2} and Laplacian L_hat = I - A_hat. With self-loops
present every degree is >= 1 and the spectrum of L_hat lies in [0, 2).

The normalized incidence B_hat has one row per non-self-loop edge (u, v):
+1/sqrt(d_u) at u, -1/sqrt(d_v) at v, so that B_hat^T B_hat == L_hat exactly
(the self-loop contributes only to degrees, not rows).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import EmptyGraph, NonPositiveLambda, ParseError


@dataclass(frozen=True)
class GraphData:
    """An edge set in canonical form.

    edges is an (m, 2) int64 array with u < v per row, rows unique and
    lexicographically sorted. Self-loop edges are never stored; the
    `self_loops` flag records that every node carries an implicit one.
    """

    n: int
    edges: np.ndarray
    self_loops: bool = False

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])


def graph_from_edges(edges, n: int | None = None) -> GraphData:
    """Canonicalize an iterable of (u, v) pairs into a GraphData.

    Self-loop pairs are dropped, duplicates (in either orientation) collapse
    to one edge. n defaults to max node id + 1.
    """
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ParseError("edge array must have shape (m, 2)")
    if arr.size and arr.min() < 0:
        raise ParseError("negative node id")
    keep = arr[:, 0] != arr[:, 1]
    arr = arr[keep]
    lo = arr.min(axis=1)
    hi = arr.max(axis=1)
    arr = np.unique(np.stack([lo, hi], axis=1), axis=0)
    n_seen = int(arr.max()) + 1 if arr.size else 0
    if n is None:
        n = n_seen
    elif n < n_seen:
        raise ParseError(f"n={n} smaller than max node id {n_seen - 1}")
    return GraphData(n=int(n), edges=arr)


def load_edge_list(path, n_hint: int | None = None) -> GraphData:
    """Parse a whitespace-separated edge list file.

    One "u v" pair per line; '#' starts a comment; blank lines skipped.
    Self-loop lines are dropped (re-added later via add_self_loops).
    Raises ParseError with a 1-based line number on malformed input and
    EmptyGraph when no valid line remains.
    """
    pairs = []
    saw_valid = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'u v', got {text!r}", line=lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer node id in {text!r}", line=lineno) from None
            if u < 0 or v < 0:
                raise ParseError(f"negative node id in {text!r}", line=lineno)
            saw_valid = True
            if u != v:
                pairs.append((u, v))
    if not saw_valid:
        raise EmptyGraph(f"no edges in {path}")
    if pairs:
        g = graph_from_edges(pairs, n=None)
    else:
        g = GraphData(n=0, edges=np.zeros((0, 2), dtype=np.int64))
    if n_hint is not None:
        if n_hint < g.n:
            raise ParseError(f"n_hint={n_hint} smaller than max node id {g.n - 1}")
        g = replace(g, n=int(n_hint))
    return g


def add_self_loops(g: GraphData) -> GraphData:
    """Mark every node as carrying a self-loop. Idempotent."""
    if g.self_loops:
        return g
    return replace(g, self_loops=True)


def degrees(g: GraphData) -> np.ndarray:
    """Node degrees, counting the self-loop once when present."""
    deg = np.zeros(g.n, dtype=np.int64)
    if g.m:
        np.add.at(deg, g.edges[:, 0], 1)
        np.add.at(deg, g.edges[:, 1], 1)
    if g.self_loops:
        deg += 1
    return deg


def normalized_adjacency(g: GraphData) -> sp.csr_matrix:
    """A_hat = D^{-1/2} A D^{-1/2}, including self-loop entries on the diagonal.

    Isolated nodes without self-loops get an all-zero row (0/0 treated as 0).
    """
    deg = degrees(g).astype(np.float64)
    inv_sqrt = np.zeros(g.n)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    rows = []
    cols = []
    vals = []
    if g.m:
        u, v = g.edges[:, 0], g.edges[:, 1]
        w = inv_sqrt[u] * inv_sqrt[v]
        rows.append(u)
        cols.append(v)
        vals.append(w)
        rows.append(v)
        cols.append(u)
        vals.append(w)
    if g.self_loops:
        idx = np.arange(g.n)
        rows.append(idx)
        cols.append(idx)
        vals.append(inv_sqrt**2)
    if not rows:
        return sp.csr_matrix((g.n, g.n))
    data = np.concatenate(vals)
    ij = (np.concatenate(rows), np.concatenate(cols))
    return sp.csr_matrix((data, ij), shape=(g.n, g.n))


def normalized_laplacian(g: GraphData) -> sp.csr_matrix:
    """L_hat = I - A_hat. PSD; eigenvalues in [0, 2), strictly below 2 when
    self-loops are present (they break bipartiteness)."""
    lap = (sp.identity(g.n, format="csr") - normalized_adjacency(g)).tocsr()
    lap.sum_duplicates()
    return lap


def normalized_incidence(g: GraphData) -> sp.csr_matrix:
    """Signed incidence of the non-self-loop edges, degree-normalized.

    Row i for edge (u, v): +1/sqrt(d_u) at u, -1/sqrt(d_v) at v.
    Satisfies B_hat^T B_hat == L_hat (self-loop rows would be all-zero and are
    omitted).
    """
    deg = degrees(g).astype(np.float64)
    inv_sqrt = np.zeros(g.n)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    m = g.m
    if m == 0:
        return sp.csr_matrix((0, g.n))
    u, v = g.edges[:, 0], g.edges[:, 1]
    rows = np.repeat(np.arange(m), 2)
    cols = np.stack([u, v], axis=1).ravel()
    vals = np.stack([inv_sqrt[u], -inv_sqrt[v]], axis=1).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, g.n))


def regularized_operator(lap: sp.spmatrix, lam: float) -> sp.csr_matrix:
    """H = I + lam * L_hat for lam > 0.

    Symmetric positive definite with sigma_min >= 1 and
    sigma_max <= 1 + lam * lambda_max(L_hat) < 1 + 2 lam.
    """
    if not lam > 0:
        raise NonPositiveLambda(f"lam must be > 0, got {lam}")
    n = lap.shape[0]
    out = (sp.identity(n, format="csr") + lam * lap.tocsr()).tocsr()
    out.sum_duplicates()
    return out


def sdd_row_margin(mat: sp.spmatrix, scale: np.ndarray | None = None) -> float:
    """min over rows of (diagonal - sum of |off-diagonal|).

    Nonnegative means the matrix is (weakly) diagonally dominant. With
    `scale` = sqrt(degrees), the margin is evaluated for diag(s) M diag(s);
    for H = I + lam L_hat that scaled matrix is D + lam(D - A), which is
    strictly dominant by construction even when H itself is not.
    """
    m = sp.csr_matrix(mat, copy=True)
    if scale is not None:
        d = sp.diags(np.asarray(scale, dtype=np.float64))
        m = (d @ m @ d).tocsr()
    diag = m.diagonal()
    absrow = np.abs(m).sum(axis=1).A1
    return float(np.min(diag - (absrow - np.abs(diag)))) if m.shape[0] else 0.0


def is_sdd(mat: sp.spmatrix, tol: float = 0.0, scale: np.ndarray | None = None) -> bool:
    """Row-wise diagonal dominance check (optionally after diagonal scaling)."""
    return sdd_row_margin(mat, scale=scale) >= -abs(tol)
