"""Parity-check matrices sampled from a degree-distribution pair.

Sockets are joined by a uniform random permutation; duplicate edges and
4-cycles are then removed by degree-preserving swaps of variable endpoints.
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .degree_dist import (CodeParams, DegreeDistribution, InvalidDistributionError,
                          avg_node_degree, design_rate)

__all__ = ["TannerGraph", "ConstructionFailedError", "InfeasibleDegreeSequenceError",
           "sample_degree_sequence", "build_graph", "write_alist", "read_alist",
           "write_edge_list", "toy_graph", "realized_degree_gap"]

RATE_TOLERANCE = 0.02
SWAP_BUDGET_FACTOR = 100


class ConstructionFailedError(RuntimeError):
    pass


class InfeasibleDegreeSequenceError(ValueError):
    pass


@dataclass
class TannerGraph:
    """Bipartite graph; ``check_neighbors[c]`` is the sorted variable list of row ``c``."""
    n: int
    check_neighbors: list[np.ndarray]
    var_degrees: np.ndarray = field(init=False)
    check_degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        self.check_neighbors = [np.sort(np.asarray(r, dtype=np.int64))
                                for r in self.check_neighbors]
        self.check_degrees = np.array([r.size for r in self.check_neighbors], dtype=np.int64)
        self.var_degrees = np.zeros(self.n, dtype=np.int64)
        for r in self.check_neighbors:
            if r.size and (r[0] < 0 or r[-1] >= self.n):
                raise ValueError("variable index out of range")
            np.add.at(self.var_degrees, r, 1)

    @property
    def m(self) -> int:
        return len(self.check_neighbors)

    @property
    def num_edges(self) -> int:
        return int(self.check_degrees.sum())

    @property
    def rate(self) -> float:
        """Design rate ``1 - m/n`` (ignores possible rank deficiency of H)."""
        return 1.0 - self.m / self.n

    def edges(self) -> np.ndarray:
        """``(E, 2)`` array of ``(check, var)`` pairs in row-major order."""
        if not self.num_edges:
            return np.empty((0, 2), dtype=np.int64)
        checks = np.repeat(np.arange(self.m), self.check_degrees)
        return np.column_stack([checks, np.concatenate(self.check_neighbors)])

    def var_neighbors(self) -> list[np.ndarray]:
        e = self.edges()
        order = np.argsort(e[:, 1], kind="stable")
        return np.split(e[order, 0], np.cumsum(self.var_degrees)[:-1])

    def csr(self) -> sp.csr_matrix:
        e = self.edges()
        return sp.csr_matrix((np.ones(len(e), dtype=np.int64), (e[:, 0], e[:, 1])),
                             shape=(self.m, self.n))

    def to_dense(self) -> np.ndarray:
        return self.csr().toarray().astype(np.uint8)

    def has_duplicate_edges(self) -> bool:
        return any(np.any(np.diff(r) == 0) for r in self.check_neighbors)

    def max_row_overlap(self) -> int:
        """Largest number of variables shared by two distinct checks."""
        h = self.csr()
        h.data[:] = 1
        g = (h @ h.T).tolil()
        g.setdiag(0)
        g = g.tocsr()
        return int(g.max()) if g.nnz else 0

    def is_four_cycle_free(self) -> bool:
        return not self.has_duplicate_edges() and self.max_row_overlap() <= 1

    def avg_var_degree(self) -> float:
        return float(self.var_degrees.mean())

    def avg_check_degree(self) -> float:
        return float(self.check_degrees.mean())

    def syndrome(self, word: np.ndarray) -> np.ndarray:
        return np.array([int(word[r].sum() & 1) for r in self.check_neighbors], dtype=np.uint8)


def toy_graph() -> TannerGraph:
    """Six-bit, three-check example graph used as a hand-check fixture."""
    return TannerGraph(6, [[0, 1, 3], [2, 3], [0, 3, 4]])


def sample_degree_sequence(dist: DegreeDistribution, node_count: int, edge_target: int,
                           seed=0, allow_degree_one: bool = False) -> np.ndarray:
    """Node degrees drawn with probability proportional to ``coeffs[d] / d``.

    The draw is then repaired by unit steps on random nodes, staying within
    the support's degree range, until it sums to ``edge_target``.
    """
    if not dist.is_valid():
        raise InvalidDistributionError("degree sequences need a valid distribution")
    degrees = np.array([d for d, c in dist.coeffs.items() if c > 0
                        and (d >= 2 or allow_degree_one)], dtype=np.int64)
    if degrees.size == 0:
        raise InfeasibleDegreeSequenceError("no admissible degree in the support")
    lo, hi = int(degrees.min()), int(degrees.max())
    if not node_count * lo <= edge_target <= node_count * hi:
        raise InfeasibleDegreeSequenceError(
            f"{edge_target} edges impossible for {node_count} nodes of degree {lo}..{hi}")
    p = np.array([dist.coeffs[d] / d for d in degrees])
    rng = np.random.default_rng(seed)
    seq = rng.choice(degrees, size=node_count, p=p / p.sum())
    diff = edge_target - int(seq.sum())
    while diff != 0:
        step = 1 if diff > 0 else -1
        room = np.flatnonzero(seq < hi) if step > 0 else np.flatnonzero(seq > lo)
        k = min(abs(diff), room.size)
        seq[rng.choice(room, k, replace=False)] += step
        diff -= step * k
    return seq


class _Graph:
    """Mutable adjacency used during cleanup; multiplicities track duplicate edges."""

    def __init__(self, ec: np.ndarray, ev: np.ndarray, n: int, m: int):
        self.ec = ec
        self.ev = ev
        self.check_adj = [Counter() for _ in range(m)]
        self.var_adj = [Counter() for _ in range(n)]
        for c, v in zip(ec.tolist(), ev.tolist()):
            self.check_adj[c][v] += 1
            self.var_adj[v][c] += 1

    def _drop(self, c, v):
        for adj, a, b in ((self.check_adj, c, v), (self.var_adj, v, c)):
            adj[a][b] -= 1
            if not adj[a][b]:
                del adj[a][b]

    def _add(self, c, v):
        self.check_adj[c][v] += 1
        self.var_adj[v][c] += 1

    def bad(self, c: int, v: int) -> bool:
        """Edge ``(c, v)`` is duplicated or lies on a 4-cycle."""
        if self.check_adj[c][v] > 1:
            return True
        checks_v = self.var_adj[v].keys()
        for w in self.check_adj[c]:
            if w == v:
                continue
            for c2 in self.var_adj[w]:
                if c2 != c and c2 in checks_v:
                    return True
        return False

    def try_swap(self, e: int, f: int) -> bool:
        """Exchange the variable endpoints of edges ``e`` and ``f`` if both new edges are clean."""
        ce, ve, cf, vf = self.ec[e], self.ev[e], self.ec[f], self.ev[f]
        if ce == cf or ve == vf:
            return False
        self._drop(ce, ve)
        self._drop(cf, vf)
        self._add(ce, vf)
        self._add(cf, ve)
        if self.bad(ce, vf) or self.bad(cf, ve):
            self._drop(ce, vf)
            self._drop(cf, ve)
            self._add(ce, ve)
            self._add(cf, vf)
            return False
        self.ev[e], self.ev[f] = vf, ve
        return True


def build_graph(lam: DegreeDistribution, rho: DegreeDistribution, code: CodeParams,
                seed=0, swap_budget_factor: int = SWAP_BUDGET_FACTOR,
                allow_degree_one: bool = False) -> TannerGraph:
    """Random Tanner graph with ``n = code.n`` variables realizing the pair.

    ``E = round(n * lam_bar)`` and ``m = round(E / rho_bar)`` with node-average
    degrees. Raises ``ConstructionFailedError`` when duplicate edges or
    4-cycles survive ``swap_budget_factor * E`` swap attempts.
    """
    rate = design_rate(lam, rho)
    if abs(rate - code.rate) > RATE_TOLERANCE * code.rate:
        raise ValueError(f"design rate {rate:.4f} inconsistent with code rate {code.rate:.4f}")
    n = code.n
    n_edges = int(round(n * avg_node_degree(lam)))
    m = int(round(n_edges / avg_node_degree(rho)))
    rng = np.random.default_rng(seed)
    s_var, s_chk, s_perm = rng.spawn(3)
    vdeg = sample_degree_sequence(lam, n, n_edges, s_var, allow_degree_one)
    cdeg = sample_degree_sequence(rho, m, n_edges, s_chk)
    ev = np.repeat(np.arange(n), vdeg)
    ec = np.repeat(np.arange(m), cdeg)
    ev = ev[s_perm.permutation(n_edges)]

    g = _Graph(ec, ev, n, m)
    pending = [e for e in range(n_edges) if g.bad(int(ec[e]), int(ev[e]))]
    budget = swap_budget_factor * n_edges
    attempts = 0
    while pending:
        i = int(s_perm.integers(len(pending)))
        e = pending[i]
        if not g.bad(int(g.ec[e]), int(g.ev[e])):
            pending[i] = pending[-1]
            pending.pop()
            continue
        if attempts >= budget:
            raise ConstructionFailedError(
                f"{len(pending)} edges still on 4-cycles after {attempts} swap attempts")
        attempts += 1
        g.try_swap(e, int(s_perm.integers(n_edges)))
    rows = [[] for _ in range(m)]
    for c, v in zip(g.ec.tolist(), g.ev.tolist()):
        rows[c].append(v)
    return TannerGraph(n, rows)


def write_alist(path, graph: TannerGraph) -> None:
    """Sparse matrix text format: sizes, max degrees, degrees, then 1-based neighbor lists."""
    var_nb = graph.var_neighbors()
    lines = [f"{graph.n} {graph.m}",
             f"{int(graph.var_degrees.max(initial=0))} {int(graph.check_degrees.max(initial=0))}",
             " ".join(map(str, graph.var_degrees)),
             " ".join(map(str, graph.check_degrees))]
    lines += [" ".join(str(c + 1) for c in nb) for nb in var_nb]
    lines += [" ".join(str(v + 1) for v in nb) for nb in graph.check_neighbors]
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_alist(path) -> TannerGraph:
    """Inverse of ``write_alist``; zero padding entries are ignored."""
    with open(path) as f:
        tokens = [int(t) for t in f.read().split()]
    it = iter(tokens)
    n, m = next(it), next(it)
    next(it), next(it)
    vdeg = [next(it) for _ in range(n)]
    cdeg = [next(it) for _ in range(m)]
    # neighbor lists may be zero-padded to the maximum degree
    rest = tokens[4 + n + m:]
    col_total = sum(vdeg)
    nonzero = [t for t in rest if t != 0]
    rows_flat = nonzero[col_total:]
    if len(rows_flat) != sum(cdeg):
        raise ValueError("alist degree counts do not match neighbor lists")
    rows, pos = [], 0
    for d in cdeg:
        rows.append([v - 1 for v in rows_flat[pos:pos + d]])
        pos += d
    graph = TannerGraph(n, rows)
    if list(graph.var_degrees) != vdeg:
        raise ValueError("alist column degrees inconsistent with row lists")
    return graph


def write_edge_list(path, graph: TannerGraph) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("check_index", "var_index"))
        w.writerows(graph.edges().tolist())


def realized_degree_gap(graph: TannerGraph, lam: DegreeDistribution) -> float:
    """Relative deviation of the realized average variable degree from the design."""
    target = avg_node_degree(lam)
    return abs(graph.avg_var_degree() - target) / target if target else math.inf
