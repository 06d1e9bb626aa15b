"""Explicit balls, rooted isomorphism and the local agreement radius."""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List

import numpy as np

from ._validation import check_int
from .errors import BallSizeError, IsomorphismUndecided
from .graphs import ImplicitGraph, edge_key
from .rng import edge_hash
from .words import Word

DEFAULT_MAX_VERTICES = 2_000_000
ISOMORPHISM_STEP_LIMIT = 10_000_000


@dataclass(eq=False)
class Ball:
    """The induced subgraph on ``B(root, radius)``, vertices in BFS order.

    ``nbr[i, s]`` is the ball index reached from vertex ``i`` through slot
    ``s`` (``-1`` when it leaves the ball). ``edges`` lists each undirected
    non-loop edge once as ``(i, j, slot_at_i)``; parallel edges appear once per
    slot pair.
    """

    graph: ImplicitGraph
    root: Word
    radius: int
    keys: List[Word]
    index: Dict[Word, int]
    level: np.ndarray
    nbr: np.ndarray
    edges: np.ndarray
    edge_keys: List[bytes] = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.keys)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def sphere(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.level == j)

    @cached_property
    def level_sizes(self) -> List[int]:
        return np.bincount(self.level, minlength=self.radius + 1).tolist()

    @cached_property
    def edge_hashes(self) -> np.ndarray:
        return np.array([edge_hash(k) for k in self.edge_keys], dtype=np.uint64)

    @cached_property
    def csr(self):
        """(indptr, neighbor, edge id) adjacency over ``edges`` for the kernels."""
        n = self.n_vertices
        m = self.n_edges
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]]) if m else np.zeros(0, np.int64)
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]]) if m else np.zeros(0, np.int64)
        eid = np.concatenate([np.arange(m), np.arange(m)]) if m else np.zeros(0, np.int64)
        order = np.lexsort((eid, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return indptr, dst[order].astype(np.int64), eid[order].astype(np.int64)

    def multi_adjacency(self) -> List[Counter]:
        """Per-vertex Counter of in-ball neighbors, self-loops included (by slot count)."""
        out = []
        for row in self.nbr:
            out.append(Counter(int(j) for j in row if j >= 0))
        return out

    def level_table(self) -> List[dict]:
        within = np.zeros(self.radius + 1, dtype=np.int64)
        down = np.zeros(self.radius + 1, dtype=np.int64)
        for i, j, _ in self.edges:
            li, lj = self.level[i], self.level[j]
            if li == lj:
                within[li] += 1
            else:
                down[max(li, lj)] += 1
        return [
            {"level": j, "vertices": self.level_sizes[j], "edges_within": int(within[j]), "edges_down": int(down[j])}
            for j in range(self.radius + 1)
        ]


def bfs_ball(graph: ImplicitGraph, root: Word, radius: int, *, max_vertices: int = DEFAULT_MAX_VERTICES) -> Ball:
    """Breadth-first construction of ``B(root, radius)`` with exact levels."""
    radius = check_int(radius, "radius", minimum=0)
    keys: List[Word] = [root]
    index = {root: 0}
    levels = [0]
    frontier = [root]
    for lev in range(1, radius + 1):
        nxt = []
        for v in frontier:
            for u in graph.neighbors(v):
                if u not in index:
                    index[u] = len(keys)
                    keys.append(u)
                    levels.append(lev)
                    nxt.append(u)
                    if len(keys) > max_vertices:
                        raise BallSizeError(
                            f"ball of radius {radius} exceeds {max_vertices} vertices (at level {lev})"
                        )
        frontier = nxt
    n = len(keys)
    d = graph.degree
    nbr = np.full((n, d), -1, dtype=np.int64)
    edge_list = []
    ekeys = []
    loops = 0
    for i, v in enumerate(keys):
        for s, u in enumerate(graph.neighbors(v)):
            j = index.get(u, -1)
            nbr[i, s] = j
            if j < 0:
                continue
            if j == i:
                loops += 1
                continue
            rs = graph.reverse_slot(s)
            if (i, s) < (j, rs):
                edge_list.append((i, j, s))
                ekeys.append(edge_key(graph, v, s, u))
    if loops:
        warnings.warn(f"{loops} self-loop slots excluded from the edge set", stacklevel=2)
    edges = np.array(edge_list, dtype=np.int64).reshape(-1, 3)
    return Ball(graph, root, radius, keys, index, np.array(levels, dtype=np.int64), nbr, edges, ekeys)


def _fingerprint(ball: Ball):
    return tuple((row["vertices"], row["edges_within"], row["edges_down"]) for row in ball.level_table())


def _refine(balls):
    """Joint colour refinement on the disjoint union; returns per-ball colour lists."""
    adjs = [b.multi_adjacency() for b in balls]
    colors = []
    for b, adj in zip(balls, adjs):
        colors.append([(int(b.level[i]), adj[i].get(i, 0), sum(adj[i].values())) for i in range(b.n_vertices)])
    palette = {c: k for k, c in enumerate(sorted(set(c for cs in colors for c in cs)))}
    colors = [[palette[c] for c in cs] for cs in colors]
    n_classes = len(palette)
    while True:
        sigs = []
        for cs, adj in zip(colors, adjs):
            sigs.append(
                [
                    (cs[i], tuple(sorted((cs[j], m) for j, m in adj[i].items() if j != i)))
                    for i in range(len(cs))
                ]
            )
        palette = {s: k for k, s in enumerate(sorted(set(s for ss in sigs for s in ss)))}
        colors = [[palette[s] for s in ss] for ss in sigs]
        if len(palette) == n_classes:
            return colors, adjs
        n_classes = len(palette)


def rooted_isomorphic(b1: Ball, b2: Ball, *, fast_path: bool = True, step_limit: int = ISOMORPHISM_STEP_LIMIT) -> bool:
    """Decide whether a root-preserving isomorphism ``b1 -> b2`` exists.

    Colour refinement seeded by (level, loop count, degree) prunes candidates;
    a depth-first search in BFS order of ``b1`` then extends a partial map one
    vertex at a time. Raises :class:`IsomorphismUndecided` after ``step_limit``
    candidate trials.
    """
    if b1.radius != b2.radius:
        raise ValueError("rooted isomorphism is only compared at equal radii")
    if fast_path and _fingerprint(b1) != _fingerprint(b2):
        return False
    if b1.n_vertices != b2.n_vertices:
        return False
    (c1, c2), (adj1, adj2) = _refine([b1, b2])
    if Counter(c1) != Counter(c2) or c1[0] != c2[0]:
        return False
    n = b1.n_vertices
    by_color: Dict[int, List[int]] = {}
    for j, c in enumerate(c2):
        by_color.setdefault(c, []).append(j)
    order = list(range(n))  # BFS order already
    fwd = [-1] * n
    used = [False] * n
    steps = 0

    def consistent(v, w):
        # Every mapped neighbour of v must map to a neighbour of w with equal multiplicity,
        # and w must have no extra mapped neighbours.
        mapped = 0
        for x, m in adj1[v].items():
            if x == v:
                continue
            fx = fwd[x]
            if fx >= 0:
                if adj2[w].get(fx, 0) != m:
                    return False
                mapped += 1
        count = sum(1 for y in adj2[w] if y != w and used[y])
        return count == mapped

    def candidates(v):
        for x in adj1[v]:
            if x != v and fwd[x] >= 0:
                return [y for y in adj2[fwd[x]] if y != fwd[x] and not used[y] and c2[y] == c1[v]]
        return [y for y in by_color[c1[v]] if not used[y]]

    fwd[0], used[0] = 0, True
    its = [None] * n
    pos = 1
    while pos < n:
        v = order[pos]
        if its[pos] is None:
            its[pos] = iter(candidates(v))
        for w in its[pos]:
            steps += 1
            if steps > step_limit:
                raise IsomorphismUndecided(f"no verdict after {step_limit} steps")
            if consistent(v, w):
                fwd[v], used[w] = w, True
                break
        else:
            its[pos] = None
            pos -= 1
            if pos == 0:
                return False
            u = order[pos]
            used[fwd[u]] = False
            fwd[u] = -1
            continue
        pos += 1
    return True


def local_radius(g1: ImplicitGraph, g2: ImplicitGraph, r_max: int, *, max_vertices: int = DEFAULT_MAX_VERTICES) -> int:
    """Largest ``r <= r_max`` with ``B_{g1}(root, r)`` rooted-isomorphic to ``B_{g2}(root, r)``.

    A return value equal to ``r_max`` is only a lower bound on the true radius.
    """
    r_max = check_int(r_max, "r_max", minimum=0)
    last = -1
    for r in range(r_max + 1):
        b1 = bfs_ball(g1, g1.root, r, max_vertices=max_vertices)
        b2 = bfs_ball(g2, g2.root, r, max_vertices=max_vertices)
        if not rooted_isomorphic(b1, b2):
            return last
        last = r
    return last
