"""Conflict graphs over links, greedy coloring, local-ratio MWIS and exact oracles.

Two links i, j with l_i >= l_j are (gamma, delta)-independent when
``d(i, j) > gamma * l_i**delta * l_j**(1 - delta)``; delta = 0 gives plain
gamma-independence.  The conflict graph joins every non-independent pair.

Vertices are kept in the *coloring order*: non-increasing length, ties by
ascending id.  Its reverse (shortest first) is the elimination order in which
each vertex's later neighbours, the longer links around it, are expected to be
coverable by a constant number of cliques.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import Instance, InstanceError, _check_id, gap_matrix, lengths

BLOCK = 512


class GraphTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ConflictParams:
    gamma: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


@dataclass
class ConflictGraph:
    n: int
    adj: list[set[int]]
    order: list[int]
    params: ConflictParams | None = None

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], order: Sequence[int] | None = None):
        adj = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise ValueError("self loops are not allowed")
            adj[u].add(v)
            adj[v].add(u)
        return cls(n, adj, list(range(n)) if order is None else list(order))

    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u in range(self.n) for v in self.adj[u] if u < v)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj[u]

    def is_independent(self, vertices: Iterable[int]) -> bool:
        vs = list(vertices)
        chosen = set(vs)
        return len(chosen) == len(vs) and all(not (self.adj[v] & chosen) for v in vs)

    def positions(self) -> list[int]:
        pos = [0] * self.n
        for k, v in enumerate(self.order):
            pos[v] = k
        return pos

    def later_neighbours(self, v: int, pos: list[int] | None = None) -> list[int]:
        """Neighbours of v that come after it in the elimination order (the longer links)."""
        pos = self.positions() if pos is None else pos
        return [u for u in self.adj[v] if pos[u] < pos[v]]

    def to_edge_list(self) -> str:
        lines = [str(self.n)] + [f"{u} {v}" for u, v in self.edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> "ConflictGraph":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        n = int(rows[0][0])
        return cls.from_edges(n, ((int(a), int(b)) for a, b in rows[1:]))


def length_order(inst: Instance) -> list[int]:
    ls = lengths(inst)
    return sorted(range(inst.n), key=lambda i: (-ls[i], i))


def independent(inst: Instance, params: ConflictParams, i: int, j: int) -> bool:
    i, j = _check_id(inst, i), _check_id(inst, j)
    if i == j:
        raise InstanceError("independence needs two distinct links")
    ls = lengths(inst)
    lmax, lmin = max(ls[i], ls[j]), min(ls[i], ls[j])
    gap = float(gap_matrix(inst, [i], [j])[0, 0])
    return gap > params.gamma * lmax ** params.delta * lmin ** (1 - params.delta)


def _conflict_block(ls, gaps, rows, params: ConflictParams) -> np.ndarray:
    lr = ls[rows][:, None]
    lmax = np.maximum(lr, ls[None, :])
    lmin = np.minimum(lr, ls[None, :])
    thresh = params.gamma * lmax ** params.delta * lmin ** (1 - params.delta)
    return ~(gaps > thresh)


def build_graph(inst: Instance, params: ConflictParams) -> ConflictGraph:
    """Conflict graph with an edge for every (gamma, delta)-conflicting pair."""
    n = inst.n
    ls = lengths(inst)
    adj: list[set[int]] = [set() for _ in range(n)]
    cols = np.arange(n)
    for start in range(0, n, BLOCK):
        rows = np.arange(start, min(n, start + BLOCK))
        conf = _conflict_block(ls, gap_matrix(inst, rows, cols), rows, params)
        conf[np.arange(len(rows)), rows] = False
        for k, i in enumerate(rows):
            adj[i].update(np.flatnonzero(conf[k]).tolist())
    return ConflictGraph(n, adj, length_order(inst), params)


# --- approximate coloring and MWIS -------------------------------------------------


def greedy_color(graph: ConflictGraph) -> dict[int, int]:
    """Smallest free color per vertex, visiting vertices in the stored order."""
    color: dict[int, int] = {}
    for v in graph.order:
        used = {color[u] for u in graph.adj[v] if u in color}
        c = 0
        while c in used:
            c += 1
        color[v] = c
    return color


def color_classes(coloring: dict[int, int]) -> list[list[int]]:
    k = max(coloring.values(), default=-1) + 1
    classes: list[list[int]] = [[] for _ in range(k)]
    for v in sorted(coloring):
        classes[coloring[v]].append(v)
    return classes


def clique_cover_size(graph: ConflictGraph, vertices: Iterable[int]) -> int:
    """Greedy clique cover: repeatedly peel a maximal clique off the remaining vertices."""
    remaining = sorted(vertices)
    cliques = 0
    while remaining:
        clique = [remaining[0]]
        rest = []
        for u in remaining[1:]:
            if all(u in graph.adj[w] for w in clique):
                clique.append(u)
            else:
                rest.append(u)
        remaining = rest
        cliques += 1
    return cliques


def simpliciality(graph: ConflictGraph) -> int:
    """Measured k: max greedy clique-cover size of later neighbourhoods in elimination order."""
    pos = graph.positions()
    return max((clique_cover_size(graph, graph.later_neighbours(v, pos)) for v in range(graph.n)), default=0)


@dataclass
class MwisResult:
    vertices: list[int]
    weight: float
    k_emp: int = field(default=0)


def mwis(graph: ConflictGraph, weights: Sequence[float]) -> MwisResult:
    """Local-ratio independent set along the elimination order.

    Visiting vertices shortest first, a vertex with positive residual weight is
    stacked and its residual is subtracted from itself and its later (longer)
    neighbours.  Unwinding the stack keeps every vertex with no chosen
    neighbour.  The result is within a factor k_emp of optimal.
    """
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    residual = w.copy()
    pos = graph.positions()
    stack = []
    for v in reversed(graph.order):
        r = residual[v]
        if r <= 0:
            continue
        stack.append(v)
        residual[v] = 0.0
        for u in graph.later_neighbours(v, pos):
            residual[u] -= r
    chosen: set[int] = set()
    while stack:
        v = stack.pop()
        if not (graph.adj[v] & chosen):
            chosen.add(v)
    vs = sorted(chosen)
    return MwisResult(vs, float(w[vs].sum()), simpliciality(graph))


# --- exact oracles -----------------------------------------------------------------


def exact_chromatic(graph: ConflictGraph, limit: int = 20) -> int:
    """Chromatic number by DSATUR branch and bound."""
    n = graph.n
    if n > limit:
        raise GraphTooLarge(f"exact coloring limited to {limit} vertices, got {n}")
    if n == 0:
        return 0
    adj = graph.adj
    greedy = greedy_color(ConflictGraph(n, adj, sorted(range(n), key=lambda v: -len(adj[v]))))
    best = max(greedy.values()) + 1
    clique = _greedy_clique(graph)
    if best == len(clique):
        return best
    colors = [-1] * n
    for c, v in enumerate(clique):
        colors[v] = c
    lower = len(clique)

    def pick() -> int:
        cand, key = -1, (-1, -1)
        for v in range(n):
            if colors[v] < 0:
                sat = len({colors[u] for u in adj[v] if colors[u] >= 0})
                k = (sat, len(adj[v]))
                if k > key:
                    cand, key = v, k
        return cand

    def search(used: int, left: int) -> None:
        nonlocal best
        if used >= best:
            return
        if left == 0:
            best = used
            return
        v = pick()
        forbidden = {colors[u] for u in adj[v]}
        for c in range(used):
            if c not in forbidden:
                colors[v] = c
                search(used, left - 1)
                colors[v] = -1
                if best == lower:
                    return
        if used + 1 < best:
            colors[v] = used
            search(used + 1, left - 1)
            colors[v] = -1

    search(len(clique), n - len(clique))
    return best


def _greedy_clique(graph: ConflictGraph) -> list[int]:
    best: list[int] = []
    for start in range(graph.n):
        clique = [start]
        for u in sorted(graph.adj[start], key=lambda u: -len(graph.adj[u])):
            if all(u in graph.adj[w] for w in clique):
                clique.append(u)
        if len(clique) > len(best):
            best = clique
    return best


def exact_mwis(graph: ConflictGraph, weights: Sequence[float], limit: int = 25) -> MwisResult:
    """Maximum weight independent set by branch and bound over bitmasks."""
    n = graph.n
    if n > limit:
        raise GraphTooLarge(f"exact MWIS limited to {limit} vertices, got {n}")
    w = [float(x) for x in weights]
    nbr = [sum(1 << u for u in graph.adj[v]) for v in range(n)]
    best_w, best_set = 0.0, 0

    def total(mask: int) -> float:
        s = 0.0
        while mask:
            low = mask & -mask
            s += w[low.bit_length() - 1]
            mask ^= low
        return s

    def search(cand: int, chosen: int, acc: float) -> None:
        nonlocal best_w, best_set
        if acc > best_w:
            best_w, best_set = acc, chosen
        if not cand or acc + total(cand) <= best_w:
            return
        # branch on the candidate with the most candidate neighbours
        v = max((u for u in range(n) if cand >> u & 1), key=lambda u: (bin(nbr[u] & cand).count("1"), w[u]))
        search(cand & ~nbr[v] & ~(1 << v), chosen | (1 << v), acc + w[v])
        search(cand & ~(1 << v), chosen, acc)

    search((1 << n) - 1, 0, 0.0)
    vs = [v for v in range(n) if best_set >> v & 1]
    return MwisResult(vs, float(sum(w[v] for v in vs)))


# --- iterated root --------------------------------------------------------------------


def f_star(delta: float, x: float) -> int:
    """Number of applications of y -> y**delta needed to bring x down to 2 (1 if x <= 2)."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if x <= 2:
        return 1
    lg = math.log2(x)  # y <= 2  <=>  log2 y <= 1
    count = 0
    while lg > 1:
        lg *= delta
        count += 1
    return count
