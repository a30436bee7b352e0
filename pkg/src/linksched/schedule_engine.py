"""Feasible-schedule machinery and exact MaxWeight solvers.

A schedule is a set of links no two of which interfere; it is represented
as a bitmask over link ids.  The maximal feasible schedules are the
maximal independent sets of the conflict graph.  MaxWeight asks for a
feasible schedule maximizing the weighted sum of active links; ties are
broken deterministically by the lexicographically smallest activation
tuple (M_0, M_1, ..., M_{E-1}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .topology import NetworkGraph

DEFAULT_ENUMERATION_LIMIT = 32


class ScheduleEnumerationError(RuntimeError):
    """Conflict graph too large for explicit maximal-schedule enumeration."""


@dataclass(frozen=True)
class Schedule:
    """A feasible activation set, stored as a bitmask over link ids."""

    mask: int
    n_links: int

    @classmethod
    def from_links(cls, links: Iterable[int], n_links: int) -> "Schedule":
        m = 0
        for l in links:
            if not (0 <= l < n_links):
                raise ValueError(f"link id {l} out of range")
            m |= 1 << l
        return cls(m, n_links)

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(l for l in range(self.n_links) if self.mask >> l & 1)

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(self.mask >> l & 1 for l in range(self.n_links))

    def __contains__(self, link: int) -> bool:
        return bool(self.mask >> link & 1)

    def __len__(self) -> int:
        return bin(self.mask).count("1")


@dataclass(frozen=True)
class ScheduleSet:
    """All maximal feasible schedules, sorted by mask for determinism."""

    schedules: tuple[Schedule, ...]
    n_links: int

    def __iter__(self):
        return iter(self.schedules)

    def __len__(self):
        return len(self.schedules)

    def masks(self) -> list[int]:
        return [s.mask for s in self.schedules]

    def index_of(self, schedule: Schedule | int) -> int:
        mask = schedule.mask if isinstance(schedule, Schedule) else schedule
        for i, s in enumerate(self.schedules):
            if s.mask == mask:
                return i
        raise KeyError(f"schedule {mask:#x} is not maximal")

    def covers(self, schedule: Schedule | int) -> bool:
        """True iff the given feasible set is a subset of some member."""
        mask = schedule.mask if isinstance(schedule, Schedule) else schedule
        return any(mask & ~s.mask == 0 for s in self.schedules)


def _as_mask(schedule, n_links: int) -> int:
    if isinstance(schedule, Schedule):
        return schedule.mask
    if isinstance(schedule, int):
        return schedule
    return Schedule.from_links(schedule, n_links).mask


def is_feasible(graph: NetworkGraph, schedule) -> bool:
    """True iff no two active links conflict (vacuously true when empty)."""
    mask = _as_mask(schedule, graph.n_links)
    if mask >> graph.n_links:
        raise ValueError("schedule references links outside the graph")
    conf = graph.conflict_masks()
    m = mask
    while m:
        l = (m & -m).bit_length() - 1
        if conf[l] & mask:
            return False
        m &= m - 1
    return True


def _lex_key(mask: int, n_links: int) -> int:
    """Integer whose ordering equals lexicographic order of the activation
    tuple (M_0, ..., M_{E-1}): bit i of the mask maps to bit (E-1-i)."""
    key = 0
    m = mask
    while m:
        l = (m & -m).bit_length() - 1
        key |= 1 << (n_links - 1 - l)
        m &= m - 1
    return key


def enumerate_maximal_schedules(
    graph: NetworkGraph, max_links: int = DEFAULT_ENUMERATION_LIMIT
) -> ScheduleSet:
    """Enumerate the maximal independent sets of the conflict graph.

    Bron-Kerbosch with pivoting over bitmask vertex sets.  Refuses graphs
    with more than ``max_links`` links; an LP column-generation fallback
    for larger instances is deliberately not provided.
    """
    n = graph.n_links
    if n > max_links:
        raise ScheduleEnumerationError(
            f"{n} links exceeds the enumeration limit of {max_links}; "
            "column-generation fallbacks are out of scope"
        )
    conf = graph.conflict_masks()
    full = (1 << n) - 1
    # compatibility = adjacency of the complement graph, where independent
    # sets of the conflict graph are cliques
    compat = [full & ~(conf[v] | (1 << v)) for v in range(n)]
    out: list[int] = []

    def bk(r: int, p: int, x: int):
        if p == 0 and x == 0:
            out.append(r)
            return
        # pivot: vertex of p|x with the most compatible candidates
        pivot, best = -1, -1
        m = p | x
        while m:
            v = (m & -m).bit_length() - 1
            d = bin(compat[v] & p).count("1")
            if d > best:
                best, pivot = d, v
            m &= m - 1
        cand = p & ~compat[pivot]
        m = cand
        while m:
            v = (m & -m).bit_length() - 1
            vb = 1 << v
            bk(r | vb, p & compat[v], x & compat[v])
            p &= ~vb
            x |= vb
            m &= m - 1

    bk(0, full, 0)
    out.sort()
    return ScheduleSet(tuple(Schedule(m, n) for m in out), n)


def _clean_weights(weights: Sequence[float], n: int) -> list[float]:
    w = list(weights)
    if len(w) != n:
        raise ValueError(f"expected {n} weights, got {len(w)}")
    for i, v in enumerate(w):
        if not math.isfinite(v):
            raise ValueError(f"weight for link {i} is not finite: {v}")
    return [v if v > 0.0 else 0.0 for v in w]


def _mwis_branch_and_bound(
    conf: list[int], weights: list[float], vertices: list[int], n_links: int
) -> tuple[int, float]:
    """Exact max-weight independent set over the given vertices.

    Prunes with a greedy clique-cover bound; ties on weight are resolved
    to the lexicographically smallest activation tuple.  Correctness, not
    speed, is the contract at desk scale.
    """
    order = sorted(vertices, key=lambda v: -weights[v])

    def bound(cand: int) -> float:
        # Greedy clique cover: each clique admits at most its top weight.
        cliques: list[tuple[int, float]] = []  # (member mask, top weight)
        total = 0.0
        for v in order:
            vb = 1 << v
            if not cand & vb:
                continue
            for i, (cm, top) in enumerate(cliques):
                if cm & ~conf[v] == 0:  # v conflicts with every member
                    cliques[i] = (cm | vb, top)
                    break
            else:
                cliques.append((vb, weights[v]))
                total += weights[v]
        return total

    best_w = 0.0
    best_mask = 0
    best_key = 0  # empty schedule: lex-smallest of all

    def rec(cand: int, cur_mask: int, cur_w: float):
        nonlocal best_w, best_mask, best_key
        if cand == 0:
            key = _lex_key(cur_mask, n_links)
            if cur_w > best_w or (cur_w == best_w and key < best_key):
                best_w, best_mask, best_key = cur_w, cur_mask, key
            return
        if cur_w + bound(cand) < best_w:
            return
        for v in order:
            if cand >> v & 1:
                break
        vb = 1 << v
        rec(cand & ~(conf[v] | vb), cur_mask | vb, cur_w + weights[v])
        rec(cand & ~vb, cur_mask, cur_w)

    start = 0
    for v in vertices:
        start |= 1 << v
    rec(start, 0, 0.0)
    return best_mask, best_w


def _matching_digraph(graph: NetworkGraph, weights: list[float]):
    """Collapse directed links onto undirected node pairs, keeping the
    heavier direction (smaller id on ties)."""
    chosen: dict[frozenset[str], int] = {}
    for link in graph.links:
        if weights[link.id] <= 0.0:
            continue
        key = frozenset((link.src, link.dst))
        prev = chosen.get(key)
        if prev is None or weights[link.id] > weights[prev]:
            chosen[key] = link.id
    return chosen


def _max_matching_weight(
    graph: NetworkGraph, weights: list[float], banned: set[int], fixed: set[int]
) -> float | None:
    """Max matching weight with some links forced off (banned) or forced
    on (fixed).  Returns None when the forced-on set is itself infeasible."""
    used_nodes: set[str] = set()
    base = 0.0
    for l in fixed:
        link = graph.links[l]
        if link.src in used_nodes or link.dst in used_nodes:
            return None
        used_nodes.update((link.src, link.dst))
        base += weights[l]
    g = nx.Graph()
    for link in graph.links:
        l = link.id
        if l in banned or l in fixed or weights[l] <= 0.0:
            continue
        if link.src in used_nodes or link.dst in used_nodes:
            continue
        key = frozenset((link.src, link.dst))
        if g.has_edge(link.src, link.dst):
            if weights[l] <= g.edges[link.src, link.dst]["weight"]:
                continue
        g.add_edge(link.src, link.dst, weight=weights[l], link=l)
    matching = nx.max_weight_matching(g, maxcardinality=False, weight="weight")
    return base + sum(g.edges[u, v]["weight"] for u, v in matching)


def _mws_by_matching(
    graph: NetworkGraph, weights: list[float]
) -> tuple[int, float]:
    """MaxWeight schedule on a node-exclusive graph via blossom matching.

    A feasible schedule under node-exclusive interference is exactly a
    matching of the underlying undirected multigraph.  The canonical
    tie-break is recovered by greedily forcing each link inactive (in id
    order) whenever the optimum is still attainable.
    """
    best = _max_matching_weight(graph, weights, set(), set())
    assert best is not None
    if best <= 0.0:
        return 0, 0.0
    banned: set[int] = set()
    fixed: set[int] = set()
    for l in range(graph.n_links):
        if weights[l] <= 0.0:
            continue
        w_off = _max_matching_weight(graph, weights, banned | {l}, fixed)
        if w_off is not None and w_off == best:
            banned.add(l)
        else:
            fixed.add(l)
    mask = 0
    for l in fixed:
        mask |= 1 << l
    return mask, sum(weights[l] for l in fixed)


def max_weight_schedule(
    graph: NetworkGraph, weights: Sequence[float], method: str = "auto"
) -> tuple[Schedule, float]:
    """Return a feasible schedule maximizing the weighted activation sum.

    Negative weights are clamped to zero and zero-weight links are never
    activated.  Under node-exclusive interference the problem is solved
    as an exact max-weight matching; otherwise by branch-and-bound over
    the conflict graph.  Among maximizers the schedule with the
    lexicographically smallest activation tuple is returned.
    """
    w = _clean_weights(weights, graph.n_links)
    if method == "auto":
        method = "matching" if graph.node_exclusive else "branch-and-bound"
    if method == "matching":
        if not graph.node_exclusive:
            raise ValueError("matching solver requires node-exclusive interference")
        mask, total = _mws_by_matching(graph, w)
    elif method == "branch-and-bound":
        vertices = [l for l in range(graph.n_links) if w[l] > 0.0]
        mask, total = _mwis_branch_and_bound(
            graph.conflict_masks(), w, vertices, graph.n_links
        )
    else:
        raise ValueError(f"unknown method {method!r}")
    return Schedule(mask, graph.n_links), total


class MaxWeightSolver:
    """Per-run MaxWeight engine with a cached maximal-schedule table.

    When the conflict graph is small enough to enumerate, each solve is a
    single matrix-vector product over the maximal-schedule masks, which is
    provably equivalent to :func:`max_weight_schedule` including the
    tie-break.  Larger graphs fall back to branch-and-bound per call.
    """

    def __init__(self, graph: NetworkGraph, max_links: int = DEFAULT_ENUMERATION_LIMIT):
        self.graph = graph
        self.n_links = graph.n_links
        self._conf = graph.conflict_masks()
        try:
            sched = enumerate_maximal_schedules(graph, max_links=max_links)
            self._masks = sched.masks()
            self._mat = np.array(
                [[m >> l & 1 for l in range(self.n_links)] for m in self._masks],
                dtype=np.float64,
            )
        except ScheduleEnumerationError:
            self._masks = None
            self._mat = None

    def solve(self, weights: np.ndarray) -> tuple[int, float]:
        """Weights must be finite and non-negative (callers clamp)."""
        if self._mat is None:
            sched, total = max_weight_schedule(self.graph, list(weights))
            return sched.mask, total
        scores = self._mat @ weights
        best = float(scores.max())
        if best <= 0.0:
            return 0, 0.0
        nz = 0
        for l in range(self.n_links):
            if weights[l] > 0.0:
                nz |= 1 << l
        cands = np.flatnonzero(scores == best)
        if len(cands) == 1:
            return self._masks[cands[0]] & nz, best
        mask = min(
            (self._masks[i] & nz for i in cands),
            key=lambda m: _lex_key(m, self.n_links),
        )
        return mask, best
