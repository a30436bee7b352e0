"""Flow-structure analysis: components, flow-loops, flow-paths, ranking.

Two flows are connected when their routes share a link; the transitive
closure partitions the links into components.  Inside a component, the
*link-precedence* relation has an edge l -> l' whenever l' immediately
follows l on some flow's route.  A component contains a flow-loop iff the
precedence relation has a cycle; otherwise the component is a flow-tree
and admits a ranking of links that strictly increases along every route.

The rank-assignment procedure walks the component's flow-paths (maximal
source-to-sink chains of the precedence relation) in a caller-chosen
order, keeping a running counter per path and shifting previously placed
ranks upward when a path reveals that a link must come later.  The final
ranking is verified against every route; a violation means a loop slipped
through and is reported as an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .topology import FlowSet


class FlowPathExplosionError(RuntimeError):
    """Flow-path enumeration exceeded its configured cap."""


class FlowLoopError(ValueError):
    """Operation requires a loop-free component."""


@dataclass(frozen=True)
class Component:
    """A maximal set of links whose flows pairwise communicate."""

    links: frozenset[int]
    flows: tuple[int, ...]


@dataclass(frozen=True)
class FlowPath:
    """A maximal chain from a starting link (exogenous arrivals only) to an
    ending link (packets leave the system), following the precedence
    relation."""

    links: tuple[int, ...]

    def __len__(self):
        return len(self.links)


@dataclass(frozen=True)
class FlowLoop:
    """A witness cycle: consecutive links chained through the given flows
    (flows[i] carries links[i] -> links[i+1], wrapping around)."""

    links: tuple[int, ...]
    flows: tuple[int, ...]


@dataclass
class RankResult:
    ranking: dict[int, int]
    snapshots: list[dict[int, int]]  # state after each outer iteration; [0] is the initial -1 fill
    paths: tuple[FlowPath, ...]
    order: tuple[int, ...]


def decompose_components(flows: FlowSet) -> list[Component]:
    """Partition the covered links into components of communicating flows."""
    parent = list(range(len(flows)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    link_owner: dict[int, int] = {}
    for f in flows:
        for l in f.route:
            if l in link_owner:
                ra, rb = find(link_owner[l]), find(f.id)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
            else:
                link_owner[l] = f.id

    groups: dict[int, list[int]] = {}
    for f in flows:
        groups.setdefault(find(f.id), []).append(f.id)
    comps = []
    for fids in groups.values():
        links = frozenset(l for s in fids for l in flows[s].route)
        comps.append(Component(links, tuple(sorted(fids))))
    comps.sort(key=lambda c: min(c.links))
    return comps


def _precedence(flows: FlowSet, component: Component):
    """Successor map and (l, l') -> smallest carrying flow id."""
    succ: dict[int, set[int]] = {l: set() for l in component.links}
    carrier: dict[tuple[int, int], int] = {}
    for s in component.flows:
        route = flows[s].route
        for a, b in zip(route, route[1:]):
            succ[a].add(b)
            carrier.setdefault((a, b), s)
    return {l: tuple(sorted(ns)) for l, ns in succ.items()}, carrier


def find_flow_loops(flows: FlowSet, component: Component) -> list[FlowLoop]:
    """Detect flow-loops; empty result means the component is a flow-tree.

    Detection runs on the link-precedence relation, whose cycles are in
    exact correspondence with chained same-flow link pairs wrapping
    around.  At least one witness is returned when a loop exists.
    """
    succ, carrier = _precedence(flows, component)
    color: dict[int, int] = {}  # 0 in progress, 1 done
    stack: list[int] = []
    pos: dict[int, int] = {}
    cycles: list[tuple[int, ...]] = []

    def dfs(v: int):
        color[v] = 0
        pos[v] = len(stack)
        stack.append(v)
        for w in succ[v]:
            if w not in color:
                dfs(w)
            elif color[w] == 0:
                cycles.append(tuple(stack[pos[w]:]))
        stack.pop()
        del pos[v]
        color[v] = 1

    for v in sorted(component.links):
        if v not in color:
            dfs(v)

    out = []
    seen = set()
    for cyc in cycles:
        i = cyc.index(min(cyc))
        canon = cyc[i:] + cyc[:i]
        if canon in seen:
            continue
        seen.add(canon)
        witness = tuple(
            carrier[(canon[i], canon[(i + 1) % len(canon)])]
            for i in range(len(canon))
        )
        out.append(FlowLoop(canon, witness))
    return out


def _terminals(flows: FlowSet, component: Component):
    """Starting links (no forwarded arrivals) and ending links (no onward
    hops) are the sources and sinks of the precedence relation."""
    succ, _ = _precedence(flows, component)
    indeg = {l: 0 for l in component.links}
    for l, ns in succ.items():
        for w in ns:
            indeg[w] += 1
    sources = sorted(l for l in component.links if indeg[l] == 0)
    sinks = sorted(l for l in component.links if not succ[l])
    return succ, sources, sinks


def enumerate_flow_paths(
    flows: FlowSet, component: Component, cap: int = 10_000
) -> list[FlowPath]:
    """All flow-paths of a flow-tree, in depth-first discovery order.

    Raises FlowLoopError on a loopy component and FlowPathExplosionError
    when more than ``cap`` paths exist.
    """
    loops = find_flow_loops(flows, component)
    if loops:
        raise FlowLoopError(
            f"component contains a flow-loop through links {loops[0].links}"
        )
    succ, sources, _ = _terminals(flows, component)
    paths: list[FlowPath] = []

    def walk(prefix: list[int]):
        nxt = succ[prefix[-1]]
        if not nxt:
            if len(paths) >= cap:
                raise FlowPathExplosionError(
                    f"more than {cap} flow-paths; raise the cap explicitly"
                )
            paths.append(FlowPath(tuple(prefix)))
            return
        for w in nxt:
            prefix.append(w)
            walk(prefix)
            prefix.pop()

    for s in sources:
        walk([s])
    return paths


def assign_ranks(
    flows: FlowSet,
    component: Component,
    path_order: Sequence[int] | None = None,
    paths: Sequence[FlowPath] | None = None,
) -> RankResult:
    """Rank the links of a flow-tree so ranks strictly increase along
    every route.

    Walks each flow-path in the given order with a running counter.  For
    each link on the path: an unranked link takes the counter; a link
    ranked at least the counter raises the counter to its rank; a link
    ranked below the counter is lifted to the counter, first shifting up
    (by the same amount) every higher-ranked link sharing one of the
    previously processed paths through it.  The output ranking depends on
    the path order; every order yields a valid ranking.  Snapshots after
    each outer iteration are preserved.
    """
    if paths is None:
        paths = enumerate_flow_paths(flows, component)
    paths = tuple(paths)
    if path_order is None:
        path_order = range(len(paths))
    order = tuple(path_order)
    if sorted(order) != list(range(len(paths))):
        raise ValueError("path_order must be a permutation of the path indices")

    rank = {l: -1 for l in component.links}
    snapshots = [dict(rank)]
    chosen: list[int] = []
    for pi in order:
        path = paths[pi]
        count = 1
        for link in path.links:
            r = rank[link]
            if r == -1:
                rank[link] = count
            elif r >= count:
                count = r
            else:
                # lift the tail of every previously chosen path through
                # this link before re-ranking the link itself
                gamma = {
                    l
                    for pj in chosen
                    if link in paths[pj].links
                    for l in paths[pj].links
                    if rank[l] > r
                }
                for l in gamma:
                    rank[l] += count - r
                rank[link] = count
            count += 1
        chosen.append(pi)
        snapshots.append(dict(rank))

    ok, violation = verify_ranking(flows, rank, flow_ids=component.flows)
    if not ok:
        raise FlowLoopError(
            f"rank assignment produced a non-monotone ranking at {violation}; "
            "the component is not a flow-tree"
        )
    return RankResult(rank, snapshots, paths, order)


def verify_ranking(
    flows: FlowSet,
    ranking: dict[int, int],
    flow_ids: Sequence[int] | None = None,
) -> tuple[bool, tuple[int, int, int, int] | None]:
    """Check strict rank increase along every route.

    Returns (True, None) or (False, (flow, hop, link, next_link)) for the
    first violating hop.  Strict increase along routes implies that every
    non-exogenous arrival comes from a smaller-ranked link.
    """
    ids = range(len(flows)) if flow_ids is None else flow_ids
    for s in ids:
        route = flows[s].route
        for k, (a, b) in enumerate(zip(route, route[1:]), start=1):
            if a not in ranking or b not in ranking:
                raise KeyError(f"ranking does not cover links {a}->{b} of flow {s}")
            if not ranking[a] < ranking[b]:
                return False, (s, k, a, b)
    return True, None
