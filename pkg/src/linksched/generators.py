"""Built-in topology generators for the standard experiments.

``generate_linear10`` builds the 11-node, 10-link chain with ten nested
flows out of node 1.  Link k (1-based) carries the 10-k+1 flows whose
routes reach past it, and its capacity is set to that flow count; with
unit-rate flows every adjacent-link pair then saturates at exactly half
coverage, so the supportable uniform rate is 0.5 packets/slot.  The
reversed variant flips every link and route, which spreads each flow
over distinct hop-classes at its shared links.

``generate_bottleneck_star`` isolates the classic single-node bottleneck:
four single-hop flows on a capacity-8 link, two on a capacity-10 link,
and one each on two unit links, all mutually conflicting.  Uniform rate
lambda is supportable iff lambda*(4/8 + 2/10 + 1 + 1) <= 1, i.e. up to
10/27.

``generate_grid`` builds the 4x4 grid (24 undirected edges, 48 directed
links) with caller-supplied capacities and routes.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from .schedulers import SchedulerKind
from .sim import Scenario
from .topology import build_network, validate_flows


def _scenario(graph, flow_descs, allow_uncovered=False, **kw) -> Scenario:
    flows, _ = validate_flows(graph, flow_descs, allow_uncovered_links=allow_uncovered)
    kw.setdefault("scheduler", SchedulerKind.FLQ_MWS)
    return Scenario(graph=graph, flows=flows, allow_uncovered_links=allow_uncovered, **kw)


def generate_linear10(
    rate: float = 0.0, reversed_flows: bool = False, **kw
) -> Scenario:
    """Linear chain of 11 nodes / 10 links with 10 nested same-source flows.

    Forward: flow i runs node 1 -> node i+1 (links 0..i-1), so every link
    sees all its traffic at one hop-class.  Reversed: flow i runs node
    i+1 -> node 1, so the final link sees ten distinct hop-classes.
    Capacity of link k (0-based) is 10-k, the number of flows crossing it.
    """
    nodes = [f"n{i}" for i in range(1, 12)]
    if reversed_flows:
        links = [(nodes[k + 1], nodes[k], 10 - k) for k in range(10)]
        flow_descs = [(tuple(range(i, -1, -1)), rate) for i in range(10)]
    else:
        links = [(nodes[k], nodes[k + 1], 10 - k) for k in range(10)]
        flow_descs = [(tuple(range(i + 1)), rate) for i in range(10)]
    graph = build_network(nodes, links, "node-exclusive")
    name = "linear10-reversed" if reversed_flows else "linear10"
    return _scenario(graph, flow_descs, name=name, **kw)


def generate_bottleneck_star(rate: float = 0.0, **kw) -> Scenario:
    """Four mutually conflicting inbound links at one node; supportable
    uniform rate is 10/27."""
    nodes = ["x", "a", "b", "c", "d"]
    links = [("a", "x", 8), ("b", "x", 10), ("c", "x", 1), ("d", "x", 1)]
    graph = build_network(nodes, links, "node-exclusive")
    flow_descs = (
        [((0,), rate)] * 4 + [((1,), rate)] * 2 + [((2,), rate), ((3,), rate)]
    )
    return _scenario(graph, flow_descs, name="bottleneck-star", **kw)


def grid_node_name(row: int, col: int) -> str:
    return f"g{row}{col}"


def generate_grid(
    capacity: int | Mapping[tuple[str, str], int] = 1,
    flow_node_paths: Sequence[tuple[Sequence[str], float]] = (),
    allow_uncovered_links: bool | None = None,
    **kw,
) -> Scenario:
    """4x4 grid with both directions of every edge as separate links.

    ``capacity`` is either uniform or a {(src, dst): capacity} map keyed
    by directed node pairs.  Routes are given as node sequences and are
    translated to link ids.  Without flows the scenario is only valid
    with ``allow_uncovered_links``.
    """
    side = 4
    nodes = [grid_node_name(r, c) for r in range(side) for c in range(side)]
    pairs: list[tuple[str, str]] = []
    for r in range(side):
        for c in range(side):
            if c + 1 < side:
                pairs.append((grid_node_name(r, c), grid_node_name(r, c + 1)))
            if r + 1 < side:
                pairs.append((grid_node_name(r, c), grid_node_name(r + 1, c)))
    links = []
    for u, v in pairs:
        for src, dst in ((u, v), (v, u)):
            cap = capacity if isinstance(capacity, int) else capacity.get((src, dst), 1)
            links.append((src, dst, cap))
    graph = build_network(nodes, links, "node-exclusive")
    link_id = {(l.src, l.dst): l.id for l in graph.links}

    flow_descs = []
    for path, rate in flow_node_paths:
        route = []
        for u, v in zip(path, path[1:]):
            key = (str(u), str(v))
            if key not in link_id:
                raise ValueError(f"no grid link {u} -> {v}")
            route.append(link_id[key])
        flow_descs.append((tuple(route), rate))
    if allow_uncovered_links is None:
        allow_uncovered_links = True  # user routes rarely cover all 48 links
    return _scenario(
        graph, flow_descs, allow_uncovered=allow_uncovered_links, name="grid4x4", **kw
    )


def generate_loop_demo(rate: float = 0.1, **kw) -> Scenario:
    """Seven links whose six flows chain into a flow-loop through links
    1..6 (a ranking therefore cannot exist)."""
    nodes = list("ABCDEFG")
    links = [
        ("A", "B"), ("B", "C"), ("C", "D"), ("D", "E"),
        ("E", "F"), ("F", "G"), ("G", "B"),
    ]
    graph = build_network(nodes, links, "node-exclusive")
    routes = [(0, 1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)]
    return _scenario(graph, [(r, rate) for r in routes], name="loop-demo", **kw)


def generate_single_path_demo(rate: float = 0.1, **kw) -> Scenario:
    """Eight links chained by seven two-hop flows into one flow-path
    0..7; links 0 and 7 are the two directions of the same edge."""
    nodes = list("ABCDEFG")
    links = [
        ("A", "B"), ("B", "C"), ("C", "D"), ("D", "E"),
        ("E", "F"), ("F", "G"), ("G", "B"), ("B", "A"),
    ]
    graph = build_network(nodes, links, "node-exclusive")
    routes = [(k, k + 1) for k in range(7)]
    return _scenario(graph, [(r, rate) for r in routes], name="single-path-demo", **kw)


def generate_multi_path_demo(rate: float = 0.1, **kw) -> Scenario:
    """Twelve links whose two-hop flows induce exactly five overlapping
    flow-paths between sources {0, 6} and sinks {9, 11}."""
    nodes = [f"m{i}" for i in range(12)]
    ends = [
        (0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (2, 6),
        (7, 5), (5, 8), (8, 6), (8, 11), (6, 9), (9, 10),
    ]
    links = [(f"m{u}", f"m{v}") for u, v in ends]
    graph = build_network(nodes, links, "node-exclusive")
    routes = [
        (0, 1), (1, 2), (2, 3), (3, 4), (4, 7), (7, 9),
        (1, 5), (5, 10), (10, 11), (6, 7), (7, 8), (8, 10),
    ]
    return _scenario(graph, [(r, rate) for r in routes], name="multi-path-demo", **kw)


BUILTIN_SCENARIOS = {
    "linear10": generate_linear10,
    "linear10-reversed": lambda rate=0.0, **kw: generate_linear10(
        rate, reversed_flows=True, **kw
    ),
    "bottleneck-star": generate_bottleneck_star,
    "grid4x4": generate_grid,
    "loop-demo": generate_loop_demo,
    "single-path-demo": generate_single_path_demo,
    "multi-path-demo": generate_multi_path_demo,
}
