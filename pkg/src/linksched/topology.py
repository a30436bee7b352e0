"""Network graph, interference model, flows, and hop incidence.

A network is a directed graph whose links carry integer capacities and a
symmetric interference relation (the conflict graph).  Flows have fixed,
loop-free routes given as ordered link-id lists.  The hop incidence
structure records, for every flow, which link carries its k-th hop; it is
the bridge between routes and per-link offered load.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence


class ValidationError(ValueError):
    """Raised when a model input violates a structural assumption."""


NODE_EXCLUSIVE = "node-exclusive"


@dataclass(frozen=True)
class DirectedLink:
    """A directed link; (i, j) and (j, i) are distinct links."""

    id: int
    src: str
    dst: str
    capacity: int = 1

    def __post_init__(self):
        if self.src == self.dst:
            raise ValidationError(f"link {self.id}: self-loop {self.src!r}")
        if not isinstance(self.capacity, int) or self.capacity < 1:
            raise ValidationError(
                f"link {self.id}: capacity must be a positive integer, "
                f"got {self.capacity!r}"
            )


@dataclass(frozen=True)
class NetworkGraph:
    """Directed links plus a symmetric conflict relation over link ids."""

    nodes: tuple[str, ...]
    links: tuple[DirectedLink, ...]
    interference: tuple[frozenset[int], ...]
    node_exclusive: bool

    @property
    def n_links(self) -> int:
        return len(self.links)

    def capacity(self, link: int) -> int:
        return self.links[link].capacity

    @cached_property
    def _capacities(self) -> tuple[int, ...]:
        return tuple(l.capacity for l in self.links)

    def capacities(self) -> tuple[int, ...]:
        return self._capacities

    @cached_property
    def _conflict_masks(self) -> tuple[int, ...]:
        masks = []
        for l in range(self.n_links):
            m = 0
            for j in self.interference[l]:
                m |= 1 << j
            masks.append(m)
        return tuple(masks)

    def conflict_masks(self) -> tuple[int, ...]:
        """Per-link bitmask of conflicting links (excludes the link itself)."""
        return self._conflict_masks

    def conflicts(self, a: int, b: int) -> bool:
        return b in self.interference[a]


def build_network(
    nodes: Sequence[str],
    links: Sequence[tuple[str, str] | tuple[str, str, int] | DirectedLink],
    interference_spec: str | Iterable[tuple[int, int]] = NODE_EXCLUSIVE,
) -> NetworkGraph:
    """Build a validated NetworkGraph.

    ``links`` entries are (src, dst), (src, dst, capacity) tuples or
    DirectedLink objects; link ids are assigned densely in list order (an
    explicit DirectedLink id must equal its position).

    ``interference_spec`` is either the token ``"node-exclusive"`` (two
    links conflict iff they share an endpoint) or an explicit list of link
    id pairs, which is symmetrized.  A pair referencing an unknown link id
    is an error.
    """
    node_list = tuple(str(n) for n in nodes)
    if len(set(node_list)) != len(node_list):
        raise ValidationError("duplicate node ids")
    node_set = set(node_list)

    built: list[DirectedLink] = []
    for i, spec in enumerate(links):
        if isinstance(spec, DirectedLink):
            if spec.id != i:
                raise ValidationError(
                    f"link ids must be dense 0..{len(links) - 1}: "
                    f"entry {i} carries id {spec.id}"
                )
            link = spec
        else:
            if len(spec) == 2:
                src, dst = spec
                cap = 1
            else:
                src, dst, cap = spec
            link = DirectedLink(i, str(src), str(dst), int(cap))
        if link.src not in node_set or link.dst not in node_set:
            raise ValidationError(
                f"link {i}: endpoint not in node list ({link.src!r} -> {link.dst!r})"
            )
        built.append(link)

    n = len(built)
    conf: list[set[int]] = [set() for _ in range(n)]
    if isinstance(interference_spec, str):
        if interference_spec != NODE_EXCLUSIVE:
            raise ValidationError(
                f"unknown interference token {interference_spec!r}"
            )
        node_exclusive = True
        for a in range(n):
            ea = {built[a].src, built[a].dst}
            for b in range(a + 1, n):
                if ea & {built[b].src, built[b].dst}:
                    conf[a].add(b)
                    conf[b].add(a)
    else:
        node_exclusive = False
        for pair in interference_spec:
            a, b = pair
            if not (0 <= a < n and 0 <= b < n):
                raise ValidationError(f"interference pair {pair} references unknown link")
            if a == b:
                raise ValidationError(f"link {a} cannot interfere with itself")
            conf[a].add(b)
            conf[b].add(a)

    return NetworkGraph(
        nodes=node_list,
        links=tuple(built),
        interference=tuple(frozenset(s) for s in conf),
        node_exclusive=node_exclusive,
    )


@dataclass(frozen=True)
class Flow:
    """A flow with a fixed loop-free route (ordered link ids) and a mean
    Poisson arrival rate in packets/slot."""

    id: int
    route: tuple[int, ...]
    rate: float = 0.0

    @property
    def n_hops(self) -> int:
        return len(self.route)


@dataclass(frozen=True)
class FlowSet:
    flows: tuple[Flow, ...]

    def __iter__(self):
        return iter(self.flows)

    def __len__(self):
        return len(self.flows)

    def __getitem__(self, i: int) -> Flow:
        return self.flows[i]

    def rates(self) -> tuple[float, ...]:
        return tuple(f.rate for f in self.flows)

    def with_uniform_rate(self, rate: float) -> "FlowSet":
        return FlowSet(tuple(Flow(f.id, f.route, float(rate)) for f in self.flows))


@dataclass(frozen=True)
class HopIncidence:
    """Indicator structure: which link carries the k-th hop of each flow.

    ``crossings[l]`` lists (flow id, hop index k, 1-based) pairs for every
    flow traversing link l; ``load_coeff[l]`` is the number of such
    crossings (each loop-free flow crosses a link at most once).
    """

    crossings: tuple[tuple[tuple[int, int], ...], ...]
    lmax: int
    hop_classes: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    def indicator(self, flow: Flow, link: int, k: int) -> int:
        """1 iff link is the k-th hop (1-based) of the flow."""
        return 1 if k >= 1 and k <= flow.n_hops and flow.route[k - 1] == link else 0

    @property
    def load_coeff(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.crossings)

    def offered_load(self, flows: FlowSet) -> list[float]:
        """Per-link offered load: sum of rates of crossing flows."""
        return [sum(flows[s].rate for s, _k in cs) for cs in self.crossings]


def validate_flows(
    graph: NetworkGraph,
    flow_descriptions: Sequence[tuple[Sequence[int], float] | Flow],
    allow_uncovered_links: bool = False,
) -> tuple[FlowSet, HopIncidence]:
    """Check route connectivity and loop-freedom; build the hop incidence.

    Every graph link must be traversed by at least one flow unless
    ``allow_uncovered_links`` is set.
    """
    flows: list[Flow] = []
    for i, desc in enumerate(flow_descriptions):
        if isinstance(desc, Flow):
            route, rate = desc.route, desc.rate
        else:
            route, rate = desc
        route = tuple(int(l) for l in route)
        if not route:
            raise ValidationError(f"flow {i}: empty route")
        for l in route:
            if not (0 <= l < graph.n_links):
                raise ValidationError(f"flow {i}: unknown link id {l}")
        for k in range(len(route) - 1):
            a, b = graph.links[route[k]], graph.links[route[k + 1]]
            if a.dst != b.src:
                raise ValidationError(
                    f"flow {i}: disconnected route at hop {k + 1}: "
                    f"link {route[k]} ends at {a.dst!r} but link "
                    f"{route[k + 1]} starts at {b.src!r}"
                )
        node_seq = [graph.links[route[0]].src] + [graph.links[l].dst for l in route]
        if len(set(node_seq)) != len(node_seq):
            raise ValidationError(f"flow {i}: route repeats a node (not loop-free)")
        if rate < 0:
            raise ValidationError(f"flow {i}: negative rate {rate}")
        flows.append(Flow(i, route, float(rate)))

    crossings: list[list[tuple[int, int]]] = [[] for _ in range(graph.n_links)]
    for f in flows:
        for k, l in enumerate(f.route, start=1):
            crossings[l].append((f.id, k))
    if not allow_uncovered_links:
        for l, cs in enumerate(crossings):
            if not cs:
                raise ValidationError(
                    f"link {l} is traversed by no flow "
                    "(pass allow_uncovered_links=True to permit)"
                )
    lmax = max((f.n_hops for f in flows), default=0)
    hop_classes = tuple(
        tuple(sorted({k for _s, k in cs})) for cs in crossings
    )
    return (
        FlowSet(tuple(flows)),
        HopIncidence(
            crossings=tuple(tuple(cs) for cs in crossings),
            lmax=lmax,
            hop_classes=hop_classes,
        ),
    )
