"""Per-slot scheduling policies: back-pressure and the shadow MaxWeight family.

The shadow schemes never look at data queue lengths when choosing the
schedule: their weight computations receive only the ShadowBank.  Shadow
service always mirrors data service, so a shadow counter is decremented
exactly when its link (and, in per-hop mode, its chosen hop-class) is
scheduled, whether or not data packets were available.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .queueing import (
    FIFO,
    PER_HOP,
    PER_LINK,
    PRIORITY,
    DataQueueBank,
    DeliveryRecord,
    Packet,
    ShadowBank,
)
from .schedule_engine import MaxWeightSolver
from .topology import FlowSet, HopIncidence, NetworkGraph


class SchedulerKind(Enum):
    BP = "bp"
    HQ_MWS = "hq-mws"
    PLQ_MWS = "plq-mws"
    FLQ_MWS = "flq-mws"
    PLQ_CSMA = "plq-csma"
    FLQ_CSMA = "flq-csma"

    @property
    def is_csma(self) -> bool:
        return self in (SchedulerKind.PLQ_CSMA, SchedulerKind.FLQ_CSMA)

    @property
    def uses_shadow(self) -> bool:
        return self is not SchedulerKind.BP

    @property
    def queue_mode(self) -> str:
        if self is SchedulerKind.BP:
            return "per-flow-node"
        if self is SchedulerKind.HQ_MWS:
            return PER_HOP
        return PER_LINK

    @property
    def discipline(self) -> str | None:
        if self in (SchedulerKind.PLQ_MWS, SchedulerKind.PLQ_CSMA):
            return PRIORITY
        if self in (SchedulerKind.FLQ_MWS, SchedulerKind.FLQ_CSMA):
            return FIFO
        return None


@dataclass
class StepResult:
    """Outcome of one scheduling slot."""

    mask: int
    served: dict[int, int]  # link -> packets actually sent
    delivered: list[DeliveryRecord]
    shadow_served: tuple[int, ...] = ()  # shadow queue indices decremented
    kstar: dict[int, int] = field(default_factory=dict)  # HQ: link -> chosen hop-class


class HopClassLayout:
    """Gather table mapping (link, class position) -> shadow queue index,
    used to vectorize the per-link argmax over hop-class shadow queues."""

    def __init__(self, graph: NetworkGraph, incidence: HopIncidence, bank: DataQueueBank):
        n_links = graph.n_links
        kmax = max((len(incidence.hop_classes[l]) for l in range(n_links)), default=0)
        kmax = max(kmax, 1)
        self.gather = np.zeros((n_links, kmax), dtype=np.int64)
        self.valid = np.zeros((n_links, kmax), dtype=bool)
        self.classes = np.zeros((n_links, kmax), dtype=np.int64)
        for l in range(n_links):
            for j, k in enumerate(incidence.hop_classes[l]):
                self.gather[l, j] = bank.queue_of(l, k)
                self.valid[l, j] = True
                self.classes[l, j] = k
        self._row = np.arange(n_links)

    def weights_and_kstar(self, shadow: ShadowBank):
        """Per-link weight = max shadow length over the link's hop-classes;
        the smallest class attains ties (argmax picks the first)."""
        qm = shadow.q[self.gather]
        qm[~self.valid] = -1.0
        jstar = np.argmax(qm, axis=1)
        w = qm[self._row, jstar]
        np.maximum(w, 0.0, out=w)
        return w, jstar


def hq_mws_step(
    graph: NetworkGraph,
    bank: DataQueueBank,
    shadow: ShadowBank,
    solver: MaxWeightSolver,
    slot: int,
    layout: HopClassLayout | None = None,
) -> StepResult:
    """One slot of the per-hop-queue MaxWeight scheduler.

    Each link's weight is the largest of its hop-class shadow queues; the
    winning schedule serves only the chosen hop-class of each active
    link, even if budget remains --- leftover capacity is deliberately
    not offered to the link's other queues.
    """
    if bank.mode != PER_HOP:
        raise ValueError("HQ-MWS requires a per-hop queue bank")
    if layout is None:
        layout = HopClassLayout(graph, bank.incidence, bank)
    w, jstar = layout.weights_and_kstar(shadow)
    mask, _ = solver.solve(w)
    served: dict[int, int] = {}
    delivered: list[DeliveryRecord] = []
    shadow_served = []
    kstar: dict[int, int] = {}
    m = mask
    while m:
        l = (m & -m).bit_length() - 1
        m &= m - 1
        k = int(layout.classes[l, jstar[l]])
        kstar[l] = k
        qi = int(layout.gather[l, jstar[l]])
        pkts, dels = bank.serve_link(l, graph.capacity(l), slot, hop_class=k)
        served[l] = len(pkts)
        delivered.extend(dels)
        shadow.serve(qi, graph.capacity(l))
        shadow_served.append(qi)
    return StepResult(mask, served, delivered, tuple(shadow_served), kstar)


def lq_mws_weights(shadow: ShadowBank) -> np.ndarray:
    """Per-link MaxWeight weights: the shadow queue lengths themselves."""
    return np.maximum(shadow.q, 0.0)


def _lq_step(graph, bank, shadow, solver, slot, discipline) -> StepResult:
    if bank.mode != PER_LINK or bank.discipline != discipline:
        raise ValueError(
            f"scheduler requires a per-link bank with {discipline} discipline"
        )
    w = lq_mws_weights(shadow)
    mask, _ = solver.solve(w)
    served: dict[int, int] = {}
    delivered: list[DeliveryRecord] = []
    shadow_served = []
    m = mask
    while m:
        l = (m & -m).bit_length() - 1
        m &= m - 1
        pkts, dels = bank.serve_link(l, graph.capacity(l), slot)
        served[l] = len(pkts)
        delivered.extend(dels)
        shadow.serve(l, graph.capacity(l))
        shadow_served.append(l)
    return StepResult(mask, served, delivered, tuple(shadow_served))


def plq_mws_step(graph, bank, shadow, solver, slot) -> StepResult:
    """Per-link MaxWeight with hop-class priority service."""
    return _lq_step(graph, bank, shadow, solver, slot, PRIORITY)


def flq_mws_step(graph, bank, shadow, solver, slot) -> StepResult:
    """Per-link MaxWeight with plain FIFO service."""
    return _lq_step(graph, bank, shadow, solver, slot, FIFO)


class BPQueueBank:
    """Per-node, per-flow FIFO queues for the back-pressure baseline."""

    def __init__(self, graph: NetworkGraph, flows: FlowSet):
        self.graph = graph
        self.flows = flows
        self._seq = 0
        self.qindex: dict[tuple[str, int], int] = {}
        self.labels: list[str] = []
        # a queue exists at every route node except the destination
        for f in flows:
            nodes = [graph.links[f.route[0]].src] + [
                graph.links[l].dst for l in f.route[:-1]
            ]
            for node in nodes:
                self.qindex[(node, f.id)] = len(self.labels)
                self.labels.append(f"{node}.f{f.id}")
        self.n_queues = len(self.labels)
        self._queues: list[deque[Packet]] = [deque() for _ in range(self.n_queues)]
        self.arrivals = [0] * self.n_queues
        self.departures = [0] * self.n_queues
        self.lengths = [0] * self.n_queues
        self.injected = [0] * len(flows)
        self._staged: list[tuple[Packet, int]] = []
        self._route = [f.route for f in flows]
        self._route_len = [f.n_hops for f in flows]
        # hop k of flow s waits at queue (b(route[k-1]), s)
        self._hop_queue = [
            [
                self.qindex[(graph.links[l].src, f.id)]
                for l in f.route
            ]
            for f in flows
        ]

    def land_staged(self):
        for pkt, qi in self._staged:
            self._queues[qi].append(pkt)
            self.arrivals[qi] += 1
            self.lengths[qi] += 1
        self._staged.clear()

    def inject_exogenous(self, flow: int, n: int, slot: int):
        if not 0 <= flow < len(self._route):
            raise ValueError(f"unknown flow {flow}")
        if n < 0:
            raise ValueError("packet count must be >= 0")
        qi = self._hop_queue[flow][0]
        for _ in range(n):
            self._queues[qi].append(Packet(flow, 1, slot, self._seq))
            self._seq += 1
        self.arrivals[qi] += n
        self.lengths[qi] += n
        self.injected[flow] += n

    def count(self, node: str, flow: int) -> int:
        """Queue length of the flow at the node; 0 where no queue exists
        (in particular at the flow's destination)."""
        qi = self.qindex.get((node, flow))
        return 0 if qi is None else self.lengths[qi]

    def serve_flow(
        self, link: int, flow: int, budget: int, slot: int
    ) -> tuple[list[Packet], list[DeliveryRecord]]:
        """Send up to ``budget`` packets of one flow across the link."""
        if budget < 1:
            raise ValueError("service budget must be >= 1")
        route = self._route[flow]
        hop = route.index(link) + 1
        qi = self._hop_queue[flow][hop - 1]
        q = self._queues[qi]
        n = min(budget, len(q))
        served = [q.popleft() for _ in range(n)]
        if n:
            self.departures[qi] += n
            self.lengths[qi] -= n
        delivered: list[DeliveryRecord] = []
        for pkt in served:
            if pkt.hop == self._route_len[flow]:
                delivered.append((pkt.flow, pkt.birth, slot + 1))
            else:
                pkt.hop += 1
                self._staged.append((pkt, self._hop_queue[flow][pkt.hop - 1]))
        return served, delivered

    def total_backlog(self) -> int:
        return sum(self.lengths)

    def in_flight(self) -> int:
        return len(self._staged)


def back_pressure_weights(
    graph: NetworkGraph, incidence: HopIncidence, bank: BPQueueBank
) -> tuple[np.ndarray, list[int]]:
    """Link weights c_l * max(0, max differential) and the argmax flow per
    link (smallest flow id on ties; -1 where no flow has positive
    differential)."""
    n = graph.n_links
    w = np.zeros(n, dtype=np.float64)
    chosen = [-1] * n
    for l in range(n):
        link = graph.links[l]
        best = 0
        best_flow = -1
        for s, _k in incidence.crossings[l]:
            diff = bank.count(link.src, s) - bank.count(link.dst, s)
            if diff > best:
                best = diff
                best_flow = s
        if best > 0:
            w[l] = graph.capacity(l) * best
            chosen[l] = best_flow
    return w, chosen


def back_pressure_step(
    graph: NetworkGraph,
    incidence: HopIncidence,
    bank: BPQueueBank,
    solver: MaxWeightSolver,
    slot: int,
) -> StepResult:
    """One slot of back-pressure: weight links by capacity times the best
    per-flow queue differential, schedule by MaxWeight, and serve the
    argmax flow of each active link."""
    w, chosen = back_pressure_weights(graph, incidence, bank)
    mask, _ = solver.solve(w)
    served: dict[int, int] = {}
    delivered: list[DeliveryRecord] = []
    m = mask
    while m:
        l = (m & -m).bit_length() - 1
        m &= m - 1
        pkts, dels = bank.serve_flow(l, chosen[l], graph.capacity(l), slot)
        served[l] = len(pkts)
        delivered.extend(dels)
    return StepResult(mask, served, delivered)
