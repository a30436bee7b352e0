"""Data queues, shadow counters, and packet bookkeeping.

Per slot, the engine applies a fixed order: (1) exogenous packets and
packets forwarded during the previous slot land in their queues, (2) the
shadow counters tick, (3) the scheduler decides, (4) data and shadow
service happen.  A packet transmitted in slot t becomes servable at its
next hop in slot t+1 (store-and-forward); a packet transmitted on its
final hop in slot t reaches its destination at slot t+1, so its recorded
delay is (t+1) - birth and is at least one slot per hop.

Shadow counters are real-valued.  Each data queue's shadow receives, at
slot t, exactly (1+epsilon) * A(t) / t where A(t) is the data queue's
cumulative arrival count through slot t; shadow service mirrors the data
schedule and clamps at zero.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .topology import FlowSet, HopIncidence, NetworkGraph

PER_HOP = "per-hop"
PER_LINK = "per-link"
FIFO = "fifo"
PRIORITY = "priority"

DeliveryRecord = tuple[int, int, int]  # (flow, birth slot, delivery slot)


@dataclass(slots=True)
class Packet:
    flow: int
    hop: int  # 1-based hop index of the link the packet waits at
    birth: int
    seq: int


class DataQueueBank:
    """Integer data queues in per-hop or per-link mode.

    Per-hop mode keeps one FIFO queue per (link, hop-class) pair that some
    flow actually uses.  Per-link mode keeps a single queue per link with
    either FIFO order or hop-class priority (smaller hop-class first, FIFO
    within a class).
    """

    def __init__(
        self,
        graph: NetworkGraph,
        flows: FlowSet,
        incidence: HopIncidence,
        mode: str,
        discipline: str = FIFO,
    ):
        if mode not in (PER_HOP, PER_LINK):
            raise ValueError(f"unknown queue mode {mode!r}")
        if discipline not in (FIFO, PRIORITY):
            raise ValueError(f"unknown discipline {discipline!r}")
        self.graph = graph
        self.flows = flows
        self.incidence = incidence
        self.mode = mode
        self.discipline = discipline
        self._priority_mode = mode == PER_LINK and discipline == PRIORITY
        self._seq = 0

        n_links = graph.n_links
        if mode == PER_HOP:
            self.qindex: dict[tuple[int, int], int] = {}
            self.labels: list[str] = []
            for l in range(n_links):
                for k in incidence.hop_classes[l]:
                    self.qindex[(l, k)] = len(self.labels)
                    self.labels.append(f"l{l}.k{k}")
            self.n_queues = len(self.labels)
            self._queues: list[deque[Packet]] = [deque() for _ in range(self.n_queues)]
        else:
            self.qindex = {}
            self.labels = [f"l{l}" for l in range(n_links)]
            self.n_queues = n_links
            if discipline == FIFO:
                self._queues = [deque() for _ in range(n_links)]
            else:
                # one bucket per hop-class that can occur at the link
                self._buckets: list[dict[int, deque[Packet]]] = [
                    {k: deque() for k in incidence.hop_classes[l]}
                    for l in range(n_links)
                ]
                self._bucket_order = [
                    tuple(sorted(b)) for b in self._buckets
                ]

        self.arrivals = [0] * self.n_queues  # cumulative A per queue
        self.departures = [0] * self.n_queues
        self.lengths = [0] * self.n_queues
        self.injected = [0] * len(flows)
        self._staged: list[tuple[Packet, int]] = []  # (packet, dest queue)

        # route lookups
        self._route_len = [f.n_hops for f in flows]
        self._route = [f.route for f in flows]
        # queue index per (flow, hop), so forwarding never searches
        self._hop_qi = [
            [self.queue_of(l, k) for k, l in enumerate(f.route, start=1)]
            for f in flows
        ]

    # -- queue addressing ------------------------------------------------

    def queue_of(self, link: int, hop: int) -> int:
        """Dense index of the queue holding (link, hop-class) packets."""
        if self.mode == PER_HOP:
            return self.qindex[(link, hop)]
        return link

    def _push(self, pkt: Packet):
        qi = self._hop_qi[pkt.flow][pkt.hop - 1]
        if self._priority_mode:
            self._buckets[qi][pkt.hop].append(pkt)
        else:
            self._queues[qi].append(pkt)
        self.arrivals[qi] += 1
        self.lengths[qi] += 1

    # -- slot phases -----------------------------------------------------

    def land_staged(self):
        """Packets transmitted in the previous slot become servable now."""
        staged = self._staged
        if not staged:
            return
        arrivals = self.arrivals
        lengths = self.lengths
        if self._priority_mode:
            buckets = self._buckets
            for pkt, qi in staged:
                buckets[qi][pkt.hop].append(pkt)
                arrivals[qi] += 1
                lengths[qi] += 1
        else:
            queues = self._queues
            for pkt, qi in staged:
                queues[qi].append(pkt)
                arrivals[qi] += 1
                lengths[qi] += 1
        staged.clear()

    def inject_exogenous(self, flow: int, n: int, slot: int):
        """Inject n exogenous packets at the flow's first hop."""
        if not 0 <= flow < len(self._route):
            raise ValueError(f"unknown flow {flow}")
        if n < 0:
            raise ValueError("packet count must be >= 0")
        if n == 0:
            return
        link = self._route[flow][0]
        qi = self.queue_of(link, 1)
        if self.mode == PER_LINK and self.discipline == PRIORITY:
            target = self._buckets[link][1]
        else:
            target = self._queues[qi]
        seq = self._seq
        for i in range(n):
            target.append(Packet(flow, 1, slot, seq + i))
        self._seq = seq + n
        self.arrivals[qi] += n
        self.lengths[qi] += n
        self.injected[flow] += n

    def serve_link(
        self, link: int, budget: int, slot: int, hop_class: int | None = None
    ) -> tuple[list[Packet], list[DeliveryRecord]]:
        """Remove up to ``budget`` packets from the link per discipline.

        Per-hop mode serves only the named hop-class.  Served packets are
        staged toward their next hop (servable at slot+1) or recorded as
        delivered at slot+1.
        """
        if budget < 1:
            raise ValueError("service budget must be >= 1")
        if self.mode == PER_HOP:
            if hop_class is None:
                raise ValueError("per-hop mode requires the hop-class to serve")
            qi = self.qindex[(link, hop_class)]
            q = self._queues[qi]
        elif self._priority_mode:
            return self._serve_priority(link, budget, slot)
        else:
            qi = link
            q = self._queues[link]
        n = len(q)
        if n > budget:
            n = budget
        if n == 0:
            return [], []
        served: list[Packet] = []
        delivered: list[DeliveryRecord] = []
        staged = self._staged
        route_len = self._route_len
        hop_qi = self._hop_qi
        popleft = q.popleft
        for _ in range(n):
            pkt = popleft()
            served.append(pkt)
            f = pkt.flow
            h = pkt.hop
            if h == route_len[f]:
                delivered.append((f, pkt.birth, slot + 1))
            else:
                pkt.hop = h + 1
                staged.append((pkt, hop_qi[f][h]))
        self.departures[qi] += n
        self.lengths[qi] -= n
        return served, delivered

    def _serve_priority(
        self, link: int, budget: int, slot: int
    ) -> tuple[list[Packet], list[DeliveryRecord]]:
        served: list[Packet] = []
        delivered: list[DeliveryRecord] = []
        staged = self._staged
        route_len = self._route_len
        hop_qi = self._hop_qi
        buckets = self._buckets[link]
        left = budget
        for k in self._bucket_order[link]:
            q = buckets[k]
            while q and left:
                pkt = q.popleft()
                served.append(pkt)
                left -= 1
                f = pkt.flow
                h = pkt.hop
                if h == route_len[f]:
                    delivered.append((f, pkt.birth, slot + 1))
                else:
                    pkt.hop = h + 1
                    staged.append((pkt, hop_qi[f][h]))
            if not left:
                break
        n = len(served)
        if n:
            self.departures[link] += n
            self.lengths[link] -= n
        return served, delivered

    # -- views -------------------------------------------------------

    def total_backlog(self) -> int:
        return sum(self.lengths)

    def in_flight(self) -> int:
        return len(self._staged)

    def queue_length(self, link: int, hop: int | None = None) -> int:
        if self.mode == PER_HOP:
            return self.lengths[self.qindex[(link, hop)]]
        return self.lengths[link]

    def peek(self, link: int, hop: int | None = None) -> list[Packet]:
        """Buffered packets of a queue in service order (diagnostics)."""
        if self.mode == PER_HOP:
            return list(self._queues[self.qindex[(link, hop)]])
        if self.discipline == PRIORITY:
            out = []
            for k in sorted(self._buckets[link]):
                out.extend(self._buckets[link][k])
            return out
        return list(self._queues[link])


class ShadowBank:
    """Real-valued shadow counter per data queue.

    The bank is bound to the data bank's cumulative-arrival array; each
    tick at slot t adds (1+epsilon) * A(t) / t to every counter, and
    service clamps at zero.
    """

    def __init__(self, epsilon: float, paired_arrivals, initial=None):
        if epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        self.epsilon = float(epsilon)
        self.scale = 1.0 + self.epsilon
        self.paired_arrivals = paired_arrivals  # live view of cumulative A
        n = len(paired_arrivals)
        self.q = np.zeros(n, dtype=np.float64)
        if initial is not None:
            self.q[:] = initial
        self.a_cum = np.zeros(n, dtype=np.float64)
        self.d_cum = np.zeros(n, dtype=np.float64)

    @property
    def n_queues(self) -> int:
        return len(self.q)

    def tick(self, slot: int):
        """Shadow arrivals for slot t: (1+eps) times the running average
        arrival count of the paired data queue."""
        if slot < 1:
            raise ValueError("shadow tick requires slot >= 1")
        arr = np.asarray(self.paired_arrivals, dtype=np.float64)
        inc = self.scale * arr / slot
        self.q += inc
        self.a_cum += inc

    def serve(self, idx: int, budget: float):
        """Shadow service mirrors data service: q <- max(q - budget, 0)."""
        cur = self.q[idx]
        dec = cur if cur < budget else budget
        if dec > 0.0:
            self.q[idx] = cur - dec
            self.d_cum[idx] += dec

    def total(self) -> float:
        return float(self.q.sum())
