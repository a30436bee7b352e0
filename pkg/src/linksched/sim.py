"""Discrete-time engine: arrivals, the slot loop, metrics, stability.

A run is a pure function of its scenario: the seed fixes every random
stream (one Poisson substream per flow, two CSMA substreams per link), so
repeated runs are bit-identical.  Within a slot the order is fixed:
arrivals land, shadow counters tick, the scheduler decides, data and
shadow service happen.  Packets transmitted in slot t become servable at
the next hop (or are counted delivered) at slot t+1.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .csma import CsmaState, WeightFunction, csma_slot
from .queueing import FIFO, PER_HOP, PER_LINK, DataQueueBank, ShadowBank
from .schedule_engine import MaxWeightSolver, is_feasible
from .schedulers import (
    BPQueueBank,
    HopClassLayout,
    SchedulerKind,
    StepResult,
    back_pressure_step,
    flq_mws_step,
    hq_mws_step,
    plq_mws_step,
)
from .topology import FlowSet, NetworkGraph, validate_flows

ARRIVAL_CHUNK = 1 << 16


@dataclass(frozen=True)
class CsmaParams:
    window: int = 48
    weight: WeightFunction = field(default_factory=WeightFunction)


@dataclass(frozen=True)
class Scenario:
    """Complete, seedable description of one simulation run."""

    graph: NetworkGraph
    flows: FlowSet
    scheduler: SchedulerKind
    epsilon: float = 0.005
    horizon: int = 1_000_000
    seed: int = 0
    stride: int = 100
    csma: CsmaParams = field(default_factory=CsmaParams)
    allow_uncovered_links: bool = False
    name: str = ""

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1 slot")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")

    def with_uniform_rate(self, rate: float) -> "Scenario":
        return replace(self, flows=self.flows.with_uniform_rate(rate))

    def with_overrides(self, **kw) -> "Scenario":
        return replace(self, **kw)

    @property
    def total_rate(self) -> float:
        return float(sum(self.flows.rates()))


@dataclass
class SimTrace:
    """Everything a run leaves behind; the source of all metrics."""

    horizon: int
    stride: int
    scheduler: str
    flow_rates: tuple[float, ...]
    sample_slots: np.ndarray
    total_backlog: np.ndarray
    queue_backlog: np.ndarray  # (n_samples, n_queues)
    queue_labels: list[str]
    injected_per_flow: np.ndarray
    delivered_per_flow: np.ndarray
    delay_sum_per_flow: np.ndarray
    scheduled_slots_per_link: np.ndarray
    served_per_link: np.ndarray
    wasted_service_per_link: np.ndarray
    delivery_records: np.ndarray | None = None  # (n, 3): flow, birth, delivery

    @property
    def delivered(self) -> int:
        return int(self.delivered_per_flow.sum())

    @property
    def injected(self) -> int:
        return int(self.injected_per_flow.sum())

    @property
    def final_backlog(self) -> int:
        return int(self.total_backlog[-1])

    @property
    def peak_backlog(self) -> int:
        return int(self.total_backlog.max())


@dataclass(frozen=True)
class StabilityVerdict:
    status: str  # "stable" | "unstable" | "inconclusive"
    slope: float  # packets/slot over the tail window
    final_backlog: int
    peak_backlog: int


def poisson_arrivals(rate: float, rng: np.random.Generator) -> int:
    """One slot's exogenous packet count for a flow."""
    if rate < 0:
        raise ValueError("arrival rate must be >= 0")
    return int(rng.poisson(rate))


def flow_rngs(scenario: Scenario) -> list[np.random.Generator]:
    """Per-flow arrival substreams; layout is part of the determinism
    contract (flows first, then CSMA backoff and coin streams)."""
    root = np.random.SeedSequence(scenario.seed)
    children = root.spawn(len(scenario.flows) + 1)
    return [np.random.Generator(np.random.PCG64(c)) for c in children[:-1]]


def _csma_seed(scenario: Scenario) -> np.random.SeedSequence:
    root = np.random.SeedSequence(scenario.seed)
    return root.spawn(len(scenario.flows) + 1)[-1]


def run(
    scenario: Scenario,
    observer: Callable | None = None,
    debug_checks: bool = False,
    record_deliveries: bool = False,
) -> SimTrace:
    """Execute the scenario for its full horizon and return the trace."""
    graph = scenario.graph
    kind = scenario.scheduler
    flows, incidence = validate_flows(
        graph, scenario.flows.flows, allow_uncovered_links=scenario.allow_uncovered_links
    )
    T = scenario.horizon
    stride = scenario.stride
    n_flows = len(flows)
    rates = flows.rates()
    caps = graph.capacities()

    gens = flow_rngs(scenario)

    # queue banks + per-slot step closure
    solver: MaxWeightSolver | None = None
    shadow: ShadowBank | None = None
    if kind is SchedulerKind.BP:
        bank = BPQueueBank(graph, flows)
        solver = MaxWeightSolver(graph)

        def step(slot: int) -> StepResult:
            return back_pressure_step(graph, incidence, bank, solver, slot)

    elif kind is SchedulerKind.HQ_MWS:
        bank = DataQueueBank(graph, flows, incidence, PER_HOP)
        shadow = ShadowBank(scenario.epsilon, bank.arrivals)
        solver = MaxWeightSolver(graph)
        layout = HopClassLayout(graph, incidence, bank)

        def step(slot: int) -> StepResult:
            return hq_mws_step(graph, bank, shadow, solver, slot, layout)

    elif kind in (SchedulerKind.PLQ_MWS, SchedulerKind.FLQ_MWS):
        bank = DataQueueBank(graph, flows, incidence, PER_LINK, kind.discipline)
        shadow = ShadowBank(scenario.epsilon, bank.arrivals)
        solver = MaxWeightSolver(graph)
        mws = plq_mws_step if kind is SchedulerKind.PLQ_MWS else flq_mws_step

        def step(slot: int) -> StepResult:
            return mws(graph, bank, shadow, solver, slot)

    elif kind.is_csma:
        bank = DataQueueBank(graph, flows, incidence, PER_LINK, kind.discipline)
        shadow = ShadowBank(scenario.epsilon, bank.arrivals)
        state = CsmaState(
            graph,
            window=scenario.csma.window,
            weight_fn=scenario.csma.weight,
            seed=_csma_seed(scenario),
        )
        backoff_buf: list[list[int]] = []

        def step(slot: int) -> StepResult:
            i = (slot - 1) % ARRIVAL_CHUNK
            return csma_slot(graph, state, bank, shadow, slot, backoffs=backoff_buf[i])

    else:  # pragma: no cover
        raise ValueError(f"unhandled scheduler {kind}")

    n_samples = T // stride + (1 if T % stride else 0)
    sample_slots = np.zeros(n_samples, dtype=np.int64)
    total_backlog = np.zeros(n_samples, dtype=np.int64)
    queue_backlog = np.zeros((n_samples, bank.n_queues), dtype=np.int64)
    delivered_per_flow = [0] * n_flows
    delay_sum_per_flow = [0] * n_flows
    scheduled_slots = [0] * graph.n_links
    served_per_link = [0] * graph.n_links
    wasted = [0] * graph.n_links
    rec_flow = array("q") if record_deliveries else None
    rec_birth = array("q") if record_deliveries else None
    rec_deliv = array("q") if record_deliveries else None

    arr_counts: list[list[int]] = [[] for _ in range(n_flows)]
    flow_ids = list(range(n_flows))
    sample_i = 0
    for slot in range(1, T + 1):
        ci = (slot - 1) % ARRIVAL_CHUNK
        if ci == 0:
            m = min(ARRIVAL_CHUNK, T - slot + 1)
            arr_counts = [gens[s].poisson(rates[s], size=m).tolist() for s in flow_ids]
            if kind.is_csma:
                backoff_buf = np.stack(
                    [r.integers(state.window, size=m) for r in state.backoff_rngs],
                    axis=1,
                ).tolist()

        bank.land_staged()
        for s in flow_ids:
            n = arr_counts[s][ci]
            if n:
                bank.inject_exogenous(s, n, slot)
        if shadow is not None:
            shadow.tick(slot)

        result = step(slot)

        if result.delivered:
            for f, birth, deliv in result.delivered:
                delivered_per_flow[f] += 1
                delay_sum_per_flow[f] += deliv - birth
                if rec_flow is not None:
                    rec_flow.append(f)
                    rec_birth.append(birth)
                    rec_deliv.append(deliv)
        if result.served:
            for l, n in result.served.items():
                scheduled_slots[l] += 1
                served_per_link[l] += n
                wasted[l] += caps[l] - n

        if debug_checks:
            assert is_feasible(graph, result.mask), f"infeasible schedule at slot {slot}"
        if observer is not None:
            observer(slot, result, bank, shadow)

        if slot % stride == 0 or slot == T:
            sample_slots[sample_i] = slot
            total_backlog[sample_i] = sum(bank.lengths)
            queue_backlog[sample_i] = bank.lengths
            sample_i += 1

    records = None
    if record_deliveries:
        records = np.stack(
            [np.asarray(rec_flow), np.asarray(rec_birth), np.asarray(rec_deliv)],
            axis=1,
        ) if len(rec_flow) else np.zeros((0, 3), dtype=np.int64)

    return SimTrace(
        horizon=T,
        stride=stride,
        scheduler=kind.value,
        flow_rates=rates,
        sample_slots=sample_slots[:sample_i],
        total_backlog=total_backlog[:sample_i],
        queue_backlog=queue_backlog[:sample_i],
        queue_labels=list(bank.labels),
        injected_per_flow=np.array(bank.injected, dtype=np.int64),
        delivered_per_flow=np.array(delivered_per_flow, dtype=np.int64),
        delay_sum_per_flow=np.array(delay_sum_per_flow, dtype=np.int64),
        scheduled_slots_per_link=np.array(scheduled_slots, dtype=np.int64),
        served_per_link=np.array(served_per_link, dtype=np.int64),
        wasted_service_per_link=np.array(wasted, dtype=np.int64),
        delivery_records=records,
    )


def average_delay(trace: SimTrace) -> float:
    """Mean (delivery - birth) over all delivered packets, in slots."""
    n = trace.delivered
    if n == 0:
        raise ValueError("no packets were delivered")
    return float(trace.delay_sum_per_flow.sum()) / n


def stability_estimate(trace: SimTrace, eta: float | None = None) -> StabilityVerdict:
    """Classify the run from the tail of the backlog series.

    The slope is the least-squares fit of total backlog over the second
    half of the run.  A run is unstable when the slope exceeds eta
    (default max(1e-3, 1% of the total arrival rate)) and the final
    backlog clearly exceeds the mid-run level; stable when the slope is
    below eta/10 and the backlog stayed bounded; inconclusive otherwise.
    """
    T = trace.horizon
    if T < 10_000:
        raise ValueError("stability estimation needs a horizon of >= 1e4 slots")
    if eta is None:
        eta = max(1e-3, 0.01 * sum(trace.flow_rates))
    slots = trace.sample_slots
    backlog = trace.total_backlog.astype(np.float64)
    tail = slots >= T // 2
    mid = (slots >= T // 4) & (slots <= T // 2)
    x = slots[tail].astype(np.float64)
    y = backlog[tail]
    slope = float(np.polyfit(x, y, 1)[0]) if len(x) > 1 else 0.0
    mid_mean = float(backlog[mid].mean()) if mid.any() else 0.0
    final = trace.final_backlog
    # A linearly diverging backlog ends near 8/3 of its [T/4, T/2] mean;
    # a stationary one stays near 1x.  The factor 2 separates the two.
    growth_floor = 2.0 * max(mid_mean, 1.0)
    bounded_cap = 2.0 * max(mid_mean, 10.0 * max(sum(trace.flow_rates), 1.0))
    if slope > eta and final > growth_floor:
        status = "unstable"
    elif slope < eta / 10.0 and final <= bounded_cap:
        status = "stable"
    else:
        status = "inconclusive"
    return StabilityVerdict(status, slope, final, trace.peak_backlog)
