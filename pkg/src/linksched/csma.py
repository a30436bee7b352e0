"""Distributed CSMA scheduling over shadow queue lengths.

Each slot splits into a control phase of W mini-slots and a data phase.
In the control phase every link draws a uniform integer backoff in
[0, W-1]; a link whose backoff expires first among its interferers
broadcasts an INTENT message.  Links that hear an earlier INTENT stay
silent and keep their previous on/off state.  Links whose INTENT collides
(an interferer transmitting in the same mini-slot) also keep their state.
The surviving links form the decision schedule sigma(t): each of them
turns on with probability p = e^w / (e^w + 1) --- where w is a clamped,
non-decreasing function of the link's shadow queue length --- provided no
interferer was on in the previous data slot, and turns off otherwise.
The resulting transmission schedule is always feasible.

With frozen weights the schedule process is a reversible Markov chain
whose stationary law is proportional to the product of p/(1-p) over
active links; ``product_form_check`` verifies this empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .queueing import DataQueueBank, DeliveryRecord, ShadowBank
from .schedulers import StepResult
from .topology import NetworkGraph


@dataclass(frozen=True)
class WeightFunction:
    """Clamped non-decreasing map from shadow length to activation weight.

    ``log-affine``: w = ln(a*q + b); ``power``: w = (a*q)**alpha.  The
    clamp keeps the activation probability strictly inside (0, 1) so the
    schedule chain stays irreducible even at zero shadow length.
    """

    form: str = "log-affine"
    a: float = 0.1
    b: float = 0.01
    alpha: float = 1.0
    clamp: tuple[float, float] = (-6.0, 6.0)

    def __post_init__(self):
        if self.form not in ("log-affine", "power"):
            raise ValueError(f"unknown weight form {self.form!r}")
        lo, hi = self.clamp
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError("clamp bounds must be finite with lo < hi")
        if self.a <= 0:
            raise ValueError("coefficient a must be positive")
        if self.b < 0:
            raise ValueError("offset b must be >= 0")
        if self.alpha <= 0:
            raise ValueError("exponent alpha must be positive")

    def weight(self, q: float) -> float:
        lo, hi = self.clamp
        if self.form == "log-affine":
            arg = self.a * q + self.b
            floor = math.exp(lo)
            w = lo if arg <= floor else math.log(arg)
        else:
            w = (self.a * q) ** self.alpha
        return lo if w < lo else hi if w > hi else w

    def prob(self, q: float) -> float:
        w = self.weight(q)
        return 1.0 / (1.0 + math.exp(-w))


class CsmaState:
    """Per-run CSMA protocol state with per-link PRNG streams."""

    def __init__(
        self,
        graph: NetworkGraph,
        window: int = 48,
        weight_fn: WeightFunction | None = None,
        seed: int | np.random.SeedSequence = 0,
        initial_mask: int = 0,
    ):
        if window < 2:
            raise ValueError("contention window must be >= 2 mini-slots")
        self.graph = graph
        self.n_links = graph.n_links
        self.window = int(window)
        self.weight_fn = weight_fn or WeightFunction()
        self.conflict_masks = graph.conflict_masks()
        self.m_prev = initial_mask
        ss = (
            seed
            if isinstance(seed, np.random.SeedSequence)
            else np.random.SeedSequence(seed)
        )
        children = ss.spawn(2 * self.n_links)
        self.backoff_rngs = [
            np.random.Generator(np.random.PCG64(c)) for c in children[: self.n_links]
        ]
        self.coin_rngs = [
            np.random.Generator(np.random.PCG64(c)) for c in children[self.n_links :]
        ]

    def draw_backoffs(self) -> list[int]:
        return [int(r.integers(self.window)) for r in self.backoff_rngs]


def csma_control_phase(
    state: CsmaState, backoffs: Sequence[int] | None = None
) -> tuple[int, int]:
    """Run the W mini-slot contention; returns (sigma mask, collision mask).

    A link enters sigma iff its backoff expires strictly before any INTENT
    it can hear and no interferer transmits an INTENT in the same
    mini-slot.  Links already suppressed by an earlier INTENT never
    transmit, so they cannot collide.
    """
    if backoffs is None:
        backoffs = state.draw_backoffs()
    n = state.n_links
    conf = state.conflict_masks
    by_slot: dict[int, list[int]] = {}
    for l in range(n):
        by_slot.setdefault(int(backoffs[l]), []).append(l)
    sigma = 0
    collision = 0
    suppressed = 0
    for m in sorted(by_slot):
        talkers = [l for l in by_slot[m] if not suppressed >> l & 1]
        if not talkers:
            continue
        tmask = 0
        for l in talkers:
            tmask |= 1 << l
        for l in talkers:
            if conf[l] & tmask:
                collision |= 1 << l
            else:
                sigma |= 1 << l
            suppressed |= conf[l]
    return sigma, collision


def csma_data_phase(
    state: CsmaState,
    sigma: int,
    shadow_lengths: np.ndarray | None = None,
    probs: Sequence[float] | None = None,
) -> int:
    """Decide the transmission schedule from the decision schedule.

    Links in sigma with no interferer active in the previous data slot
    turn on with the activation probability computed from their current
    shadow length (or a frozen probability vector); other sigma links turn
    off; links outside sigma keep their previous state.
    """
    prev = state.m_prev
    conf = state.conflict_masks
    new = prev & ~0  # start from previous, then rewrite sigma links
    m = sigma
    while m:
        l = (m & -m).bit_length() - 1
        m &= m - 1
        bit = 1 << l
        if conf[l] & prev:
            new &= ~bit
            continue
        if probs is not None:
            p = probs[l]
        else:
            p = state.weight_fn.prob(float(shadow_lengths[l]))
        if state.coin_rngs[l].random() < p:
            new |= bit
        else:
            new &= ~bit
    state.m_prev = new
    return new


def csma_slot(
    graph: NetworkGraph,
    state: CsmaState,
    bank: DataQueueBank,
    shadow: ShadowBank,
    slot: int,
    backoffs: Sequence[int] | None = None,
) -> StepResult:
    """One full CSMA slot: contention, activation, then data and shadow
    service on every active link (budget c_l, shadow decrement c_l)."""
    sigma, _ = csma_control_phase(state, backoffs)
    mask = csma_data_phase(state, sigma, shadow_lengths=shadow.q)
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


def enumerate_feasible_schedules(
    graph: NetworkGraph, max_count: int = 100_000
) -> list[int]:
    """All feasible schedules (independent sets), sorted by mask."""
    conf = graph.conflict_masks()
    n = graph.n_links
    out: list[int] = []

    def rec(v: int, mask: int):
        if len(out) > max_count:
            raise ValueError("schedule set is not enumerable at this size")
        if v == n:
            out.append(mask)
            return
        rec(v + 1, mask)
        if not conf[v] & mask:
            rec(v + 1, mask | 1 << v)

    rec(0, 0)
    return sorted(out)


@dataclass
class ProductFormReport:
    schedules: list[int]
    empirical: dict[int, float]
    theoretical: dict[int, float]
    tv_distance: float
    n_slots: int
    probs: list[float] = field(repr=False, default_factory=list)


def product_form_check(
    graph: NetworkGraph,
    weights: Sequence[float],
    n_slots: int,
    seed: int = 0,
    window: int = 48,
) -> ProductFormReport:
    """Run the schedule chain with frozen weights and compare the empirical
    schedule distribution against the product-form stationary law

        mu(M) = (1/kappa) * prod_{l in M} p_l / (1 - p_l).
    """
    n = graph.n_links
    if len(weights) != n:
        raise ValueError(f"expected {n} weights")
    probs = [1.0 / (1.0 + math.exp(-w)) for w in weights]
    feasible = enumerate_feasible_schedules(graph)

    odds = [p / (1.0 - p) for p in probs]
    raw = {}
    for m in feasible:
        v = 1.0
        mm = m
        while mm:
            l = (mm & -mm).bit_length() - 1
            v *= odds[l]
            mm &= mm - 1
        raw[m] = v
    kappa = sum(raw.values())
    theoretical = {m: v / kappa for m, v in raw.items()}

    state = CsmaState(graph, window=window, seed=seed)
    counts = {m: 0 for m in feasible}
    for _ in range(n_slots):
        sigma, _ = csma_control_phase(state)
        mask = csma_data_phase(state, sigma, probs=probs)
        counts[mask] += 1
    empirical = {m: c / n_slots for m, c in counts.items()}
    tv = 0.5 * sum(abs(empirical[m] - theoretical[m]) for m in feasible)
    return ProductFormReport(feasible, empirical, theoretical, tv, n_slots, probs)
