"""Exact optimal-throughput-region membership and boundary search.

A load vector is supportable iff it is dominated by a convex combination
of maximal feasible schedules, scaled by link capacities.  The membership
test solves, in exact rational arithmetic,

    maximize theta
    s.t.     theta * rho_l <= sum_M x_M * c_l * M_l   for every link l
             sum_M x_M <= 1,   x >= 0

where rho_l is the per-link offered load induced by the flow rates.  The
optimum theta* is the largest uniform scaling of the rates that stays
supportable: theta* > 1 means strictly inside the region, theta* = 1 the
boundary, theta* < 1 outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .schedule_engine import Schedule, enumerate_maximal_schedules
from .topology import FlowSet, NetworkGraph


class DegenerateDirectionError(ValueError):
    """Boundary search needs a nonzero, nonnegative load direction."""


@dataclass(frozen=True)
class MembershipResult:
    status: str  # "strictly-inside" | "boundary" | "outside"
    theta: float  # math.inf when the load vector is zero
    theta_exact: Fraction | None
    binding_links: tuple[int, ...]
    support: tuple[tuple[Schedule, float], ...]

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.theta)


def _simplex_max(
    c: list[Fraction], rows: list[list[Fraction]], rhs: list[Fraction]
) -> tuple[str, Fraction | None, list[Fraction] | None]:
    """Exact primal simplex for  max c.x  s.t.  A x <= b, x >= 0, b >= 0.

    Bland's rule guarantees termination.  Returns ("optimal", value, x)
    or ("unbounded", None, None).
    """
    m, n = len(rows), len(c)
    zero, one = Fraction(0), Fraction(1)
    # tableau rows: [A | I | b]
    tab = [rows[i] + [one if j == i else zero for j in range(m)] + [rhs[i]] for i in range(m)]
    cost = list(c) + [zero] * (m + 1)
    basis = [n + i for i in range(m)]

    while True:
        enter = -1
        for j in range(n + m):  # Bland: smallest improving index
            if cost[j] > 0:
                enter = j
                break
        if enter < 0:
            x = [zero] * n
            for i, b in enumerate(basis):
                if b < n:
                    x[b] = tab[i][-1]
            return "optimal", -cost[-1], x
        leave, best = -1, None
        for i in range(m):
            a = tab[i][enter]
            if a > 0:
                ratio = tab[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave < 0:
            return "unbounded", None, None
        piv = tab[leave][enter]
        tab[leave] = [v / piv for v in tab[leave]]
        for i in range(m):
            if i != leave and tab[i][enter] != 0:
                f = tab[i][enter]
                tab[i] = [v - f * p for v, p in zip(tab[i], tab[leave])]
        if cost[enter] != 0:
            f = cost[enter]
            cost = [v - f * p for v, p in zip(cost, tab[leave])]
        basis[leave] = enter


def offered_load(graph: NetworkGraph, flows: FlowSet, rates: Sequence[float] | None = None):
    """Per-link offered load rho_l as exact fractions."""
    if rates is None:
        rates = flows.rates()
    if len(rates) != len(flows):
        raise ValueError(f"expected {len(flows)} rates, got {len(rates)}")
    rho = [Fraction(0)] * graph.n_links
    for f in flows:
        r = Fraction(rates[f.id])
        if r < 0:
            raise ValueError(f"flow {f.id}: negative rate")
        for l in f.route:
            rho[l] += r
    return rho


def region_membership(
    graph: NetworkGraph,
    flows: FlowSet,
    rates: Sequence[float] | None = None,
    boundary_tol: float = 1e-9,
) -> MembershipResult:
    """Classify a rate vector against the supportable-load region."""
    rho = offered_load(graph, flows, rates)
    sched = enumerate_maximal_schedules(graph)
    masks = sched.masks()
    caps = graph.capacities()
    k = len(masks)

    active_links = [l for l in range(graph.n_links) if rho[l] > 0]
    if not active_links:
        return MembershipResult("strictly-inside", math.inf, None, (), ())

    # variables: (theta, x_1..x_k)
    c = [Fraction(1)] + [Fraction(0)] * k
    rows, rhs = [], []
    for l in active_links:
        row = [rho[l]] + [
            -Fraction(caps[l]) if masks[j] >> l & 1 else Fraction(0) for j in range(k)
        ]
        rows.append(row)
        rhs.append(Fraction(0))
    rows.append([Fraction(0)] + [Fraction(1)] * k)
    rhs.append(Fraction(1))

    status, value, x = _simplex_max(c, rows, rhs)
    if status == "unbounded":  # cannot happen with a nonzero load, kept for safety
        return MembershipResult("strictly-inside", math.inf, None, (), ())
    theta = value
    xs = x[1:]

    binding = []
    for l in active_links:
        served = sum(
            Fraction(caps[l]) * xs[j] for j in range(k) if masks[j] >> l & 1
        )
        if served == theta * rho[l]:
            binding.append(l)
    support = tuple(
        (sched.schedules[j], float(xs[j])) for j in range(k) if xs[j] > 0
    )

    theta_f = float(theta)
    if theta == 1 or abs(theta_f - 1.0) <= boundary_tol:
        label = "boundary"
    elif theta > 1:
        label = "strictly-inside"
    else:
        label = "outside"
    return MembershipResult(label, theta_f, theta, tuple(binding), support)


def boundary_search(
    graph: NetworkGraph, flows: FlowSet, direction: Sequence[float] | None = None
) -> float:
    """Largest t such that t * direction is supportable (one LP solve).

    The direction defaults to the flows' own rates and must be a nonzero,
    nonnegative vector.
    """
    if direction is None:
        direction = flows.rates()
    if any(d < 0 for d in direction):
        raise DegenerateDirectionError("direction must be nonnegative")
    if all(d == 0 for d in direction):
        raise DegenerateDirectionError("direction must be nonzero")
    result = region_membership(graph, flows, rates=direction)
    return result.theta
