"""Scenario file schema: one YAML document describing a full run.

Top-level keys::

    name: optional string
    nodes: [a, b, ...]
    links: [{from: a, to: b, capacity: 1}, ...]        # ids are list positions
    interference: node-exclusive | [[i, j], ...]       # link-id pairs
    flows: [{route: [link ids], rate: 0.3}, ...]
    scheduler: bp | hq-mws | plq-mws | flq-mws | plq-csma | flq-csma
    epsilon: 0.005
    horizon: 1000000
    seed: 0
    stride: 100
    csma: {window: 48, weight: {form: log-affine, a: 0.1, b: 0.01,
                                alpha: 1.0, clamp: [-6, 6]}}
    allow_uncovered_links: false

Parsing errors cite the offending field; YAML syntax errors cite the line.
"""

from __future__ import annotations

import io
from pathlib import Path

import yaml

from .csma import WeightFunction
from .schedulers import SchedulerKind
from .sim import CsmaParams, Scenario
from .topology import ValidationError, build_network, validate_flows


class ScenarioError(ValueError):
    """A scenario document is malformed; the message cites the field."""


def _require(doc: dict, key: str, kind, where: str = ""):
    path = f"{where}.{key}" if where else key
    if key not in doc:
        raise ScenarioError(f"missing required key: {path}")
    val = doc[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ScenarioError(
            f"{path}: expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}"
        )
    return val


def _optional(doc: dict, key: str, kind, default, where: str = ""):
    if key not in doc:
        return default
    return _require(doc, key, kind, where)


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")

    nodes = _require(doc, "nodes", list)
    raw_links = _require(doc, "links", list)
    links = []
    for i, entry in enumerate(raw_links):
        where = f"links[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{where}: expected a mapping")
        src = _require(entry, "from", str, where)
        dst = _require(entry, "to", str, where)
        cap = _optional(entry, "capacity", int, 1, where)
        links.append((src, dst, cap))

    interf = doc.get("interference", "node-exclusive")
    if isinstance(interf, list):
        pairs = []
        for i, p in enumerate(interf):
            if not (isinstance(p, (list, tuple)) and len(p) == 2):
                raise ScenarioError(f"interference[{i}]: expected a pair of link ids")
            pairs.append((int(p[0]), int(p[1])))
        interference = pairs
    elif isinstance(interf, str):
        interference = interf
    else:
        raise ScenarioError("interference: expected 'node-exclusive' or a pair list")

    try:
        graph = build_network(nodes, links, interference)
    except ValidationError as e:
        raise ScenarioError(str(e)) from e

    raw_flows = _require(doc, "flows", list)
    flow_descs = []
    for i, entry in enumerate(raw_flows):
        where = f"flows[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{where}: expected a mapping")
        route = _require(entry, "route", list, where)
        rate = _optional(entry, "rate", float, 0.0, where)
        flow_descs.append((tuple(int(l) for l in route), float(rate)))
    allow_uncovered = _optional(doc, "allow_uncovered_links", bool, False)
    try:
        flows, _ = validate_flows(graph, flow_descs, allow_uncovered_links=allow_uncovered)
    except ValidationError as e:
        raise ScenarioError(str(e)) from e

    sched_name = _require(doc, "scheduler", str)
    try:
        scheduler = SchedulerKind(sched_name)
    except ValueError:
        valid = ", ".join(k.value for k in SchedulerKind)
        raise ScenarioError(f"scheduler: unknown value {sched_name!r} (one of: {valid})")

    csma_doc = _optional(doc, "csma", dict, {})
    weight_doc = _optional(csma_doc, "weight", dict, {}, "csma")
    clamp = _optional(weight_doc, "clamp", list, [-6.0, 6.0], "csma.weight")
    if len(clamp) != 2:
        raise ScenarioError("csma.weight.clamp: expected [low, high]")
    try:
        weight = WeightFunction(
            form=_optional(weight_doc, "form", str, "log-affine", "csma.weight"),
            a=_optional(weight_doc, "a", float, 0.1, "csma.weight"),
            b=_optional(weight_doc, "b", float, 0.01, "csma.weight"),
            alpha=_optional(weight_doc, "alpha", float, 1.0, "csma.weight"),
            clamp=(float(clamp[0]), float(clamp[1])),
        )
        csma = CsmaParams(
            window=_optional(csma_doc, "window", int, 48, "csma"), weight=weight
        )
        return Scenario(
            graph=graph,
            flows=flows,
            scheduler=scheduler,
            epsilon=_optional(doc, "epsilon", float, 0.005),
            horizon=_optional(doc, "horizon", int, 1_000_000),
            seed=_optional(doc, "seed", int, 0),
            stride=_optional(doc, "stride", int, 100),
            csma=csma,
            allow_uncovered_links=allow_uncovered,
            name=_optional(doc, "name", str, ""),
        )
    except ScenarioError:
        raise
    except ValueError as e:
        raise ScenarioError(str(e)) from e


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    return loads_scenario(text)


def loads_scenario(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(io.StringIO(text))
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark else "?"
        raise ScenarioError(f"YAML parse error at line {line}: {e.problem}") from e
    return scenario_from_dict(doc)


def scenario_to_dict(sc: Scenario) -> dict:
    doc = {
        "name": sc.name,
        "nodes": list(sc.graph.nodes),
        "links": [
            {"from": l.src, "to": l.dst, "capacity": l.capacity} for l in sc.graph.links
        ],
        "interference": "node-exclusive"
        if sc.graph.node_exclusive
        else sorted(
            [a, b]
            for a in range(sc.graph.n_links)
            for b in sc.graph.interference[a]
            if a < b
        ),
        "flows": [{"route": list(f.route), "rate": f.rate} for f in sc.flows],
        "scheduler": sc.scheduler.value,
        "epsilon": sc.epsilon,
        "horizon": sc.horizon,
        "seed": sc.seed,
        "stride": sc.stride,
        "csma": {
            "window": sc.csma.window,
            "weight": {
                "form": sc.csma.weight.form,
                "a": sc.csma.weight.a,
                "b": sc.csma.weight.b,
                "alpha": sc.csma.weight.alpha,
                "clamp": list(sc.csma.weight.clamp),
            },
        },
        "allow_uncovered_links": sc.allow_uncovered_links,
    }
    return doc


def dump_scenario(sc: Scenario, path: str | Path):
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(sc), sort_keys=False))
