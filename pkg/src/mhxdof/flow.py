"""Exact max-flow routing for wired X networks.

The sum capacity of a wired network with distributed sources and sinks is the
min-cut between the source set and the sink set, and routing achieves it.
This module computes that routing with Edmonds-Karp over ``Fraction``
capacities, peels the flow into source-to-sink paths, labels each path with
the message it carries and re-checks the result against a residual-graph cut.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

__all__ = [
    "WiredGraph",
    "FlowPath",
    "FlowSolution",
    "RoutingReport",
    "max_flow",
    "max_flow_routing",
    "verify_routing",
    "brute_force_min_cut",
]

SUPER_SOURCE = ("__s__",)
SUPER_SINK = ("__t__",)

Node = Hashable
Edge = tuple


def _key(node):
    # deterministic ordering across mixed node types
    return repr(node)


def _as_capacity(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    return Fraction(value)


@dataclass(frozen=True)
class WiredGraph:
    """Directed acyclic graph with positive rational edge capacities.

    ``sources`` and ``sinks`` are ordered; source ``m`` (1-based position) and
    sink ``n`` define the message ``W_mn``.
    """

    nodes: tuple
    capacities: Mapping[tuple, Fraction]
    sources: tuple
    sinks: tuple

    @classmethod
    def from_edges(cls, edges: Iterable, sources: Sequence, sinks: Sequence) -> "WiredGraph":
        caps: dict = {}
        nodes = set(sources) | set(sinks)
        for item in edges:
            if len(item) == 2:
                u, v = item
                c = 1
            else:
                u, v, c = item
            caps[(u, v)] = caps.get((u, v), Fraction(0)) + _as_capacity(c)
            nodes.update((u, v))
        graph = cls(tuple(sorted(nodes, key=_key)), caps, tuple(sources), tuple(sinks))
        graph.validate()
        return graph

    def validate(self) -> None:
        for (u, v), c in self.capacities.items():
            if c <= 0:
                raise ValueError(f"nonpositive capacity {c} on edge {u}->{v}")
        if set(self.sources) & set(self.sinks):
            raise ValueError("a node cannot be both a source and a sink")
        if len(set(self.sources)) != len(self.sources) or len(set(self.sinks)) != len(self.sinks):
            raise ValueError("duplicate source or sink")
        if self._has_cycle():
            raise ValueError("cyclic graph")

    def successors(self, u) -> list:
        return sorted((v for (a, v) in self.capacities if a == u), key=_key)

    def _has_cycle(self) -> bool:
        adj: dict = {}
        for (u, v) in self.capacities:
            adj.setdefault(u, []).append(v)
        state: dict = {}
        for start in adj:
            if state.get(start):
                continue
            stack = [(start, iter(adj.get(start, ())))]
            state[start] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                elif state.get(nxt) == 1:
                    return True
                elif not state.get(nxt):
                    state[nxt] = 1
                    stack.append((nxt, iter(adj.get(nxt, ()))))
        return False


@dataclass(frozen=True)
class FlowPath:
    source: object
    sink: object
    rate: Fraction
    nodes: tuple
    message: str


@dataclass
class FlowSolution:
    edge_flows: dict
    paths: list
    sum_rate: Fraction
    cut: frozenset = field(default_factory=frozenset)

    def to_dict(self) -> dict:
        return {
            "sum_rate": _frac_str(self.sum_rate),
            "paths": [
                {
                    "message": p.message,
                    "source": str(p.source),
                    "sink": str(p.sink),
                    "rate": _frac_str(p.rate),
                    "nodes": [str(n) for n in p.nodes],
                }
                for p in self.paths
            ],
            "edge_flows": [
                {"tail": str(u), "head": str(v), "flow": _frac_str(f)}
                for (u, v), f in sorted(self.edge_flows.items(), key=lambda kv: (_key(kv[0][0]), _key(kv[0][1])))
                if f != 0
            ],
            "cut": sorted(str(n) for n in self.cut),
        }


@dataclass
class RoutingReport:
    passed: bool
    flow_value: Fraction
    cut_value: Fraction
    cut: frozenset
    failures: list

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "flow_value": _frac_str(self.flow_value),
            "cut_value": _frac_str(self.cut_value),
            "cut": sorted(str(n) for n in self.cut),
            "failures": list(self.failures),
        }


def _frac_str(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def max_flow(capacity: Mapping[tuple, object], source, sink):
    """Edmonds-Karp maximum flow.

    Parameters
    ----------
    capacity : mapping ``(u, v) -> capacity``
        Capacities may be ``Fraction``/``int`` or ``math.inf``.
    source, sink : hashable
        Terminal nodes.

    Returns
    -------
    value : Fraction
    flow : dict ``(u, v) -> Fraction`` on the original arcs
    reachable : frozenset of nodes reachable from ``source`` in the final
        residual graph (the source side of a minimum cut).
    """
    cap = {e: (c if c == math.inf else _as_capacity(c)) for e, c in capacity.items()}
    flow = {e: Fraction(0) for e in cap}
    order = _adjacency(cap)

    def residual(u, v):
        return cap.get((u, v), 0) - flow.get((u, v), 0) + flow.get((v, u), 0)

    value = Fraction(0)
    while True:
        parent = {source: None}
        queue = deque([source])
        while queue and sink not in parent:
            u = queue.popleft()
            for v in order.get(u, ()):
                if v not in parent and residual(u, v) > 0:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            break
        path = []
        v = sink
        while parent[v] is not None:
            path.append((parent[v], v))
            v = parent[v]
        bottleneck = min(residual(u, v) for u, v in path)
        if bottleneck == math.inf:
            raise ValueError("unbounded flow: a source-sink path has no finite arc")
        for (u, v) in path:
            back = min(flow.get((v, u), Fraction(0)), bottleneck)
            if back:
                flow[(v, u)] -= back
            if bottleneck - back:
                flow[(u, v)] += bottleneck - back
        value += bottleneck

    reachable = _residual_reachable(lambda u, v: residual(u, v) > 0, order, source)
    return value, flow, reachable


def _adjacency(arcs) -> dict:
    adj: dict = {}
    for (u, v) in arcs:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    return {u: sorted(vs, key=_key) for u, vs in adj.items()}


def _residual_reachable(open_arc, order, source) -> frozenset:
    seen = {source}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in order.get(u, ()):
            if v not in seen and open_arc(u, v):
                seen.add(v)
                queue.append(v)
    return frozenset(seen)


def _augmented(graph: WiredGraph) -> dict:
    caps = dict(graph.capacities)
    for s in graph.sources:
        caps[(SUPER_SOURCE, s)] = math.inf
    for d in graph.sinks:
        caps[(d, SUPER_SINK)] = math.inf
    return caps


def _decompose(graph: WiredGraph, edge_flows: dict) -> list:
    """Peel shortest source-to-sink paths off the flow, lexicographic ties."""
    remaining = {e: f for e, f in edge_flows.items() if f > 0}
    src_index = {s: i + 1 for i, s in enumerate(graph.sources)}
    sink_index = {d: i + 1 for i, d in enumerate(graph.sinks)}
    paths = []
    while True:
        adj: dict = {}
        for (u, v) in remaining:
            adj.setdefault(u, []).append(v)
        for u in adj:
            adj[u].sort(key=_key)
        parent: dict = {}
        queue = deque()
        for s in sorted(graph.sources, key=_key):
            parent[s] = None
            queue.append(s)
        end = None
        while queue:
            u = queue.popleft()
            if u in sink_index:
                end = u
                break
            for v in adj.get(u, ()):
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        if end is None:
            break
        nodes = [end]
        while parent[nodes[-1]] is not None:
            nodes.append(parent[nodes[-1]])
        nodes.reverse()
        arcs = list(zip(nodes[:-1], nodes[1:]))
        rate = min(remaining[a] for a in arcs)
        for a in arcs:
            remaining[a] -= rate
            if remaining[a] == 0:
                del remaining[a]
        s, d = nodes[0], nodes[-1]
        paths.append(FlowPath(s, d, rate, tuple(nodes), f"W{src_index[s]}{sink_index[d]}"))
    return paths


def max_flow_routing(network) -> FlowSolution:
    """Sum-capacity routing for a wired network.

    ``network`` is a :class:`WiredGraph` or a wired
    :class:`~mhxdof.network.LayeredNetwork`.  A super-source and super-sink
    are attached with infinite arcs, the max flow is computed exactly and
    decomposed into at most ``|E|`` message-labelled paths.
    """
    graph = network if isinstance(network, WiredGraph) else network.to_wired_graph()
    graph.validate()
    value, flow, reachable = max_flow(_augmented(graph), SUPER_SOURCE, SUPER_SINK)
    edge_flows = {e: flow[e] for e in graph.capacities}
    paths = _decompose(graph, edge_flows)
    cut = frozenset(n for n in reachable if n != SUPER_SOURCE)
    return FlowSolution(edge_flows, paths, value, cut)


def _cut_capacity(graph: WiredGraph, side: frozenset) -> Fraction:
    return sum((c for (u, v), c in graph.capacities.items() if u in side and v not in side), Fraction(0))


def verify_routing(network, solution: FlowSolution) -> RoutingReport:
    """Re-check a routing solution and certify optimality with a cut."""
    graph = network if isinstance(network, WiredGraph) else network.to_wired_graph()
    failures = []
    flows = solution.edge_flows
    for e, f in flows.items():
        if e not in graph.capacities:
            failures.append(f"flow on unknown edge {e}")
            continue
        if f < 0:
            failures.append(f"negative flow on {e}")
        if f > graph.capacities[e]:
            failures.append(f"capacity violation on {e}: {f} > {graph.capacities[e]}")
    terminals = set(graph.sources) | set(graph.sinks)
    balance: dict = {}
    for (u, v), f in flows.items():
        balance[u] = balance.get(u, 0) - f
        balance[v] = balance.get(v, 0) + f
    for node, b in sorted(balance.items(), key=lambda kv: _key(kv[0])):
        if node not in terminals and b != 0:
            failures.append(f"conservation violated at {node}: net inflow {b}")
    out_of_sources = sum((f for (u, v), f in flows.items() if u in graph.sources), Fraction(0)) - sum(
        (f for (u, v), f in flows.items() if v in graph.sources), Fraction(0)
    )

    # paths: single-source origin, sink terminus, consistent with edge flows
    along: dict = {}
    for p in solution.paths:
        if p.nodes[0] not in graph.sources or p.nodes[-1] not in graph.sinks:
            failures.append(f"path {p.nodes} does not run from a source to a sink")
        if any(n in graph.sources for n in p.nodes[1:]):
            failures.append(f"path {p.nodes} passes through a second source")
        for a in zip(p.nodes[:-1], p.nodes[1:]):
            along[a] = along.get(a, 0) + p.rate
        s_idx = graph.sources.index(p.nodes[0]) + 1 if p.nodes[0] in graph.sources else 0
        d_idx = graph.sinks.index(p.nodes[-1]) + 1 if p.nodes[-1] in graph.sinks else 0
        if p.message != f"W{s_idx}{d_idx}":
            failures.append(f"path {p.nodes} labelled {p.message}, expected W{s_idx}{d_idx}")
    for e in set(along) | {e for e, f in flows.items() if f != 0}:
        if along.get(e, 0) != flows.get(e, 0):
            failures.append(f"path rates on {e} sum to {along.get(e, 0)}, edge flow is {flows.get(e, 0)}")
    path_total = sum((p.rate for p in solution.paths), Fraction(0))
    if path_total != solution.sum_rate:
        failures.append(f"path rates sum to {path_total}, reported sum rate {solution.sum_rate}")
    if out_of_sources != solution.sum_rate:
        failures.append(f"net source outflow {out_of_sources} differs from sum rate {solution.sum_rate}")

    # residual-graph cut from the claimed flows; super-arcs carry the net
    # outflow of each source and the net inflow of each sink
    caps = _augmented(graph)
    aug_flow = dict(flows)
    for s in graph.sources:
        aug_flow[(SUPER_SOURCE, s)] = -balance.get(s, 0)
    for d in graph.sinks:
        aug_flow[(d, SUPER_SINK)] = balance.get(d, 0)

    def open_arc(u, v):
        r = caps.get((u, v), 0) - aug_flow.get((u, v), 0) + aug_flow.get((v, u), 0)
        return r > 0

    reach = _residual_reachable(open_arc, _adjacency(caps), SUPER_SOURCE)
    side = frozenset(n for n in reach if n != SUPER_SOURCE)
    if SUPER_SINK in reach:
        cut_value = Fraction(-1)
        failures.append("suboptimal: an augmenting path remains in the residual graph")
    else:
        cut_value = _cut_capacity(graph, side)
        if cut_value != out_of_sources:
            failures.append(f"flow value {out_of_sources} differs from cut capacity {cut_value}")
    return RoutingReport(not failures, solution.sum_rate, cut_value, side, failures)


def brute_force_min_cut(graph: WiredGraph) -> Fraction:
    """Minimum source-set/sink-set cut by enumerating all node bipartitions."""
    free = [n for n in graph.nodes if n not in graph.sources and n not in graph.sinks]
    best = None
    for mask in range(1 << len(free)):
        side = set(graph.sources) | {free[i] for i in range(len(free)) if mask >> i & 1}
        value = _cut_capacity(graph, frozenset(side))
        if best is None or value < best:
            best = value
    return best
