import dataclasses
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhxdof.flow import WiredGraph, brute_force_min_cut, max_flow, max_flow_routing, verify_routing
from mhxdof.network import parse_network

from conftest import fixture_path, load_fixture
from oracles import brute_min_cut_fraction


def random_dag(rnd, n_nodes, density):
    """Nodes 0..n-1 in topological order; 0,1 are sources, the last two sinks."""
    edges = []
    for u in range(n_nodes):
        for v in range(u + 1, n_nodes):
            if rnd.random() < density:
                edges.append((u, v, Fraction(rnd.randint(1, 9), rnd.randint(1, 4))))
    if not edges:
        edges.append((0, n_nodes - 1, Fraction(1)))
    return WiredGraph.from_edges(edges, (0, 1), (n_nodes - 2, n_nodes - 1))


def test_butterfly_frozen_value():
    # hand-checked cut {s1, s2, v2^1, v3^1, v2^2, v3^2}: arcs s1->v1^1 (1),
    # v2^2->v1^3 (1/3), v2^2->v2^3 (1/2), v3^2->v2^3 (1) sum to 17/6
    net = load_fixture("wired_butterfly")
    sol = max_flow_routing(net)
    assert sol.sum_rate == Fraction(17, 6)
    rep = verify_routing(net, sol)
    assert rep.passed, rep.failures
    assert rep.cut_value == Fraction(17, 6)
    assert brute_force_min_cut(net.to_wired_graph()) == Fraction(17, 6)


def test_paths_carry_message_labels():
    sol = max_flow_routing(load_fixture("wired_butterfly"))
    for p in sol.paths:
        assert p.message == f"W{p.nodes[0][1]}{p.nodes[-1][1]}"
        assert p.rate > 0
    assert sum(p.rate for p in sol.paths) == sol.sum_rate


@pytest.mark.parametrize("seed", range(60))
def test_random_dags_match_bipartition_oracle(seed):
    rnd = random.Random(seed)
    g = random_dag(rnd, rnd.randint(4, 9), rnd.choice([0.3, 0.5, 0.8]))
    sol = max_flow_routing(g)
    assert sol.sum_rate == brute_min_cut_fraction(g.capacities, g.sources, g.sinks)
    rep = verify_routing(g, sol)
    assert rep.passed, rep.failures
    assert len(sol.paths) <= len(g.capacities)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hypothesis_dags(seed):
    rnd = random.Random(seed)
    g = random_dag(rnd, rnd.randint(4, 8), 0.5)
    assert max_flow_routing(g).sum_rate == brute_force_min_cut(g)


def _mutant(sol, **changes):
    return dataclasses.replace(sol, **changes)


def test_mutant_capacity_overflow_detected():
    g = load_fixture("wired_butterfly").to_wired_graph()
    sol = max_flow_routing(g)
    e = next(e for e, f in sol.edge_flows.items() if f > 0)
    flows = dict(sol.edge_flows)
    flows[e] = g.capacities[e] + 1
    rep = verify_routing(g, _mutant(sol, edge_flows=flows))
    assert not rep.passed
    assert any("capacity violation" in f for f in rep.failures)


def test_mutant_broken_conservation_detected():
    g = load_fixture("wired_butterfly").to_wired_graph()
    sol = max_flow_routing(g)
    e = next(e for e, f in sol.edge_flows.items() if f > 0 and e[0] not in g.sources)
    flows = dict(sol.edge_flows)
    flows[e] = flows[e] / 2
    rep = verify_routing(g, _mutant(sol, edge_flows=flows))
    assert any("conservation violated" in f for f in rep.failures)


def test_mutant_truncated_path_detected():
    g = load_fixture("wired_butterfly").to_wired_graph()
    sol = max_flow_routing(g)
    p = sol.paths[0]
    paths = [dataclasses.replace(p, nodes=p.nodes[:-1])] + sol.paths[1:]
    rep = verify_routing(g, _mutant(sol, paths=paths))
    assert not rep.passed
    assert any("does not run from a source to a sink" in f for f in rep.failures)


def test_suboptimal_flow_detected():
    g = load_fixture("wired_butterfly").to_wired_graph()
    sol = max_flow_routing(g)
    p = sol.paths[0]
    flows = dict(sol.edge_flows)
    for a in zip(p.nodes[:-1], p.nodes[1:]):
        flows[a] -= p.rate
    rep = verify_routing(g, _mutant(sol, edge_flows=flows, paths=sol.paths[1:], sum_rate=sol.sum_rate - p.rate))
    assert not rep.passed
    assert any("augmenting path" in f for f in rep.failures)


def test_cyclic_and_nonpositive_inputs_rejected():
    with pytest.raises(ValueError, match="cyclic"):
        WiredGraph.from_edges([("a", "b"), ("b", "c"), ("c", "a"), ("s1", "a"), ("c", "d1")], ["s1", "s2"], ["d1", "d2"])
    with pytest.raises(ValueError, match="nonpositive"):
        WiredGraph.from_edges([("s1", "d1", 0)], ["s1", "s2"], ["d1", "d2"])
    with pytest.raises(ValueError):
        WiredGraph.from_edges([("s1", "d1", 1)], ["s1", "s1"], ["d1", "d2"])


def test_wireless_network_rejected():
    with pytest.raises(ValueError, match="wired"):
        max_flow_routing(load_fixture("fig4_xz"))


def test_wired_file_round_trip():
    net = parse_network(open(fixture_path("wired_x")).read())
    assert net.mode == "wired"
    sol = max_flow_routing(net)
    assert verify_routing(net, sol).passed


def test_max_flow_single_commodity():
    caps = {("s", "a"): Fraction(3), ("a", "t"): Fraction(2), ("s", "t"): Fraction(1, 2)}
    value, flow, reach = max_flow(caps, "s", "t")
    assert value == Fraction(5, 2)
    assert reach == frozenset({"s", "a"})
