from collections import defaultdict

import pytest
from hypothesis import given, settings, strategies as st

from banzkp.netsim import (
    ConfigError,
    Frame,
    Link,
    NodeSpec,
    RouteError,
    Scenario,
    Topology,
    Traffic,
    build_routes,
    chain_topology,
    default_topology,
    honest_scenario,
    relay,
    run,
    star_topology,
)

from oracles import adjacency_of, bfs_hops


def test_star_routes_are_single_hop():
    rt = build_routes(star_topology(6))
    assert set(rt.hop_count.values()) == {1}
    assert set(rt.parent.values()) == {0}


def test_chain_routes():
    rt = build_routes(chain_topology(2))
    assert rt.parent == {1: 0, 2: 1}
    assert rt.hop_count[2] == 2
    assert rt.path_to_sink(2) == [2, 1, 0]


def test_default_routes_match_bfs():
    topo = default_topology()
    rt = build_routes(topo)
    assert rt.hop_count == {n: h for n, h in bfs_hops(adjacency_of(topo)).items() if n != 0}
    assert set(rt.parent) == {1, 2, 3, 4, 5, 6}
    assert len(rt.edges()) <= 6
    # every parent is a neighbour one hop closer
    for n, p in rt.parent.items():
        assert p in topo.neighbors(n)
        assert rt.hop_count.get(p, 0) == rt.hop_count[n] - 1


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12), st.data())
def test_random_connected_routes_match_bfs(n, data):
    # random spanning tree plus extra edges, random delays
    links = {}
    for v in range(1, n):
        u = data.draw(st.integers(0, v - 1))
        links[(u, v)] = data.draw(st.integers(1, 20))
    extra = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=n))
    for a, b in extra:
        if a != b and (min(a, b), max(a, b)) not in links:
            links[(min(a, b), max(a, b))] = data.draw(st.integers(1, 20))
    topo = Topology(tuple(NodeSpec(i) for i in range(n)),
                    tuple(Link(a, b, float(d)) for (a, b), d in links.items()))
    rt = build_routes(topo)
    oracle = bfs_hops(adjacency_of(topo))
    assert rt.hop_count == {k: v for k, v in oracle.items() if k != 0}
    for v in rt.parent:
        assert len(rt.path_to_sink(v)) == oracle[v] + 1


def test_unreachable_node_raises():
    topo = Topology((NodeSpec(0), NodeSpec(1), NodeSpec(2)), (Link(0, 1),))
    with pytest.raises(RouteError) as err:
        build_routes(topo)
    assert err.value.unreachable == [2]


def test_tie_break_prefers_earliest_then_lowest_id():
    nodes = tuple(NodeSpec(i) for i in range(4))
    same = Topology(nodes, (Link(0, 1), Link(0, 2), Link(1, 3), Link(2, 3)))
    assert build_routes(same).parent[3] == 1
    slow = Topology(nodes, (Link(0, 1, 9.0), Link(0, 2), Link(1, 3), Link(2, 3)))
    assert build_routes(slow).parent[3] == 2


def test_relay_path_lengths():
    rt = build_routes(default_topology())
    up = Frame(1, 4, 0, b"x", "node")
    hops, at = [], 4
    while True:
        mv = relay(up, at, rt)
        if mv.action == "deliver":
            break
        hops.append((at, mv.next_hop))
        at = mv.next_hop
    assert len(hops) == rt.hop_count[4] == 2


def test_down_tree_follows_reverse_path():
    rt = build_routes(default_topology())
    for dst in rt.parent:
        down = Frame(1, 0, dst, b"x", "sink")
        path, at = [0], 0
        while relay(down, at, rt).action == "forward":
            at = relay(down, at, rt).next_hop
            path.append(at)
        assert path == list(reversed(rt.path_to_sink(dst)))


def test_honest_run_completes(params):
    tr = run(honest_scenario(0, params))
    assert set(tr.node_states.values()) == {"Authenticated"}
    assert set(tr.sink_states.values()) == {"Authenticated"}
    assert len(tr.deliveries) == 6
    sent = {r["node"]: r["data"] for r in tr.of_type("session") if r["party"] == "node"}
    assert all(d["data"] == sent[d["node"]] for d in tr.deliveries)


def test_hop_two_m1_crosses_two_links(params):
    tr = run(honest_scenario(0, params))
    m1 = next(r for r in tr.frames("M1") if r["src"] == 4)
    hops = [h for h in tr.of_type("hop") if h["fid"] == m1["fid"]]
    assert len(hops) == 2
    assert len({h["digest"] for h in hops}) == 1


def test_relayed_bytes_unchanged_and_never_decoded(params):
    tr = run(honest_scenario(3, params))
    by_fid = defaultdict(set)
    for h in tr.of_type("hop"):
        by_fid[h["fid"]].add(h["digest"])
    assert all(len(d) == 1 for d in by_fid.values())
    dst = {r["fid"]: r["dst"] for r in tr.of_type("send")}
    for p in tr.of_type("process"):
        assert p["node"] == dst[p["fid"]]


def test_lossy_uplink_isolates_one_node(params):
    topo = default_topology().with_link(0, 3, loss=1.0)
    tr = run(honest_scenario(0, params, topology=topo))
    assert tr.node_states[3] == "Aborted"
    assert all(tr.node_states[n] == "Authenticated" for n in (1, 2, 4, 5, 6))
    m1 = [r for r in tr.frames("M1") if r["src"] == 3]
    assert len(m1) == 4  # first send plus three retries


def test_conservation(params):
    topo = default_topology().with_link(1, 4, loss=0.5)
    for seed in range(5):
        c = run(honest_scenario(seed, params, topology=topo)).conservation()
        assert c["in_flight"] == 0
        assert c["sent"] == c["arrived"] + c["dropped"]


def test_determinism(params):
    for seed in range(5):
        a = run(honest_scenario(seed, params))
        b = run(honest_scenario(seed, params))
        assert a.digest() == b.digest()
        assert list(a.lines()) == list(b.lines())
    assert run(honest_scenario(1, params)).digest() != run(honest_scenario(2, params)).digest()


def test_trace_lines_end_with_summary(params):
    import json
    tr = run(honest_scenario(0, params))
    lines = list(tr.lines())
    summary = json.loads(lines[-1])
    assert summary["type"] == "summary" and summary["deliveries"] == 6
    assert all("type" in json.loads(x) for x in lines)


def test_ledger_matches_trace(params):
    tr = run(honest_scenario(0, params))
    hops = tr.of_type("hop")
    assert tr.ledger.total().bits_tx == 8 * sum(h["len"] for h in hops)
    assert tr.ledger.total().bits_rx == tr.ledger.total().bits_tx


def test_config_errors():
    with pytest.raises(ConfigError):
        Topology((NodeSpec(1),), ())
    with pytest.raises(ConfigError):
        Topology((NodeSpec(0), NodeSpec(0)), ())
    with pytest.raises(ConfigError):
        Topology((NodeSpec(0), NodeSpec(1)), (Link(0, 2),))
    with pytest.raises(ConfigError):
        Topology((NodeSpec(0), NodeSpec(1)), (Link(0, 1, loss=1.5),))
    with pytest.raises(ConfigError):
        Scenario(traffic=(Traffic(0.0, 9, b"x"),))
