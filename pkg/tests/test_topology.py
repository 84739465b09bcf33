import itertools
import random

import pytest

from qnetsec import topology as topo
from qnetsec.errors import ValidationError
from conftest import node, link, hub_and_ring_topology, separator_topology


def build(nodes, links, **kw):
    return topo.Topology.build(nodes, links, **kw)


def rules_of(excinfo):
    return {v.rule for v in excinfo.value.violations}


# ---------------------------------------------------------------- validation

def test_chain_with_interior_routers_is_valid(chain):
    assert set(chain.nodes) == {"a", "b", "Ra", "Rb", "X1", "X2"}
    assert chain.degree("X1") == 2


def test_rnode_with_three_links_rejected():
    nodes = [node("a", topo.ENODE), node("b", topo.ENODE), node("c", topo.ENODE),
             node("R", topo.RNODE)]
    links = [link("L1", "a", "R"), link("L2", "b", "R"), link("L3", "c", "R")]
    with pytest.raises(ValidationError) as ei:
        build(nodes, links)
    assert topo.RULE_DEGREE in rules_of(ei)
    assert any(v.subject == "R" for v in ei.value.violations)


def test_enode_with_two_links_rejected():
    nodes = [node("a", topo.ENODE), node("X", topo.XNODE), node("Y", topo.XNODE),
             node("R", topo.RNODE)]
    links = [link("L1", "a", "X"), link("L2", "a", "Y"),
             link("L3", "X", "R"), link("L4", "R", "Y"), link("L5", "X", "Y")]
    with pytest.raises(ValidationError) as ei:
        build(nodes, links)
    assert topo.RULE_DEGREE in rules_of(ei)


def test_bsa_link_without_midpoint_rejected():
    nodes = [node("a", topo.ENODE), node("b", topo.ENODE)]
    links = [link("L", "a", "b", architecture=topo.MEMORIES_AND_BSA)]
    with pytest.raises(ValidationError) as ei:
        build(nodes, links)
    assert topo.RULE_MIDPOINT_MISSING in rules_of(ei)


def test_bsa_midpoint_kind_must_match():
    nodes = [node("a", topo.ENODE), node("b", topo.ENODE),
             node("I", topo.INODE_EPPS)]
    links = [link("L", "a", "b", architecture=topo.MEMORIES_AND_BSA, midpoint="I")]
    with pytest.raises(ValidationError) as ei:
        build(nodes, links)
    assert topo.RULE_MIDPOINT_KIND in rules_of(ei)


def test_bsa_cap_above_half_rejected():
    nodes = [node("a", topo.ENODE), node("b", topo.ENODE), node("I", topo.INODE_BSA)]
    links = [link("L", "a", "b", architecture=topo.MEMORIES_AND_BSA,
                  midpoint="I", bsa_success_cap=0.6)]
    with pytest.raises(ValidationError) as ei:
        build(nodes, links)
    assert topo.RULE_BSA_CAP in rules_of(ei)


def test_mnode_with_memory_rejected():
    nodes = [node("m", topo.MNODE, capacity={"interface": 1, "buffer": 2, "terminal": 0}),
             node("b", topo.ENODE)]
    links = [link("L", "m", "b")]
    with pytest.raises(ValidationError) as ei:
        build(nodes, links)
    assert topo.RULE_MNODE_MEMORY in rules_of(ei)


def test_disconnected_graph_rejected():
    nodes = [node("a", topo.ENODE), node("b", topo.ENODE),
             node("c", topo.ENODE), node("d", topo.ENODE)]
    links = [link("L1", "a", "b"), link("L2", "c", "d")]
    with pytest.raises(ValidationError) as ei:
        build(nodes, links)
    assert topo.RULE_CONNECTED in rules_of(ei)


def test_inode_cannot_terminate_a_link():
    nodes = [node("a", topo.ENODE), node("I", topo.INODE_BSA)]
    links = [link("L", "a", "I")]
    with pytest.raises(ValidationError) as ei:
        build(nodes, links)
    assert topo.RULE_INODE_ENDPOINT in rules_of(ei)


def test_all_violations_reported_together():
    nodes = [node("a", topo.ENODE), node("a", topo.ENODE), node("R", topo.RNODE)]
    links = [link("L", "a", "ghost")]
    with pytest.raises(ValidationError) as ei:
        build(nodes, links)
    got = rules_of(ei)
    assert topo.RULE_NODE_DUPLICATE in got
    assert topo.RULE_LINK_DANGLING in got
    assert topo.RULE_DEGREE in got  # R has no links


# ---------------------------------------------------------------- link physics

def test_success_probability_frozen_values():
    l0 = link("L", "a", "b", length_km=10.0, attenuation_db_per_km=0.2)
    # 10^(-0.2) computed independently
    assert abs(l0.success_probability() - 10 ** -0.2) < 1e-15
    assert abs(l0.success_probability() - 0.6309573444801932) < 1e-12
    assert link("L", "a", "b", length_km=0.0).success_probability() == 1.0
    bsa = link("L", "a", "b", architecture=topo.MEMORIES_AND_BSA,
               length_km=0.0, midpoint="I")
    assert bsa.success_probability() == 0.5
    epps = link("L", "a", "b", architecture=topo.MEMORIES_AND_EPPS,
                length_km=10.0, midpoint="I")
    # two half-length crossings compose to the full-length transmissivity
    assert abs(epps.success_probability() - 10 ** -0.2) < 1e-15


# ---------------------------------------------------------------- routing

def test_straight_chain_path(chain):
    assert chain.shortest_path("a", "b") == ["a", "Ra", "X1", "X2", "Rb", "b"]


def test_equal_cost_tie_breaks_lexicographically():
    nodes = [node("A", topo.XNODE), node("D", topo.XNODE),
             node("B", topo.RNODE), node("C", topo.RNODE)]
    links = [link("L1", "A", "B"), link("L2", "B", "D"),
             link("L3", "A", "C"), link("L4", "C", "D")]
    t = build(nodes, links)
    assert t.shortest_path("A", "D") == ["A", "B", "D"]


def test_no_path_returns_none(chain):
    assert chain.shortest_path("a", "b", excluded={"X1"}) is None


def test_hub_removal_strictly_increases_hops(hub_ring):
    with_hub = hub_ring.shortest_path("a", "ap")
    without = hub_ring.shortest_path("a", "ap", excluded={"X0"})
    assert hub_ring.hop_count(with_hub) == 4
    assert hub_ring.hop_count(without) == 6
    assert hub_ring.hop_count(without) > hub_ring.hop_count(with_hub)


def test_fidelity_cost_prefers_better_links():
    nodes = [node("a", topo.ENODE), node("b", topo.ENODE),
             node("P", topo.RNODE), node("Q", topo.RNODE), node("X", topo.XNODE),
             node("Y", topo.XNODE)]
    links = [link("L1", "a", "X"), link("L2", "X", "P", base_fidelity=0.90),
             link("L3", "P", "Y", base_fidelity=0.90),
             link("L4", "X", "Q", base_fidelity=0.99),
             link("L5", "Q", "Y", base_fidelity=0.99), link("L6", "Y", "b")]
    t = build(nodes, links)
    # hop cost ties at 4 and would pick P by name; fidelity cost picks Q
    assert t.shortest_path("a", "b", cost=topo.COST_HOPS)[1:-1] == ["X", "P", "Y"]
    assert t.shortest_path("a", "b", cost=topo.COST_NEG_LOG_FIDELITY)[1:-1] == ["X", "Q", "Y"]


def test_adding_a_link_never_increases_cost():
    rng = random.Random(42)
    for trial in range(15):
        n = rng.randint(5, 9)
        ids = [f"N{i:02d}" for i in range(n)]
        nodes = [node(i, topo.XNODE) for i in ids]
        links = [link(f"C{i}", ids[i], ids[(i + 1) % n]) for i in range(n)]
        present = {frozenset((ids[i], ids[(i + 1) % n])) for i in range(n)}
        chords = [frozenset(p) for p in itertools.combinations(ids, 2)
                  if frozenset(p) not in present]
        rng.shuffle(chords)
        extra = chords[: rng.randint(0, 3)]
        for j, ch in enumerate(extra):
            a, b = sorted(ch)
            links.append(link(f"X{j}", a, b))
            present.add(ch)
        t1 = build(nodes, links)
        src, dst = rng.sample(ids, 2)
        before = len(t1.shortest_path(src, dst))
        new = next(ch for ch in chords if ch not in present)
        a, b = sorted(new)
        t2 = build(nodes, links + [link("NEW", a, b)])
        after = len(t2.shortest_path(src, dst))
        assert after <= before


# ---------------------------------------------------------------- partitions

def test_empty_removal_is_one_component(chain):
    rep = chain.partition_report(())
    assert len(rep.component_sizes) == 1
    assert rep.disconnected_pairs_fraction == 0.0


def test_cut_vertex_splits_barbell():
    nodes = [node(i, topo.XNODE) for i in ("X1", "X2", "X3", "X4", "X5", "X6", "C")]
    nodes += [node("e1", topo.ENODE), node("e2", topo.ENODE)]
    links = [link("T1", "X1", "X2"), link("T2", "X2", "X3"), link("T3", "X3", "X1"),
             link("T4", "X4", "X5"), link("T5", "X5", "X6"), link("T6", "X6", "X4"),
             link("B1", "X3", "C"), link("B2", "C", "X4"),
             link("E1", "e1", "X1"), link("E2", "e2", "X4")]
    t = build(nodes, links)
    rep = t.partition_report({"C"})
    assert len(rep.component_sizes) == 2
    assert rep.disconnected_pairs_fraction == 1.0
    assert sum(rep.component_sizes) == len(t.nodes) - 1


def test_partition_matches_brute_force_bfs(separator):
    removed = {"R1", "R2"}
    rep = separator.partition_report(removed)
    # independent BFS oracle over the physical adjacency
    adj = separator.physical_adjacency()
    remaining = [n for n in separator.nodes if n not in removed]
    comp_of = {}
    for start in remaining:
        if start in comp_of:
            continue
        queue = [start]
        comp_of[start] = start
        while queue:
            u = queue.pop(0)
            for v in sorted(adj[u]):
                if v not in removed and v not in comp_of:
                    comp_of[v] = start
                    queue.append(v)
    ends = [e for e in separator.end_nodes() if e not in removed]
    pairs = list(itertools.combinations(ends, 2))
    cut = sum(1 for x, y in pairs if comp_of[x] != comp_of[y])
    assert rep.disconnected_pairs == cut
    assert rep.disconnected_pairs_fraction == cut / len(pairs)
    assert rep.disconnected_pairs_fraction == pytest.approx(4 / 6)
    assert sum(rep.component_sizes) == len(separator.nodes) - len(removed)


def test_destroying_a_midpoint_inode_severs_its_link():
    nodes = [node("a", topo.ENODE), node("b", topo.ENODE), node("I", topo.INODE_BSA)]
    links = [link("L", "a", "b", architecture=topo.MEMORIES_AND_BSA, midpoint="I")]
    t = build(nodes, links)
    assert len(t.partition_report(()).component_sizes) == 1
    rep = t.partition_report({"I"})
    assert len(rep.component_sizes) == 2
    assert rep.disconnected_pairs_fraction == 1.0


# ---------------------------------------------------------------- load

def test_single_path_loads_each_traversed_link(chain):
    rep = chain.link_load([["a", "Ra", "X1", "X2", "Rb", "b"]])
    assert all(rep.counts[l] == 1 for l in ("L1", "L2", "L3", "L4", "L5"))
    assert rep.normalized["L1"] == 1 / chain.links["L1"].attempt_rate_hz


def test_empty_demand_set_all_zero(chain):
    rep = chain.link_load([])
    assert set(rep.counts.values()) == {0}
    assert rep.max_count() == 0


def test_hub_removal_strictly_increases_max_load(hub_ring):
    demands = [("a", "ap"), ("b", "bp")]
    before = hub_ring.link_load([hub_ring.shortest_path(s, d) for s, d in demands])
    after = hub_ring.link_load(
        [hub_ring.shortest_path(s, d, excluded={"X0"}) for s, d in demands])
    assert before.max_count() == 1
    assert after.max_count() == 2
    assert after.max_count() > before.max_count()


# ---------------------------------------------------------------- misc

def test_classical_latency_scales_with_distance(chain):
    # a..b fiber distance is 30 km at 5 us/km
    assert chain.distance_km("a", "b") == pytest.approx(30.0)
    assert chain.classical_latency("a", "b") == pytest.approx(30.0 * 5e-6)
    assert chain.classical_latency("a", "a") == 0.0


def test_channel_overrides_apply():
    nodes = [node("a", topo.ENODE), node("b", topo.ENODE)]
    links = [link("L", "a", "b")]
    t = topo.Topology.build(nodes, links, authenticated=True,
                            channel_overrides={("a", "b"): {"authenticated": False,
                                                            "compromised_by": "eve"}})
    ch = t.classical_channel("b", "a")
    assert not ch.authenticated
    assert ch.compromised_by == "eve"


def test_normalized_dump_is_order_insensitive():
    n1 = [node("a", topo.ENODE), node("b", topo.ENODE), node("R", topo.RNODE)]
    l1 = [link("L1", "a", "R"), link("L2", "R", "b")]
    t1 = topo.Topology.build(n1, l1)
    t2 = topo.Topology.build(list(reversed(n1)), list(reversed(l1)))
    assert t1.normalized_dump() == t2.normalized_dump()
