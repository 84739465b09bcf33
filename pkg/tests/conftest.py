"""Shared scenario/topology builders used across the suite."""
import pytest

from qnetsec import scenario as scn
from qnetsec import topology as topo


def node(nid, kind, **kw):
    return topo.NodeSpec(nid, kind, **kw)


def link(lid, a, b, **kw):
    return topo.LinkSpec(lid, a, b, **kw)


def chain_topology():
    """a -- Ra -- X1 -- X2 -- Rb -- b, all direct links."""
    nodes = [
        node("a", topo.ENODE), node("b", topo.ENODE),
        node("Ra", topo.RNODE), node("Rb", topo.RNODE),
        node("X1", topo.XNODE), node("X2", topo.XNODE),
    ]
    links = [
        link("L1", "a", "Ra", length_km=5), link("L2", "Ra", "X1", length_km=5),
        link("L3", "X1", "X2", length_km=10), link("L4", "X2", "Rb", length_km=5),
        link("L5", "Rb", "b", length_km=5),
    ]
    return topo.Topology.build(nodes, links)


def hub_and_ring_topology():
    """Central hub X0 spoked to a 4-ring; one end node per ring router.

    Demands a-ap and b-bp route through the hub; with the hub gone both are
    forced around the ring and share links.
    """
    nodes = [node("X0", topo.XNODE)]
    for i in (1, 2, 3, 4):
        nodes.append(node(f"X{i}", topo.XNODE))
    for rid in ("R12", "R23", "R34", "R41"):
        nodes.append(node(rid, topo.RNODE))
    for e in ("a", "ap", "b", "bp"):
        nodes.append(node(e, topo.ENODE))
    links = [
        link("S1", "X0", "X1"), link("S2", "X0", "X2"),
        link("S3", "X0", "X3"), link("S4", "X0", "X4"),
        link("K1", "X1", "R12"), link("K2", "R12", "X2"),
        link("K3", "X2", "R23"), link("K4", "R23", "X3"),
        link("K5", "X3", "R34"), link("K6", "R34", "X4"),
        link("K7", "X4", "R41"), link("K8", "R41", "X1"),
        link("E1", "a", "X1"), link("E2", "ap", "X3"),
        link("E3", "b", "X2"), link("E4", "bp", "X4"),
    ]
    return topo.Topology.build(nodes, links)


def separator_topology():
    """e1,e2 - X1 - R1 - XE - R2 - X2 - e3,e4; XE is the framing attacker."""
    nodes = [
        node("e1", topo.ENODE), node("e2", topo.ENODE),
        node("e3", topo.ENODE), node("e4", topo.ENODE),
        node("X1", topo.XNODE), node("X2", topo.XNODE),
        node("XE", topo.XNODE), node("R1", topo.RNODE), node("R2", topo.RNODE),
    ]
    links = [
        link("L1", "e1", "X1"), link("L2", "e2", "X1"),
        link("L3", "X1", "R1"), link("L4", "R1", "XE"),
        link("L5", "XE", "R2"), link("L6", "R2", "X2"),
        link("L7", "X2", "e3"), link("L8", "X2", "e4"),
    ]
    return topo.Topology.build(nodes, links)


def star_topology():
    """Four end nodes around one switch; used for the wrong-pairing attack."""
    nodes = [
        node("V", topo.XNODE),
        node("a", topo.ENODE), node("ap", topo.ENODE),
        node("b", topo.ENODE), node("bp", topo.ENODE),
    ]
    links = [
        link("La", "a", "V", length_km=1), link("Lap", "ap", "V", length_km=1),
        link("Lb", "b", "V", length_km=1), link("Lbp", "bp", "V", length_km=1),
    ]
    return topo.Topology.build(nodes, links)


# -- raw scenario documents (engine-level suites build on these) -------------

def doc(nodes, links, demands, attacks=(), protocol=None, seed=7, name="t"):
    return {
        "format_version": 1,
        "name": name,
        "seed": seed,
        "nodes": list(nodes),
        "links": list(links),
        "demands": list(demands),
        "attacks": list(attacks),
        "protocol": dict(protocol or {}),
    }


def chain3_doc(*, app="pairs", target=60, attacks=(), protocol=None, seed=7,
               length_km=2.0, base_fidelity=0.98, **demand_extra):
    """a -- r1 -- b with one demand; the workhorse document."""
    demand = {"id": "d1", "src": "a", "dst": "b", "application": app,
              **demand_extra}
    if app == "bbm92":
        demand.setdefault("sifted_target", target)
    else:
        demand.setdefault("target_pairs", target)
    return doc(
        nodes=[{"id": "a", "kind": "ENode"}, {"id": "r1", "kind": "RNode"},
               {"id": "b", "kind": "ENode"}],
        links=[{"id": "La", "a": "a", "b": "r1", "length_km": length_km,
                "base_fidelity": base_fidelity},
               {"id": "Lb", "a": "r1", "b": "b", "length_km": length_km,
                "base_fidelity": base_fidelity}],
        demands=[demand],
        attacks=attacks,
        protocol={"horizon_s": 6.0, **(protocol or {})},
        seed=seed,
    )


def _claimed(attacks):
    out = set()
    for a in attacks:
        out |= set(a.get("compromised_nodes", ()))
    return out


def star_doc(*, attacks=(), protocol=None, seed=7, target=40):
    """Two demands crossing at one switch node V."""
    return doc(
        nodes=[{"id": "V", "kind": "XNode",
                "hijacked": "V" in _claimed(attacks)},
               {"id": "a", "kind": "ENode"}, {"id": "ap", "kind": "ENode"},
               {"id": "b", "kind": "ENode"}, {"id": "bp", "kind": "ENode"}],
        links=[{"id": "La", "a": "a", "b": "V", "length_km": 1.0},
               {"id": "Lap", "a": "ap", "b": "V", "length_km": 1.0},
               {"id": "Lb", "a": "b", "b": "V", "length_km": 1.0},
               {"id": "Lbp", "a": "bp", "b": "V", "length_km": 1.0}],
        demands=[{"id": "dA", "src": "a", "dst": "ap",
                  "application": "pairs", "target_pairs": target},
                 {"id": "dB", "src": "b", "dst": "bp",
                  "application": "pairs", "target_pairs": target}],
        attacks=attacks,
        protocol={"horizon_s": 6.0, **(protocol or {})},
        seed=seed,
    )


def separator_doc(*, attacks=(), protocol=None, seed=7):
    """e1,e2 - X1 - R1 - XE - R2 - X2 - e3,e4; XE sits on the only cut."""
    return doc(
        nodes=[{"id": "e1", "kind": "ENode"}, {"id": "e2", "kind": "ENode"},
               {"id": "e3", "kind": "ENode"}, {"id": "e4", "kind": "ENode"},
               {"id": "X1", "kind": "XNode"}, {"id": "X2", "kind": "XNode"},
               {"id": "XE", "kind": "XNode", "hijacked": "XE" in _claimed(attacks)},
               {"id": "R1", "kind": "RNode"}, {"id": "R2", "kind": "RNode"}],
        links=[{"id": "L1", "a": "e1", "b": "X1"},
               {"id": "L2", "a": "e2", "b": "X1"},
               {"id": "L3", "a": "X1", "b": "R1"},
               {"id": "L4", "a": "R1", "b": "XE"},
               {"id": "L5", "a": "XE", "b": "R2"},
               {"id": "L6", "a": "R2", "b": "X2"},
               {"id": "L7", "a": "X2", "b": "e3"},
               {"id": "L8", "a": "X2", "b": "e4"}],
        demands=[{"id": "d14", "src": "e1", "dst": "e4",
                  "application": "pairs", "target_pairs": 30}],
        attacks=attacks,
        protocol={"horizon_s": 6.0, **(protocol or {})},
        seed=seed,
    )


def load(document, **kw):
    return scn.load_scenario(document, **kw)


@pytest.fixture
def chain():
    return chain_topology()


@pytest.fixture
def hub_ring():
    return hub_and_ring_topology()


@pytest.fixture
def separator():
    return separator_topology()
