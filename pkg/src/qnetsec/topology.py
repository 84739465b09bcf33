"""Typed network model: nodes, quantum links, classical plane.

Two graph views coexist. The *routing* graph contains only memory-holding
nodes (ENode/MNode/RNode/XNode) with one edge per quantum link; midpoint
INodes are link infrastructure and never appear in paths or hop counts.
The *physical* graph expands each midpoint INode into two half-link
segments, which is the right view for partition analysis (destroying an
INode severs its link).
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

from .errors import ValidationError, Violation

ENODE = "ENode"
MNODE = "MNode"
RNODE = "RNode"
XNODE = "XNode"
INODE_BSA = "INode_BSA"
INODE_EPPS = "INode_EPPS"

NODE_KINDS = (ENODE, MNODE, RNODE, XNODE, INODE_BSA, INODE_EPPS)
END_KINDS = (ENODE, MNODE)
INODE_KINDS = (INODE_BSA, INODE_EPPS)

MEMORY_TO_MEMORY = "MemoryToMemory"
MEMORIES_AND_BSA = "MemoriesAndBSA"
MEMORIES_AND_EPPS = "MemoriesAndEPPS"
ARCHITECTURES = (MEMORY_TO_MEMORY, MEMORIES_AND_BSA, MEMORIES_AND_EPPS)

# architecture -> required midpoint kind (None = no midpoint allowed)
_MIDPOINT_KIND = {
    MEMORY_TO_MEMORY: None,
    MEMORIES_AND_BSA: INODE_BSA,
    MEMORIES_AND_EPPS: INODE_EPPS,
}

DEFAULT_ATTENUATION_DB_PER_KM = 0.2
DEFAULT_ATTEMPT_RATE_HZ = 10000.0
DEFAULT_BASE_FIDELITY = 0.98
DEFAULT_BSA_SUCCESS_CAP = 0.5
DEFAULT_LATENCY_S_PER_KM = 5e-6

# per-kind default qubit capacities {interface, buffer, terminal}
DEFAULT_CAPACITY = {
    ENODE: {"interface": 8, "buffer": 8, "terminal": 32},
    MNODE: {"interface": 2, "buffer": 0, "terminal": 0},
    RNODE: {"interface": 8, "buffer": 8, "terminal": 0},
    XNODE: {"interface": 16, "buffer": 16, "terminal": 0},
    INODE_BSA: {"interface": 2, "buffer": 0, "terminal": 0},
    INODE_EPPS: {"interface": 2, "buffer": 0, "terminal": 0},
}

# validation rule identifiers (machine readable, stable)
RULE_NODE_DUPLICATE = "node.duplicate_id"
RULE_NODE_KIND = "node.unknown_kind"
RULE_NODE_CAPACITY = "node.capacity_negative"
RULE_MNODE_MEMORY = "node.mnode_has_memory"
RULE_TERMINAL_PLACEMENT = "node.terminal_outside_enode"
RULE_LINK_DUPLICATE = "link.duplicate_id"
RULE_LINK_DANGLING = "link.dangling_endpoint"
RULE_LINK_SELF_LOOP = "link.self_loop"
RULE_LINK_PARALLEL = "link.parallel_edge"
RULE_LINK_LENGTH = "link.negative_length"
RULE_LINK_ARCH = "link.unknown_architecture"
RULE_LINK_PARAMS = "link.nonpositive_parameter"
RULE_LINK_FIDELITY = "link.base_fidelity_range"
RULE_BSA_CAP = "link.bsa_cap_exceeds_half"
RULE_MIDPOINT_MISSING = "link.midpoint_missing"
RULE_MIDPOINT_KIND = "link.midpoint_kind_mismatch"
RULE_MIDPOINT_FORBIDDEN = "link.midpoint_forbidden"
RULE_INODE_ENDPOINT = "inode.used_as_endpoint"
RULE_INODE_SHARED = "inode.shared_between_links"
RULE_INODE_UNUSED = "inode.not_attached_to_link"
RULE_DEGREE = "node.degree"
RULE_CONNECTED = "graph.disconnected"

COST_HOPS = "hops"
COST_NEG_LOG_FIDELITY = "neg_log_fidelity"
_MIN_EDGE_COST = 1e-12


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    kind: str
    hijacked: bool = False
    capacity: dict = None  # {interface, buffer, terminal}

    def cap(self, role: str) -> int:
        if self.capacity and role in self.capacity:
            return int(self.capacity[role])
        return DEFAULT_CAPACITY[self.kind][role]


@dataclass(frozen=True)
class LinkSpec:
    link_id: str
    endpoint_a: str
    endpoint_b: str
    architecture: str = MEMORY_TO_MEMORY
    length_km: float = 1.0
    attenuation_db_per_km: float = DEFAULT_ATTENUATION_DB_PER_KM
    attempt_rate_hz: float = DEFAULT_ATTEMPT_RATE_HZ
    bsa_success_cap: float = DEFAULT_BSA_SUCCESS_CAP
    base_fidelity: float = DEFAULT_BASE_FIDELITY
    midpoint: str | None = None

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.endpoint_a, self.endpoint_b)

    def other_end(self, node: str) -> str:
        if node == self.endpoint_a:
            return self.endpoint_b
        if node == self.endpoint_b:
            return self.endpoint_a
        raise KeyError(node)

    def success_probability(self) -> float:
        """Per-attempt heralded success probability of this architecture.

        Transmission through x km of fiber is eta(x) = 10^(-alpha*x/10).
        MemoryToMemory crosses the full length; the midpoint designs cross
        two half-lengths (eta(L/2) squared equals eta(L)), with the BSA
        additionally capped by its intrinsic success bound.
        """
        eta_full = 10.0 ** (-self.attenuation_db_per_km * self.length_km / 10.0)
        if self.architecture == MEMORY_TO_MEMORY:
            return eta_full
        if self.architecture == MEMORIES_AND_BSA:
            return eta_full * self.bsa_success_cap
        if self.architecture == MEMORIES_AND_EPPS:
            return eta_full
        raise KeyError(self.architecture)


@dataclass(frozen=True)
class ClassicalChannel:
    endpoint_a: str
    endpoint_b: str
    authenticated: bool
    latency_s_per_km: float
    compromised_by: str | None = None


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


class Topology:
    """Immutable-after-load network structure with precomputed indexes."""

    def __init__(self, nodes: dict, links: dict, *, authenticated: bool = True,
                 latency_s_per_km: float = DEFAULT_LATENCY_S_PER_KM,
                 channel_overrides: dict | None = None):
        self.nodes = dict(sorted(nodes.items()))
        self.links = dict(sorted(links.items()))
        self.authenticated_default = bool(authenticated)
        self.latency_s_per_km = float(latency_s_per_km)
        self.channel_overrides = dict(channel_overrides or {})
        # routing adjacency: node -> sorted list of (neighbor, link_id)
        self.adjacency: dict = {}
        for nid, node in self.nodes.items():
            if node.kind not in INODE_KINDS:
                self.adjacency[nid] = []
        self.link_between: dict = {}
        for link in self.links.values():
            self.adjacency[link.endpoint_a].append((link.endpoint_b, link.link_id))
            self.adjacency[link.endpoint_b].append((link.endpoint_a, link.link_id))
            self.link_between[_pair_key(*link.endpoints)] = link.link_id
        for nid in self.adjacency:
            self.adjacency[nid].sort()
        self._distance_km = self._all_pairs_distance()

    # -- construction ------------------------------------------------------

    @classmethod
    def build(cls, nodes: list, links: list, **kwargs) -> "Topology":
        """Validate and assemble; raises ValidationError listing every rule hit."""
        violations = validate(nodes, links)
        if violations:
            raise ValidationError(violations)
        return cls({n.node_id: n for n in nodes}, {l.link_id: l for l in links}, **kwargs)

    # -- basic queries -----------------------------------------------------

    def degree(self, node_id: str) -> int:
        return len(self.adjacency.get(node_id, ()))

    def end_nodes(self) -> list:
        return [nid for nid, n in self.nodes.items() if n.kind in END_KINDS]

    def routing_nodes(self) -> list:
        return list(self.adjacency)

    def link_on_hop(self, a: str, b: str):
        lid = self.link_between.get(_pair_key(a, b))
        return self.links[lid] if lid else None

    def classical_channel(self, a: str, b: str) -> ClassicalChannel:
        """The (always-present) classical channel between two nodes."""
        key = _pair_key(a, b)
        override = self.channel_overrides.get(key, {})
        return ClassicalChannel(
            key[0], key[1],
            authenticated=override.get("authenticated", self.authenticated_default),
            latency_s_per_km=override.get("latency_s_per_km", self.latency_s_per_km),
            compromised_by=override.get("compromised_by"),
        )

    def classical_latency(self, a: str, b: str) -> float:
        if a == b:
            return 0.0
        chan = self.classical_channel(a, b)
        return chan.latency_s_per_km * self.distance_km(a, b)

    def distance_km(self, a: str, b: str) -> float:
        """Fiber distance along the shortest quantum route (classical signals
        are assumed to follow the same conduits)."""
        return self._distance_km[a][b]

    def _all_pairs_distance(self) -> dict:
        out = {}
        for src in self.adjacency:
            dist = {src: 0.0}
            heap = [(0.0, src)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist.get(u, math.inf):
                    continue
                for v, lid in self.adjacency[u]:
                    nd = d + self.links[lid].length_km
                    if nd < dist.get(v, math.inf):
                        dist[v] = nd
                        heapq.heappush(heap, (nd, v))
            out[src] = dist
        return out

    # -- routing -----------------------------------------------------------

    def edge_cost(self, link: LinkSpec, cost: str) -> float:
        if cost == COST_HOPS:
            return 1.0
        if cost == COST_NEG_LOG_FIDELITY:
            # strictly positive so uniform-cost search terminates
            return max(_MIN_EDGE_COST, -math.log(link.base_fidelity))
        raise KeyError(cost)

    def shortest_path(self, src: str, dst: str, cost: str = COST_HOPS,
                      excluded: frozenset | set = frozenset()):
        """Minimal-cost simple path, ties broken by lexicographic node sequence.

        Uniform-cost search over simple paths; paths strictly worse than the
        best known cost to a node are pruned, equal-cost paths survive so the
        lexicographic winner is found. Returns None when disconnected.
        """
        if src not in self.adjacency or dst not in self.adjacency:
            return None
        if src in excluded or dst in excluded:
            return None
        best: dict = {}
        heap = [(0.0, (src,))]
        while heap:
            c, path = heapq.heappop(heap)
            node = path[-1]
            if node == dst:
                return list(path)
            if c > best.get(node, math.inf) + _MIN_EDGE_COST:
                continue
            if node not in best or c < best[node]:
                best[node] = c
            for nbr, lid in self.adjacency[node]:
                if nbr in path or nbr in excluded:
                    continue
                nc = c + self.edge_cost(self.links[lid], cost)
                if nc <= best.get(nbr, math.inf) + _MIN_EDGE_COST:
                    heapq.heappush(heap, (nc, path + (nbr,)))
        return None

    def hop_count(self, path: list) -> int:
        return len(path) - 1

    def links_on_path(self, path: list) -> list:
        out = []
        for a, b in zip(path, path[1:]):
            link = self.link_on_hop(a, b)
            if link is None:
                raise KeyError(f"no link between {a} and {b}")
            out.append(link)
        return out

    # -- analysis ----------------------------------------------------------

    def physical_adjacency(self) -> dict:
        """Adjacency with midpoint INodes expanded into their two segments."""
        adj = {nid: set() for nid in self.nodes}
        for link in self.links.values():
            a, b = link.endpoints
            if link.midpoint:
                adj[a].add(link.midpoint)
                adj[link.midpoint].update((a, b))
                adj[b].add(link.midpoint)
            else:
                adj[a].add(b)
                adj[b].add(a)
        return adj

    def partition_report(self, removed_nodes) -> "PartitionReport":
        removed = set(removed_nodes)
        unknown = removed - set(self.nodes)
        if unknown:
            raise KeyError(f"unknown nodes in removal set: {sorted(unknown)}")
        adj = self.physical_adjacency()
        remaining = [n for n in self.nodes if n not in removed]
        seen: set = set()
        components = []
        for start in remaining:
            if start in seen:
                continue
            comp = []
            stack = [start]
            seen.add(start)
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in adj[u]:
                    if v not in removed and v not in seen:
                        seen.add(v)
                        stack.append(v)
            components.append(sorted(comp))
        components.sort(key=lambda c: (-len(c), c))
        comp_of = {}
        for idx, comp in enumerate(components):
            for n in comp:
                comp_of[n] = idx
        ends = [e for e in self.end_nodes() if e not in removed]
        pairs = list(itertools.combinations(ends, 2))
        cut = sum(1 for a, b in pairs if comp_of[a] != comp_of[b])
        fraction = (cut / len(pairs)) if pairs else 0.0
        return PartitionReport(
            component_sizes=[len(c) for c in components],
            components=components,
            disconnected_pairs_fraction=fraction,
            end_node_pairs=len(pairs),
            disconnected_pairs=cut,
        )

    def link_load(self, active_paths: list) -> "LoadReport":
        counts = {lid: 0 for lid in self.links}
        for path in active_paths:
            for link in self.links_on_path(path):
                counts[link.link_id] += 1
        normalized = {lid: counts[lid] / self.links[lid].attempt_rate_hz
                      for lid in self.links}
        return LoadReport(counts=counts, normalized=normalized)

    # -- canonical dump ----------------------------------------------------

    def normalized_dump(self) -> str:
        import json
        doc = {
            "nodes": [
                {"id": n.node_id, "kind": n.kind, "hijacked": n.hijacked,
                 "capacity": {r: n.cap(r) for r in ("interface", "buffer", "terminal")}}
                for n in self.nodes.values()
            ],
            "links": [
                {"id": l.link_id, "a": l.endpoint_a, "b": l.endpoint_b,
                 "architecture": l.architecture, "length_km": l.length_km,
                 "attenuation_db_per_km": l.attenuation_db_per_km,
                 "attempt_rate_hz": l.attempt_rate_hz,
                 "bsa_success_cap": l.bsa_success_cap,
                 "base_fidelity": l.base_fidelity, "midpoint": l.midpoint}
                for l in self.links.values()
            ],
            "classical": {"authenticated": self.authenticated_default,
                          "latency_s_per_km": self.latency_s_per_km},
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@dataclass
class PartitionReport:
    component_sizes: list
    components: list
    disconnected_pairs_fraction: float
    end_node_pairs: int
    disconnected_pairs: int


@dataclass
class LoadReport:
    counts: dict
    normalized: dict

    def max_count(self) -> int:
        return max(self.counts.values()) if self.counts else 0


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

_DEGREE_RULE = {ENODE: (1, 1), MNODE: (1, 1), RNODE: (2, 2), XNODE: (2, None)}


def validate(nodes: list, links: list) -> list:
    """Structural checks; returns every violation with a stable rule id."""
    out: list = []
    by_id: dict = {}
    for n in nodes:
        if n.node_id in by_id:
            out.append(Violation(RULE_NODE_DUPLICATE, n.node_id, "duplicate node id"))
            continue
        by_id[n.node_id] = n
        if n.kind not in NODE_KINDS:
            out.append(Violation(RULE_NODE_KIND, n.node_id, f"unknown kind {n.kind!r}"))
            continue
        for role in ("interface", "buffer", "terminal"):
            if n.cap(role) < 0:
                out.append(Violation(RULE_NODE_CAPACITY, n.node_id, f"{role} capacity < 0"))
        if n.kind == MNODE and (n.cap("buffer") > 0 or n.cap("terminal") > 0):
            out.append(Violation(RULE_MNODE_MEMORY, n.node_id,
                                 "measurement-only node cannot hold buffer or terminal qubits"))
        if n.kind != ENODE and n.cap("terminal") > 0 and n.kind != MNODE:
            out.append(Violation(RULE_TERMINAL_PLACEMENT, n.node_id,
                                 "terminal qubits are an end-node role"))

    degree: dict = {nid: 0 for nid, n in by_id.items() if n.kind not in INODE_KINDS}
    seen_links: set = set()
    seen_pairs: set = set()
    midpoint_owner: dict = {}
    for l in links:
        if l.link_id in seen_links:
            out.append(Violation(RULE_LINK_DUPLICATE, l.link_id, "duplicate link id"))
            continue
        seen_links.add(l.link_id)
        ok = True
        for end in l.endpoints:
            if end not in by_id:
                out.append(Violation(RULE_LINK_DANGLING, l.link_id, f"endpoint {end} undefined"))
                ok = False
            elif by_id[end].kind in INODE_KINDS:
                out.append(Violation(RULE_INODE_ENDPOINT, l.link_id,
                                     f"{end} is link infrastructure, not an endpoint"))
                ok = False
        if not ok:
            continue
        if l.endpoint_a == l.endpoint_b:
            out.append(Violation(RULE_LINK_SELF_LOOP, l.link_id, "self loop"))
            continue
        pk = _pair_key(*l.endpoints)
        if pk in seen_pairs:
            out.append(Violation(RULE_LINK_PARALLEL, l.link_id,
                                 f"second link between {pk[0]} and {pk[1]}"))
            continue
        seen_pairs.add(pk)
        degree[l.endpoint_a] += 1
        degree[l.endpoint_b] += 1
        if l.length_km < 0:
            out.append(Violation(RULE_LINK_LENGTH, l.link_id, "negative length"))
        if l.architecture not in ARCHITECTURES:
            out.append(Violation(RULE_LINK_ARCH, l.link_id, f"unknown architecture {l.architecture!r}"))
            continue
        if l.attempt_rate_hz <= 0 or l.attenuation_db_per_km < 0:
            out.append(Violation(RULE_LINK_PARAMS, l.link_id,
                                 "attempt_rate_hz must be > 0 and attenuation >= 0"))
        if not (0.25 <= l.base_fidelity <= 1.0):
            out.append(Violation(RULE_LINK_FIDELITY, l.link_id,
                                 f"base_fidelity {l.base_fidelity} outside [0.25, 1]"))
        if l.architecture == MEMORIES_AND_BSA and not (0.0 < l.bsa_success_cap <= 0.5):
            out.append(Violation(RULE_BSA_CAP, l.link_id,
                                 f"bsa_success_cap {l.bsa_success_cap} outside (0, 0.5]"))
        need = _MIDPOINT_KIND[l.architecture]
        if need is None:
            if l.midpoint is not None:
                out.append(Violation(RULE_MIDPOINT_FORBIDDEN, l.link_id,
                                     "direct link takes no midpoint"))
        else:
            if l.midpoint is None:
                out.append(Violation(RULE_MIDPOINT_MISSING, l.link_id,
                                     f"{l.architecture} requires a midpoint {need}"))
            elif l.midpoint not in by_id or by_id[l.midpoint].kind != need:
                out.append(Violation(RULE_MIDPOINT_KIND, l.link_id,
                                     f"midpoint {l.midpoint} is not a {need}"))
            elif l.midpoint in midpoint_owner:
                out.append(Violation(RULE_INODE_SHARED, l.midpoint,
                                     f"already serves link {midpoint_owner[l.midpoint]}"))
            else:
                midpoint_owner[l.midpoint] = l.link_id

    for nid, n in by_id.items():
        if n.kind in INODE_KINDS:
            if nid not in midpoint_owner:
                out.append(Violation(RULE_INODE_UNUSED, nid, "INode attached to no link"))
            continue
        lo, hi = _DEGREE_RULE.get(n.kind, (0, None))
        d = degree.get(nid, 0)
        if d < lo or (hi is not None and d > hi):
            bound = f"exactly {lo}" if lo == hi else f"at least {lo}"
            out.append(Violation(RULE_DEGREE, nid, f"{n.kind} requires {bound} links, has {d}"))

    # connectivity over the routing graph (only if structure is sound so far)
    if not out and degree:
        adj: dict = {nid: [] for nid in degree}
        for l in links:
            adj[l.endpoint_a].append(l.endpoint_b)
            adj[l.endpoint_b].append(l.endpoint_a)
        start = next(iter(sorted(degree)))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != len(degree):
            missing = sorted(set(degree) - seen)
            out.append(Violation(RULE_CONNECTED, missing[0],
                                 f"{len(missing)} nodes unreachable from {start}"))
    return out
