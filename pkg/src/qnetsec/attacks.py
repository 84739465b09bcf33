"""Declarative adversary scripts and their load-time validation.

A script owns assets (compromised nodes, tapped quantum links, tapped
classical channels) plus knowledge flags, and lists timed actions. Every
action must reference an asset the script owns; the engine only ever
consults the tables built here, so an effect can never originate from an
asset outside the script (capability soundness by construction).

Physical-access kinds (`destroy_asset`, `steal_asset`, `standoff_noise`)
are the exception: they model outside intrusion and need no prior digital
compromise, only an existing target.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import Violation
from . import topology as topo

# closed catalog; scenario load rejects anything else
LINK_TAP_KINDS = ("eavesdrop_quantum", "intercept_resend", "entangling_probe",
                  "fault_inject")
LINK_OWNED_KINDS = ("link_down", "link_bad_faith")
CHANNEL_KINDS = ("eavesdrop_classical", "drop_messages", "modify_messages",
                 "reroute_messages", "classical_dos")
NODE_KINDS_ = ("false_failure_report", "mitm_bbm92", "switch_disrupt",
               "frame_nodes", "path_black_hole", "malicious_application")
REQUEST_KINDS = ("qdos_oversized_request", "qddos")
PHYSICAL_KINDS = ("destroy_asset", "steal_asset", "standoff_noise")

ATTACK_KINDS = tuple(sorted(LINK_TAP_KINDS + LINK_OWNED_KINDS + CHANNEL_KINDS
                            + NODE_KINDS_ + REQUEST_KINDS + PHYSICAL_KINDS))


def catalog() -> tuple:
    """The closed set of supported attack kinds."""
    return ATTACK_KINDS


RULE_KIND = "attack.unknown_kind"
RULE_ASSET = "attack.asset_not_owned"
RULE_TARGET = "attack.unknown_target"
RULE_PARAMS = "attack.bad_params"
RULE_WINDOW = "attack.bad_window"
RULE_PREDICT_PURIFY = "attack.predicts_sampling_with_purify"
RULE_DUP_ATTACKER = "attack.duplicate_attacker_id"
RULE_UNCLAIMED_HIJACK = "attack.unclaimed_hijack"


@dataclass(frozen=True)
class AttackAction:
    kind: str
    target: str | None = None
    params: dict = field(default_factory=dict)
    window: tuple = (0.0, None)  # None = run horizon

    def active(self, t: float, horizon: float) -> bool:
        t0, t1 = self.window
        end = horizon if t1 is None else t1
        return t0 <= t < end

    def start(self) -> float:
        return self.window[0]

    def end(self, horizon: float) -> float:
        return horizon if self.window[1] is None else min(self.window[1], horizon)


@dataclass(frozen=True)
class AttackScript:
    attacker_id: str
    compromised_nodes: frozenset = frozenset()
    tapped_quantum_links: frozenset = frozenset()
    tapped_classical_channels: frozenset = frozenset()  # of frozenset pairs
    predicts_sampling: bool = False
    holds_auth_keys: bool = False
    actions: tuple = ()


def _chan(a: str, b: str) -> frozenset:
    return frozenset((a, b))


def validate_script(script: AttackScript, topology: topo.Topology,
                    purify_enabled: bool) -> list:
    """Load-time checks; every failure carries a stable rule id."""
    out: list = []
    nodes = topology.nodes
    links = topology.links

    def bad(rule, msg, subject=None):
        out.append(Violation(rule, subject or script.attacker_id, msg))

    for n in script.compromised_nodes:
        if n not in nodes:
            bad(RULE_TARGET, f"compromised node {n} not in topology", n)
    for l in script.tapped_quantum_links:
        if l not in links:
            bad(RULE_TARGET, f"tapped link {l} not in topology", l)
    for ch in script.tapped_classical_channels:
        for n in ch:
            if n not in nodes:
                bad(RULE_TARGET, f"tapped channel endpoint {n} not in topology", n)

    if script.predicts_sampling and purify_enabled:
        # sampling prediction maps link pairs to delivered pairs one-to-one;
        # purification breaks that mapping, so the combination is rejected
        bad(RULE_PREDICT_PURIFY,
            "predicts_sampling cannot be combined with purification")

    for idx, act in enumerate(script.actions):
        subject = f"{script.attacker_id}#{idx}"
        t0, t1 = act.window
        if t0 < 0 or (t1 is not None and t1 <= t0):
            bad(RULE_WINDOW, f"window {act.window} is empty or negative", subject)
        if act.kind not in ATTACK_KINDS:
            bad(RULE_KIND, f"unknown attack kind {act.kind!r}", subject)
            continue
        if act.kind in LINK_TAP_KINDS:
            if act.target not in links:
                bad(RULE_TARGET, f"{act.kind} targets unknown link {act.target}", subject)
            elif act.target not in script.tapped_quantum_links:
                bad(RULE_ASSET, f"link {act.target} is not tapped by {script.attacker_id}", subject)
            if act.kind == "fault_inject":
                ch = act.params.get("channel")
                q = act.params.get("q")
                if ch not in ("depolarize", "dephase") or not _unit(q):
                    bad(RULE_PARAMS, "fault_inject needs channel in {depolarize,dephase} and q in [0,1]", subject)
        elif act.kind in LINK_OWNED_KINDS:
            link = links.get(act.target)
            if link is None:
                bad(RULE_TARGET, f"{act.kind} targets unknown link {act.target}", subject)
            elif not (set(link.endpoints) & script.compromised_nodes):
                bad(RULE_ASSET, f"no compromised endpoint on link {act.target}", subject)
        elif act.kind in CHANNEL_KINDS:
            tgt = act.target
            pair = _chan(*tgt) if isinstance(tgt, (list, tuple)) and len(tgt) == 2 else None
            if pair is None or not all(n in nodes for n in pair):
                bad(RULE_TARGET, f"{act.kind} target must be a known node pair, got {tgt}", subject)
            elif pair not in script.tapped_classical_channels and not (pair & script.compromised_nodes):
                bad(RULE_ASSET, f"channel {sorted(pair)} is neither tapped nor endpoint-compromised", subject)
            if act.kind == "classical_dos":
                d = act.params.get("delay_s", 0.01)
                if not (isinstance(d, (int, float)) and d > 0):
                    bad(RULE_PARAMS, "classical_dos needs delay_s > 0", subject)
        elif act.kind in NODE_KINDS_:
            if act.target not in nodes:
                bad(RULE_TARGET, f"{act.kind} acts at unknown node {act.target}", subject)
                continue
            if act.target not in script.compromised_nodes:
                bad(RULE_ASSET, f"node {act.target} is not compromised", subject)
            kind_node = nodes[act.target].kind
            if act.kind in ("mitm_bbm92", "switch_disrupt") and kind_node not in (topo.RNODE, topo.XNODE):
                bad(RULE_PARAMS, f"{act.kind} requires a swap-capable interior node", subject)
            if act.kind == "malicious_application" and kind_node != topo.ENODE:
                bad(RULE_PARAMS, "malicious_application runs on an end node", subject)
            if act.kind == "frame_nodes":
                victims = act.params.get("victims")
                if not victims or any(v not in nodes for v in victims):
                    bad(RULE_PARAMS, "frame_nodes needs existing victims[]", subject)
            if act.kind == "path_black_hole":
                adv = act.params.get("advertised_dst")
                if adv not in nodes:
                    bad(RULE_PARAMS, "path_black_hole needs advertised_dst in topology", subject)
            if act.kind == "false_failure_report":
                if act.params.get("accused") not in nodes:
                    bad(RULE_PARAMS, "false_failure_report needs accused in topology", subject)
            if act.kind == "switch_disrupt":
                pairing = act.params.get("cross")
                if not (isinstance(pairing, (list, tuple)) and len(pairing) == 2):
                    bad(RULE_PARAMS, "switch_disrupt needs cross: [demand_a, demand_b]", subject)
        elif act.kind in REQUEST_KINDS:
            srcs = [act.params.get("src")] if act.kind == "qdos_oversized_request" \
                else list(act.params.get("sources", ()))
            dst = act.params.get("dst")
            n_pairs = act.params.get("target_pairs", 0)
            if not srcs or any(s not in nodes for s in srcs) or dst not in nodes:
                bad(RULE_TARGET, f"{act.kind} needs known src/sources and dst", subject)
            elif any(s not in script.compromised_nodes for s in srcs):
                bad(RULE_ASSET, "request sources must be compromised end nodes", subject)
            if not (isinstance(n_pairs, int) and n_pairs > 0):
                bad(RULE_PARAMS, f"{act.kind} needs target_pairs > 0", subject)
        elif act.kind in PHYSICAL_KINDS:
            if act.kind == "standoff_noise":
                ns = act.params.get("nodes")
                q = act.params.get("q")
                if not ns or any(n not in nodes for n in ns) or not _unit(q):
                    bad(RULE_PARAMS, "standoff_noise needs existing nodes[] and q in [0,1]", subject)
            else:
                if act.target not in nodes and act.target not in links:
                    bad(RULE_TARGET, f"{act.kind} targets unknown asset {act.target}", subject)
                if act.kind == "steal_asset" and act.params.get("data", "quantum") not in ("classical", "quantum"):
                    bad(RULE_PARAMS, "steal_asset data must be classical or quantum", subject)
    return out


def _unit(q) -> bool:
    return isinstance(q, (int, float)) and 0.0 <= q <= 1.0 and not math.isnan(q)


# ---------------------------------------------------------------------------
# Runtime tables
# ---------------------------------------------------------------------------

@dataclass
class ChannelEffect:
    """One quantum-channel tampering entry for a link."""
    kind: str  # state-engine channel kind, or "destroy"
    q: float | None
    attacker: str
    leaks: bool
    action: AttackAction


class AttackRuntime:
    """Query layer between scripts and the engine.

    Built once per run; the engine asks what applies to a given asset at a
    given time and never sees the scripts themselves.
    """

    def __init__(self, scripts: list, topology: topo.Topology, horizon: float):
        self.scripts = list(scripts)
        self.topology = topology
        self.horizon = horizon
        self.by_attacker = {s.attacker_id: s for s in scripts}
        self.hijacked = set()
        for s in scripts:
            self.hijacked |= set(s.compromised_nodes)
        self._link_effects: dict = {}
        self._link_down: dict = {}
        self._bad_faith: dict = {}
        self._destroy_reads: dict = {}
        self._channel_actions: dict = {}
        self._node_actions: dict = {}
        self._physical: list = []
        self._requests: list = []
        self._predictors: dict = {}
        for s in scripts:
            for act in s.actions:
                self._index(s, act)

    def _index(self, s: AttackScript, act: AttackAction):
        k = act.kind
        if k in ("intercept_resend", "entangling_probe", "fault_inject"):
            channel_kind = {"intercept_resend": "intercept_resend_random_basis",
                            "entangling_probe": "entangling_probe"}.get(k)
            q = None
            leaks = True
            if k == "fault_inject":
                channel_kind = act.params["channel"]
                q = float(act.params["q"])
                leaks = False  # pure disturbance, no correlated record kept
            eff = ChannelEffect(channel_kind, q, s.attacker_id, leaks, act)
            if s.predicts_sampling:
                self._predictors.setdefault(act.target, []).append(eff)
            else:
                self._link_effects.setdefault(act.target, []).append(eff)
        elif k == "eavesdrop_quantum":
            self._destroy_reads.setdefault(act.target, []).append((s.attacker_id, act))
        elif k == "link_down":
            self._link_down.setdefault(act.target, []).append(act)
        elif k == "link_bad_faith":
            self._bad_faith.setdefault(act.target, []).append((s.attacker_id, act))
        elif k in CHANNEL_KINDS:
            pair = _chan(*act.target)
            self._channel_actions.setdefault(pair, []).append((s, act))
        elif k in NODE_KINDS_:
            self._node_actions.setdefault(act.target, []).append((s, act))
        elif k in REQUEST_KINDS:
            self._requests.append((s, act))
        else:
            self._physical.append((s, act))

    # -- quantum plane -----------------------------------------------------

    def pair_effects(self, link_id: str, t: float) -> list:
        """Tampering channels applied to a fresh pair on this link at time t."""
        return [e for e in self._link_effects.get(link_id, ())
                if e.action.active(t, self.horizon)]

    def predictor_effects(self, link_id: str) -> list:
        """Delivery-time effects for sampling-predicting attackers (applied
        only to pairs the engine flags as not-sacrificed)."""
        return list(self._predictors.get(link_id, ()))

    def read_destroys(self, link_id: str, t: float):
        for attacker, act in self._destroy_reads.get(link_id, ()):
            if act.active(t, self.horizon):
                return attacker
        return None

    def link_is_down(self, link_id: str, t: float) -> bool:
        return any(a.active(t, self.horizon) for a in self._link_down.get(link_id, ()))

    def bad_faith_attacker(self, link_id: str, t: float):
        for attacker, act in self._bad_faith.get(link_id, ()):
            if act.active(t, self.horizon):
                return attacker
        return None

    def link_boundaries(self, link_id: str) -> list:
        """Times at which any per-attempt property of this link toggles."""
        times = set()
        for coll in (self._link_effects.get(link_id, ()),):
            for e in coll:
                times.update((e.action.start(), e.action.end(self.horizon)))
        for act in self._link_down.get(link_id, ()):
            times.update((act.start(), act.end(self.horizon)))
        for _, act in self._destroy_reads.get(link_id, ()):
            times.update((act.start(), act.end(self.horizon)))
        return sorted(x for x in times if 0.0 < x < self.horizon)

    # -- classical plane ---------------------------------------------------

    def message_actions(self, a: str, b: str, t: float) -> list:
        """Active (script, action) entries on the classical channel a-b."""
        out = []
        for s, act in self._channel_actions.get(_chan(a, b), ()):
            if act.active(t, self.horizon):
                out.append((s, act))
        return out

    # -- node behaviors ----------------------------------------------------

    def node_action(self, node: str, kind: str, t: float | None = None):
        for s, act in self._node_actions.get(node, ()):
            if act.kind == kind and (t is None or act.active(t, self.horizon)):
                return s, act
        return None

    def black_hole_for(self, dst: str, t: float):
        """Node that attracted routes to dst by false advertisement, if any."""
        for node, entries in sorted(self._node_actions.items()):
            for s, act in entries:
                if act.kind == "path_black_hole" and act.active(t, self.horizon) \
                        and act.params["advertised_dst"] == dst:
                    return node, s.attacker_id
        return None

    def framing_actions(self) -> list:
        out = []
        for node, entries in sorted(self._node_actions.items()):
            for s, act in entries:
                if act.kind == "frame_nodes":
                    out.append((node, s, act))
        return out

    def false_failure_actions(self) -> list:
        out = []
        for node, entries in sorted(self._node_actions.items()):
            for s, act in entries:
                if act.kind == "false_failure_report":
                    out.append((node, s, act))
        return out

    def physical_actions(self) -> list:
        return list(self._physical)

    def request_floods(self) -> list:
        """Extra attacker-issued demands (QDoS / QDDoS)."""
        out = []
        for s, act in self._requests:
            srcs = [act.params["src"]] if act.kind == "qdos_oversized_request" \
                else list(act.params["sources"])
            for i, src in enumerate(srcs):
                out.append({
                    "attacker": s.attacker_id,
                    "src": src,
                    "dst": act.params["dst"],
                    "target_pairs": int(act.params["target_pairs"]),
                    "start": act.start(),
                    "tag": f"{act.kind}:{s.attacker_id}:{i}",
                })
        return out

    def holds_auth_keys(self, attacker: str, t: float) -> bool:
        s = self.by_attacker.get(attacker)
        if s is None:
            return False
        if s.holds_auth_keys:
            return True
        # classical hardware theft surrenders stored credentials from then on
        for s2, act in self._physical:
            if s2.attacker_id == attacker and act.kind == "steal_asset" \
                    and act.params.get("data") == "classical" and t >= act.start():
                return True
        return False
