"""Scenario documents: the single JSON file that drives a run.

Top-level sections (all lists may be empty, `nodes` and `links` must not):

    format_version : int, currently 1
    seed           : int, base RNG seed (CLI --seed overrides)
    nodes[]        : {id, kind, capacity?{interface,buffer,terminal}, hijacked?}
    links[]        : {id, a, b, architecture?, length_km?, attenuation_db_per_km?,
                      attempt_rate_hz?, bsa_success_cap?, base_fidelity?, midpoint?}
    classical{}    : {authenticated?, latency_s_per_km?,
                      overrides?[{a, b, authenticated?, compromised_by?}]}
    demands[]      : {id?, src, dst, application? (pairs|bbm92), target_pairs?,
                      sifted_target?, sacrifice_fraction?, routing_cost?}
    attacks[]      : {attacker, compromised_nodes?, tapped_quantum_links?,
                      tapped_classical_channels? [[a,b],...],
                      knowledge?{predicts_sampling, holds_auth_keys},
                      actions[{kind, target?, params?, window?[t0,t1|null]}]}
    protocol{}     : engine knobs, see PROTOCOL_DEFAULTS

The normalized form fills every default, sorts collections, and is the
basis of the two content hashes: `fingerprint` covers everything including
the seed; `core_fingerprint` strips `attacks` and `seed` so an attack run
can be diffed against its honest baseline.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

from . import attacks as atk
from . import topology as topo
from .errors import ValidationError, Violation

FORMAT_VERSION = 1

APP_PAIRS = "pairs"
APP_BBM92 = "bbm92"
APPLICATIONS = (APP_PAIRS, APP_BBM92)

CERT_SCOPE_E2E = "e2e"
CERT_SCOPE_LINK = "link"

PROTOCOL_DEFAULTS = {
    "horizon_s": 10.0,
    "cert_scope": CERT_SCOPE_E2E,
    "sacrifice_fraction": 0.1,
    "qber_abort_threshold": 0.11,
    "check_fraction": 0.5,
    "fidelity_floor": 0.85,
    "qber_ceiling": 0.11,
    "delta": 0.01,
    "min_cert_samples": 30,
    "cert_mode_weights": {"qber_z": 0.4, "qber_x": 0.4, "chsh": 0.2},
    "reputation": {"policy": "naive", "k": 2},
    "purify": {"enabled": False, "f_target": 0.9, "max_rounds": 4},
    "routing_cost": topo.COST_HOPS,
    "path_setup_timeout_rtts": 10.0,
    "pending_pairs_per_link": 8,
    "memory_decay_time_s": None,  # None disables storage decay
}

RULE_SECTION = "scenario.bad_section"
RULE_FORMAT = "scenario.format_version"
RULE_SEED = "scenario.bad_seed"
RULE_UNKNOWN_KEY = "scenario.unknown_key"
RULE_DEMAND_NODE = "demand.unknown_node"
RULE_DEMAND_END = "demand.not_end_node"
RULE_DEMAND_TERMINAL = "demand.pairs_need_terminal"
RULE_DEMAND_DUP = "demand.duplicate_id"
RULE_DEMAND_TARGET = "demand.nonpositive_target"
RULE_DEMAND_APP = "demand.unknown_application"
RULE_PROTOCOL = "protocol.bad_value"


@dataclass(frozen=True)
class Demand:
    demand_id: str
    src: str
    dst: str
    application: str = APP_PAIRS
    target_pairs: int = 50
    sifted_target: int | None = None
    sacrifice_fraction: float | None = None  # None = protocol default
    routing_cost: str | None = None
    injected_by: str | None = None  # set for attacker flood demands


@dataclass
class Scenario:
    topology: topo.Topology
    demands: list
    scripts: list
    protocol: dict
    seed: int
    normalized: dict
    fingerprint: str
    core_fingerprint: str
    name: str = ""

    def sacrifice_for(self, demand: Demand) -> float:
        if demand.sacrifice_fraction is not None:
            return demand.sacrifice_fraction
        return self.protocol["sacrifice_fraction"]

    def cost_for(self, demand: Demand) -> str:
        return demand.routing_cost or self.protocol["routing_cost"]


def _hash(doc) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


_ALLOWED_KEYS = {
    "": {"format_version", "name", "seed", "nodes", "links", "classical",
         "demands", "attacks", "protocol"},
    "nodes[]": {"id", "kind", "hijacked", "capacity"},
    "capacity": {"interface", "buffer", "terminal"},
    "links[]": {"id", "a", "b", "architecture", "length_km",
                "attenuation_db_per_km", "attempt_rate_hz", "bsa_success_cap",
                "base_fidelity", "midpoint"},
    "classical": {"authenticated", "latency_s_per_km", "overrides"},
    "overrides[]": {"a", "b", "authenticated", "compromised_by"},
    "demands[]": {"id", "src", "dst", "application", "target_pairs",
                  "sifted_target", "sacrifice_fraction", "routing_cost"},
    "attacks[]": {"attacker", "compromised_nodes", "tapped_quantum_links",
                  "tapped_classical_channels", "knowledge", "actions"},
    "knowledge": {"predicts_sampling", "holds_auth_keys"},
    "actions[]": {"kind", "target", "params", "window"},
}


def _scan_unknown(doc: dict) -> list:
    """Reject keys the normalizer would silently drop. A misplaced flag
    (say predicts_sampling outside knowledge{}) must fail, not default."""
    out = []

    def check(mapping, kind, where):
        if not isinstance(mapping, dict):
            return
        for key in sorted(set(mapping) - _ALLOWED_KEYS[kind]):
            out.append(Violation(RULE_UNKNOWN_KEY, where,
                                 f"unknown key {key!r}"))

    check(doc, "", "document")
    for section in ("nodes", "links", "demands", "attacks"):
        for i, entry in enumerate(doc.get(section) or ()):
            where = f"{section}[{i}]"
            check(entry, f"{section}[]", where)
            if not isinstance(entry, dict):
                continue
            if section == "nodes":
                check(entry.get("capacity") or {}, "capacity", where)
            elif section == "attacks":
                check(entry.get("knowledge") or {}, "knowledge", where)
                for j, act in enumerate(entry.get("actions") or ()):
                    check(act, "actions[]", f"{where}.actions[{j}]")
    classical = doc.get("classical") or {}
    check(classical, "classical", "classical")
    if isinstance(classical, dict):
        for i, ov in enumerate(classical.get("overrides") or ()):
            check(ov, "overrides[]", f"classical.overrides[{i}]")
    protocol = doc.get("protocol") or {}
    for key in sorted(set(protocol) - set(PROTOCOL_DEFAULTS)):
        out.append(Violation(RULE_UNKNOWN_KEY, "protocol",
                             f"unknown key {key!r}"))
    for key, sub in protocol.items() if isinstance(protocol, dict) else ():
        base = PROTOCOL_DEFAULTS.get(key)
        if isinstance(base, dict) and isinstance(sub, dict):
            for k in sorted(set(sub) - set(base)):
                out.append(Violation(RULE_UNKNOWN_KEY, f"protocol.{key}",
                                     f"unknown key {k!r}"))
    return out


def normalize(doc: dict) -> dict:
    """Fill defaults and impose canonical ordering. Pure, no validation."""
    out = {
        "format_version": int(doc.get("format_version", FORMAT_VERSION)),
        "name": str(doc.get("name", "")),
        "seed": int(doc.get("seed", 0)),
        "nodes": [],
        "links": [],
        "classical": {},
        "demands": [],
        "attacks": [],
        "protocol": {},
    }
    for n in sorted(doc.get("nodes", ()), key=lambda d: str(d.get("id"))):
        kind = n.get("kind", "")
        cap = dict(n.get("capacity") or {})
        defaults = topo.DEFAULT_CAPACITY.get(kind, {"interface": 0, "buffer": 0, "terminal": 0})
        out["nodes"].append({
            "id": n.get("id"),
            "kind": kind,
            "hijacked": bool(n.get("hijacked", False)),
            "capacity": {r: int(cap.get(r, defaults[r])) for r in ("interface", "buffer", "terminal")},
        })
    for l in sorted(doc.get("links", ()), key=lambda d: str(d.get("id"))):
        out["links"].append({
            "id": l.get("id"),
            "a": l.get("a"),
            "b": l.get("b"),
            "architecture": l.get("architecture", topo.MEMORY_TO_MEMORY),
            "length_km": float(l.get("length_km", 1.0)),
            "attenuation_db_per_km": float(l.get("attenuation_db_per_km", topo.DEFAULT_ATTENUATION_DB_PER_KM)),
            "attempt_rate_hz": float(l.get("attempt_rate_hz", topo.DEFAULT_ATTEMPT_RATE_HZ)),
            "bsa_success_cap": float(l.get("bsa_success_cap", topo.DEFAULT_BSA_SUCCESS_CAP)),
            "base_fidelity": float(l.get("base_fidelity", topo.DEFAULT_BASE_FIDELITY)),
            "midpoint": l.get("midpoint"),
        })
    classical = doc.get("classical") or {}
    out["classical"] = {
        "authenticated": bool(classical.get("authenticated", True)),
        "latency_s_per_km": float(classical.get("latency_s_per_km", topo.DEFAULT_LATENCY_S_PER_KM)),
        "overrides": sorted(
            ({"a": min(o["a"], o["b"]), "b": max(o["a"], o["b"]),
              "authenticated": bool(o.get("authenticated", classical.get("authenticated", True))),
              "compromised_by": o.get("compromised_by")}
             for o in classical.get("overrides", ())),
            key=lambda o: (o["a"], o["b"])),
    }
    for i, d in enumerate(doc.get("demands", ())):
        out["demands"].append({
            "id": d.get("id", f"d{i}"),
            "src": d.get("src"),
            "dst": d.get("dst"),
            "application": d.get("application", APP_PAIRS),
            "target_pairs": int(d.get("target_pairs", 50)),
            "sifted_target": None if d.get("sifted_target") is None else int(d["sifted_target"]),
            "sacrifice_fraction": None if d.get("sacrifice_fraction") is None else float(d["sacrifice_fraction"]),
            "routing_cost": d.get("routing_cost"),
        })
    out["demands"].sort(key=lambda d: str(d["id"]))
    for a in sorted(doc.get("attacks", ()), key=lambda d: str(d.get("attacker"))):
        knowledge = a.get("knowledge") or {}
        out["attacks"].append({
            "attacker": a.get("attacker"),
            "compromised_nodes": sorted(a.get("compromised_nodes", ())),
            "tapped_quantum_links": sorted(a.get("tapped_quantum_links", ())),
            "tapped_classical_channels": sorted(
                [sorted(ch) for ch in a.get("tapped_classical_channels", ())]),
            "knowledge": {
                "predicts_sampling": bool(knowledge.get("predicts_sampling", False)),
                "holds_auth_keys": bool(knowledge.get("holds_auth_keys", False)),
            },
            "actions": [
                {"kind": act.get("kind"),
                 "target": act.get("target"),
                 "params": dict(act.get("params") or {}),
                 "window": list(act.get("window") or (0.0, None))}
                for act in a.get("actions", ())
            ],
        })
    protocol = copy.deepcopy(PROTOCOL_DEFAULTS)
    for key, val in (doc.get("protocol") or {}).items():
        if isinstance(val, dict) and isinstance(protocol.get(key), dict):
            protocol[key].update(val)
        else:
            protocol[key] = val
    out["protocol"] = protocol
    return out


def fingerprints(normalized: dict) -> tuple[str, str]:
    full = _hash(normalized)
    # an attack variant shares its honest baseline's core print, so the
    # adversarial sections and labels stay out of the core hash; hijack and
    # channel-compromise marks are attacker provenance and get blanked too
    core_doc = {k: v for k, v in normalized.items()
                if k not in ("attacks", "seed", "name")}
    core_doc["nodes"] = [{**n, "hijacked": False} for n in core_doc["nodes"]]
    classical = dict(core_doc["classical"])
    classical["overrides"] = [{**o, "compromised_by": None}
                              for o in classical["overrides"]]
    core_doc["classical"] = classical
    return full, _hash(core_doc)


def load_scenario(doc: dict, *, seed_override: int | None = None,
                  cert_scope_override: str | None = None) -> Scenario:
    """Validate a raw document into a runnable Scenario.

    Raises ValidationError carrying *all* violations, each with a rule id.
    """
    violations: list = []
    if not isinstance(doc, dict):
        raise ValidationError([Violation(RULE_SECTION, "document", "scenario must be a JSON object")])
    for section in ("nodes", "links"):
        if not doc.get(section):
            violations.append(Violation(RULE_SECTION, section, f"missing or empty {section}[]"))
    if violations:
        raise ValidationError(violations)
    if int(doc.get("format_version", FORMAT_VERSION)) != FORMAT_VERSION:
        violations.append(Violation(RULE_FORMAT, "format_version",
                                    f"unsupported version {doc.get('format_version')}"))
    violations += _scan_unknown(doc)

    norm = normalize(doc)
    if seed_override is not None:
        norm["seed"] = int(seed_override)
    if cert_scope_override is not None:
        norm["protocol"]["cert_scope"] = cert_scope_override

    nodes = [topo.NodeSpec(n["id"], n["kind"], hijacked=n["hijacked"], capacity=n["capacity"])
             for n in norm["nodes"]]
    links = [topo.LinkSpec(l["id"], l["a"], l["b"], architecture=l["architecture"],
                           length_km=l["length_km"],
                           attenuation_db_per_km=l["attenuation_db_per_km"],
                           attempt_rate_hz=l["attempt_rate_hz"],
                           bsa_success_cap=l["bsa_success_cap"],
                           base_fidelity=l["base_fidelity"],
                           midpoint=l["midpoint"])
             for l in norm["links"]]
    violations += topo.validate(nodes, links)
    if violations:
        raise ValidationError(violations)

    overrides = {}
    for o in norm["classical"]["overrides"]:
        overrides[(o["a"], o["b"])] = {k: v for k, v in o.items() if k not in ("a", "b")}
    topology = topo.Topology({n.node_id: n for n in nodes}, {l.link_id: l for l in links},
                             authenticated=norm["classical"]["authenticated"],
                             latency_s_per_km=norm["classical"]["latency_s_per_km"],
                             channel_overrides=overrides)

    protocol = norm["protocol"]
    violations += _check_protocol(protocol)

    demands = []
    seen_ids: set = set()
    for d in norm["demands"]:
        did = str(d["id"])
        if did in seen_ids:
            violations.append(Violation(RULE_DEMAND_DUP, did, "duplicate demand id"))
            continue
        seen_ids.add(did)
        ok = True
        for side in ("src", "dst"):
            n = d[side]
            if n not in topology.nodes:
                violations.append(Violation(RULE_DEMAND_NODE, did, f"{side} {n} not in topology"))
                ok = False
            elif topology.nodes[n].kind not in topo.END_KINDS:
                violations.append(Violation(RULE_DEMAND_END, did, f"{side} {n} is not an end node"))
                ok = False
        if not ok:
            continue
        if d["application"] not in APPLICATIONS:
            violations.append(Violation(RULE_DEMAND_APP, did, f"unknown application {d['application']!r}"))
            continue
        if d["application"] == APP_PAIRS:
            for side in ("src", "dst"):
                if topology.nodes[d[side]].cap("terminal") < 1:
                    violations.append(Violation(RULE_DEMAND_TERMINAL, did,
                                                f"{d[side]} has no terminal qubits to hold delivered pairs"))
        if d["target_pairs"] <= 0 and not d["sifted_target"]:
            violations.append(Violation(RULE_DEMAND_TARGET, did, "needs target_pairs > 0 or sifted_target"))
        demands.append(Demand(did, d["src"], d["dst"], d["application"],
                              d["target_pairs"], d["sifted_target"],
                              d["sacrifice_fraction"], d["routing_cost"]))

    scripts = []
    seen_attackers: set = set()
    hijack_claimed: set = set()
    for a in norm["attacks"]:
        aid = a["attacker"]
        if aid in seen_attackers:
            violations.append(Violation(atk.RULE_DUP_ATTACKER, aid, "duplicate attacker id"))
            continue
        seen_attackers.add(aid)
        script = atk.AttackScript(
            attacker_id=aid,
            compromised_nodes=frozenset(a["compromised_nodes"]),
            tapped_quantum_links=frozenset(a["tapped_quantum_links"]),
            tapped_classical_channels=frozenset(frozenset(ch) for ch in a["tapped_classical_channels"]),
            predicts_sampling=a["knowledge"]["predicts_sampling"],
            holds_auth_keys=a["knowledge"]["holds_auth_keys"],
            actions=tuple(atk.AttackAction(act["kind"], act["target"], act["params"],
                                           (float(act["window"][0]),
                                            None if act["window"][1] is None else float(act["window"][1])))
                          for act in a["actions"]),
        )
        violations += atk.validate_script(script, topology, protocol["purify"]["enabled"])
        hijack_claimed |= set(script.compromised_nodes)
        scripts.append(script)

    for n in nodes:
        if n.hijacked and n.node_id not in hijack_claimed:
            violations.append(Violation(atk.RULE_UNCLAIMED_HIJACK, n.node_id,
                                        "marked hijacked but no attack script claims it"))

    if violations:
        raise ValidationError(violations)

    full, core = fingerprints(norm)
    return Scenario(topology, demands, scripts, protocol, norm["seed"], norm,
                    full, core, name=norm["name"])


def load_scenario_file(path: str, **kwargs) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scenario(json.load(fh), **kwargs)


def dump_normalized(normalized: dict) -> str:
    return json.dumps(normalized, sort_keys=True, indent=2) + "\n"


def _check_protocol(p: dict) -> list:
    out = []

    def bad(key, msg):
        out.append(Violation(RULE_PROTOCOL, key, msg))

    if p["horizon_s"] <= 0:
        bad("horizon_s", "must be > 0")
    if p["cert_scope"] not in (CERT_SCOPE_E2E, CERT_SCOPE_LINK):
        bad("cert_scope", f"must be {CERT_SCOPE_E2E} or {CERT_SCOPE_LINK}")
    for key in ("sacrifice_fraction", "check_fraction", "qber_abort_threshold",
                "fidelity_floor", "qber_ceiling"):
        if not (0.0 <= float(p[key]) <= 1.0):
            bad(key, "must lie in [0, 1]")
    if not (0.0 < float(p["delta"]) < 1.0):
        bad("delta", "must lie in (0, 1)")
    if int(p["min_cert_samples"]) < 1:
        bad("min_cert_samples", "must be >= 1")
    if p["routing_cost"] not in (topo.COST_HOPS, topo.COST_NEG_LOG_FIDELITY):
        bad("routing_cost", "unknown cost function")
    rep = p["reputation"]
    if rep.get("policy") not in ("naive", "hardened"):
        bad("reputation.policy", "must be naive or hardened")
    if int(rep.get("k", 0)) < 1:
        bad("reputation.k", "must be >= 1")
    pur = p["purify"]
    if pur["enabled"] and not (0.25 <= float(pur["f_target"]) <= 1.0):
        bad("purify.f_target", "must lie in [0.25, 1]")
    if int(pur.get("max_rounds", 0)) < 0:
        bad("purify.max_rounds", "must be >= 0")
    weights = p["cert_mode_weights"]
    if set(weights) != {"qber_z", "qber_x", "chsh"} or min(weights.values()) < 0 \
            or abs(sum(weights.values()) - 1.0) > 1e-9:
        bad("cert_mode_weights", "need qber_z/qber_x/chsh summing to 1")
    if float(p["path_setup_timeout_rtts"]) <= 0:
        bad("path_setup_timeout_rtts", "must be > 0")
    if int(p["pending_pairs_per_link"]) < 1:
        bad("pending_pairs_per_link", "must be >= 1")
    tau = p["memory_decay_time_s"]
    if tau is not None and float(tau) <= 0:
        bad("memory_decay_time_s", "must be > 0 or null")
    return out
