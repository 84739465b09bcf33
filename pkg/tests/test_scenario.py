import copy
import json

import pytest

from qnetsec import attacks as atk
from qnetsec import scenario as sc
from qnetsec import topology as topo
from qnetsec.errors import ValidationError


def minimal_doc():
    return {
        "seed": 7,
        "nodes": [
            {"id": "a", "kind": "ENode"},
            {"id": "b", "kind": "ENode"},
        ],
        "links": [
            {"id": "L", "a": "a", "b": "b", "length_km": 2.0},
        ],
        "demands": [
            {"id": "d1", "src": "a", "dst": "b", "target_pairs": 10},
        ],
    }


def rules_of(excinfo):
    return {v.rule for v in excinfo.value.violations}


def test_minimal_scenario_loads_with_defaults():
    s = sc.load_scenario(minimal_doc())
    assert s.seed == 7
    assert s.protocol["cert_scope"] == "e2e"
    assert s.protocol["sacrifice_fraction"] == 0.1
    assert s.demands[0].application == sc.APP_PAIRS
    assert s.topology.links["L"].base_fidelity == topo.DEFAULT_BASE_FIDELITY
    assert s.scripts == []


def test_fingerprint_is_key_order_insensitive():
    doc1 = minimal_doc()
    doc2 = json.loads(json.dumps(doc1))
    doc2["nodes"] = list(reversed(doc2["nodes"]))
    s1, s2 = sc.load_scenario(doc1), sc.load_scenario(doc2)
    assert s1.fingerprint == s2.fingerprint
    assert s1.core_fingerprint == s2.core_fingerprint


def test_seed_changes_full_but_not_core_fingerprint():
    s1 = sc.load_scenario(minimal_doc())
    s2 = sc.load_scenario(minimal_doc(), seed_override=99)
    assert s1.fingerprint != s2.fingerprint
    assert s1.core_fingerprint == s2.core_fingerprint
    assert s2.seed == 99


def test_attacks_change_full_but_not_core_fingerprint():
    doc = minimal_doc()
    doc["attacks"] = [{
        "attacker": "eve",
        "tapped_quantum_links": ["L"],
        "actions": [{"kind": "intercept_resend", "target": "L"}],
    }]
    s_attack = sc.load_scenario(doc)
    s_plain = sc.load_scenario(minimal_doc())
    assert s_attack.fingerprint != s_plain.fingerprint
    assert s_attack.core_fingerprint == s_plain.core_fingerprint
    assert len(s_attack.scripts) == 1
    assert s_attack.scripts[0].actions[0].kind == "intercept_resend"


def test_content_change_moves_both_fingerprints():
    doc = minimal_doc()
    doc["links"][0]["length_km"] = 3.0
    s1, s2 = sc.load_scenario(minimal_doc()), sc.load_scenario(doc)
    assert s1.fingerprint != s2.fingerprint
    assert s1.core_fingerprint != s2.core_fingerprint


def test_hijack_marks_stay_out_of_the_core_fingerprint():
    # a compromised-node variant must still diff against its honest baseline
    doc = minimal_doc()
    doc["nodes"][0]["hijacked"] = True
    doc["attacks"] = [{
        "attacker": "eve",
        "compromised_nodes": ["a"],
        "actions": [{"kind": "qdos_oversized_request",
                     "params": {"src": "a", "dst": "b", "target_pairs": 5}}],
    }]
    s_attack = sc.load_scenario(doc)
    s_plain = sc.load_scenario(minimal_doc())
    assert s_attack.fingerprint != s_plain.fingerprint
    assert s_attack.core_fingerprint == s_plain.core_fingerprint


def test_normalized_dump_is_deterministic():
    a = sc.dump_normalized(sc.normalize(minimal_doc()))
    b = sc.dump_normalized(sc.normalize(json.loads(json.dumps(minimal_doc()))))
    assert a == b
    assert a.endswith("\n")


def test_topology_violations_surface_with_rule_ids():
    doc = minimal_doc()
    doc["nodes"].append({"id": "R", "kind": "RNode"})
    doc["nodes"].append({"id": "c", "kind": "ENode"})
    doc["links"] = [
        {"id": "L1", "a": "a", "b": "R"}, {"id": "L2", "a": "b", "b": "R"},
        {"id": "L3", "a": "c", "b": "R"},
    ]
    with pytest.raises(ValidationError) as ei:
        sc.load_scenario(doc)
    assert topo.RULE_DEGREE in rules_of(ei)


def test_demand_referencing_unknown_node_rejected():
    doc = minimal_doc()
    doc["demands"][0]["dst"] = "ghost"
    with pytest.raises(ValidationError) as ei:
        sc.load_scenario(doc)
    assert sc.RULE_DEMAND_NODE in rules_of(ei)


def test_demand_must_terminate_on_end_nodes():
    doc = minimal_doc()
    doc["nodes"].append({"id": "R", "kind": "RNode"})
    doc["links"] = [{"id": "L1", "a": "a", "b": "R"}, {"id": "L2", "a": "R", "b": "b"}]
    doc["demands"].append({"id": "d2", "src": "a", "dst": "R", "target_pairs": 5})
    with pytest.raises(ValidationError) as ei:
        sc.load_scenario(doc)
    assert sc.RULE_DEMAND_END in rules_of(ei)


def test_unknown_attack_kind_rejected():
    doc = minimal_doc()
    doc["attacks"] = [{"attacker": "eve", "actions": [{"kind": "time_travel"}]}]
    with pytest.raises(ValidationError) as ei:
        sc.load_scenario(doc)
    assert atk.RULE_KIND in rules_of(ei)


def test_attack_on_unowned_asset_rejected():
    doc = minimal_doc()
    doc["attacks"] = [{
        "attacker": "eve",
        "tapped_quantum_links": [],  # not tapped, so the action is illegal
        "actions": [{"kind": "intercept_resend", "target": "L"}],
    }]
    with pytest.raises(ValidationError) as ei:
        sc.load_scenario(doc)
    assert atk.RULE_ASSET in rules_of(ei)


def test_predicts_sampling_with_purification_rejected():
    doc = minimal_doc()
    doc["protocol"] = {"purify": {"enabled": True, "f_target": 0.99}}
    doc["attacks"] = [{
        "attacker": "eve",
        "tapped_quantum_links": ["L"],
        "knowledge": {"predicts_sampling": True},
        "actions": [{"kind": "entangling_probe", "target": "L"}],
    }]
    with pytest.raises(ValidationError) as ei:
        sc.load_scenario(doc)
    assert atk.RULE_PREDICT_PURIFY in rules_of(ei)


def test_hijacked_flag_needs_claiming_script():
    doc = minimal_doc()
    doc["nodes"][0]["hijacked"] = True
    with pytest.raises(ValidationError) as ei:
        sc.load_scenario(doc)
    assert atk.RULE_UNCLAIMED_HIJACK in rules_of(ei)


def test_protocol_nested_override_merges():
    doc = minimal_doc()
    doc["protocol"] = {"reputation": {"k": 3}, "horizon_s": 2.5}
    s = sc.load_scenario(doc)
    assert s.protocol["reputation"]["k"] == 3
    assert s.protocol["reputation"]["policy"] == "naive"  # untouched default
    assert s.protocol["horizon_s"] == 2.5


def test_bad_protocol_value_rejected():
    doc = minimal_doc()
    doc["protocol"] = {"cert_scope": "everywhere"}
    with pytest.raises(ValidationError) as ei:
        sc.load_scenario(doc)
    assert sc.RULE_PROTOCOL in rules_of(ei)


def test_cert_scope_override_applies():
    s = sc.load_scenario(minimal_doc(), cert_scope_override="link")
    assert s.protocol["cert_scope"] == "link"


def test_attack_catalog_is_closed_and_sorted():
    kinds = atk.catalog()
    assert kinds == tuple(sorted(kinds))
    for expected in ("intercept_resend", "mitm_bbm92", "switch_disrupt",
                     "frame_nodes", "path_black_hole", "qddos",
                     "malicious_application", "link_bad_faith"):
        assert expected in kinds


def test_window_validation():
    doc = minimal_doc()
    doc["attacks"] = [{
        "attacker": "eve",
        "tapped_quantum_links": ["L"],
        "actions": [{"kind": "intercept_resend", "target": "L", "window": [5.0, 1.0]}],
    }]
    with pytest.raises(ValidationError) as ei:
        sc.load_scenario(doc)
    assert atk.RULE_WINDOW in rules_of(ei)
