"""Run artifacts: report JSON, event CSV, seed-sweep aggregation, diffing.

Everything here is plain-dict plumbing over a finished Engine.  The only
invariants that matter:

- serialization is canonical (sorted keys), so identical runs produce
  byte-identical files apart from the wall-clock field;
- a diff against a baseline refuses to compare runs of structurally
  different scenarios unless forced.
"""
import csv
import io
import json
import math

from .errors import ValidationError, Violation

REPORT_FORMAT_VERSION = 1
EVENT_COLUMNS = ("time_s", "seq", "kind", "node", "connection", "asset", "detail")

RULE_DIFF_FINGERPRINT = "diff.fingerprint_mismatch"
RULE_DIFF_FORMAT = "diff.bad_report"

# ledger entries that diff as plain numbers
_LEDGER_NUMERIC = (
    "link_pairs_generated",
    "records_created",
    "confidentiality_leaked_pairs",
    "leaked_key_bits",
    "integrity_bad_delivered",
    "corrupted_key_bits",
    "disconnected_pair_fraction",
)


def build_report(engine, *, wall_s: float = 0.0) -> dict:
    """Snapshot a finished engine into a JSON-ready dict."""
    scn = engine.scn
    connections = [engine.connection_summary(engine.conns[cid])
                   for cid in sorted(engine.conns)]
    certification = [rep.to_dict() for _, rep in sorted(engine.cert_reports().items())]
    detection = [
        {"action": key, "latency_s": None if lat == "not_detected" else lat,
         "detected": lat != "not_detected"}
        for key, lat in sorted(engine.ledger.detection_latency_s.items())
    ]
    effects = [
        {"attacker": attacker, "kind": kind, "target": target,
         "count": slot["count"], "first_s": slot["first_s"], "last_s": slot["last_s"]}
        for (attacker, kind, target), slot in sorted(engine.attack_effects.items())
    ]
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "scenario": {
            "name": scn.name,
            "seed": scn.seed,
            "fingerprint": scn.fingerprint,
            "core_fingerprint": scn.core_fingerprint,
        },
        "wall_clock_s": wall_s,
        "horizon_s": engine.horizon,
        "connections": connections,
        "links": engine.link_summary(),
        "certification": certification,
        "verdicts": dict(sorted(engine.verdicts.items())),
        "detection": detection,
        "reputation": engine.reputation.to_dict(),
        "cia_ledger": engine.ledger.to_dict(),
        "attacks_effects": effects,
    }


def dump_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def events_csv(engine) -> str:
    """Render the event log with a fixed column set.

    `detail` is compact JSON with sorted keys so the file is reproducible
    byte for byte.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for ev in engine.events or ():
        w.writerow([repr(ev.time_s), ev.seq, ev.kind, ev.node, ev.connection,
                    ev.asset,
                    json.dumps(ev.detail, sort_keys=True, separators=(",", ":"),
                               default=str)])
    return buf.getvalue()


def write_run(engine, out_dir, *, wall_s: float = 0.0, suffix: str = "") -> dict:
    """Write report.json and events.csv into out_dir; returns the paths."""
    import os
    os.makedirs(out_dir, exist_ok=True)
    report = build_report(engine, wall_s=wall_s)
    report_path = os.path.join(out_dir, f"report{suffix}.json")
    events_path = os.path.join(out_dir, f"events{suffix}.csv")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(dump_report(report))
    with open(events_path, "w", encoding="utf-8") as fh:
        fh.write(events_csv(engine))
    return {"report": report_path, "events": events_path}


def _mean_ci(values) -> dict:
    """Mean with a 95% normal-approximation interval half-width."""
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return {"mean": mean, "ci95": 0.0, "n": n}
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return {"mean": mean, "ci95": 1.96 * math.sqrt(var / n), "n": n}


def aggregate(reports: list) -> dict:
    """Merge per-seed reports into mean/CI tables for plotting."""
    if not reports:
        raise ValidationError([Violation(RULE_DIFF_FORMAT, "aggregate",
                                         "no reports to aggregate")])
    throughput: dict = {}
    delivered: dict = {}
    latencies: dict = {}
    detected: dict = {}
    ledger_vals: dict = {k: [] for k in _LEDGER_NUMERIC}
    for rep in reports:
        for conn in rep["connections"]:
            cid = conn["connection"]
            throughput.setdefault(cid, []).append(conn["throughput_per_s"])
            delivered.setdefault(cid, []).append(conn["delivered_pairs"])
        for ent in rep["detection"]:
            detected.setdefault(ent["action"], []).append(ent["detected"])
            if ent["detected"]:
                latencies.setdefault(ent["action"], []).append(ent["latency_s"])
        for key in _LEDGER_NUMERIC:
            ledger_vals[key].append(rep["cia_ledger"][key])
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "n_runs": len(reports),
        "seeds": [rep["scenario"]["seed"] for rep in reports],
        "scenario": {
            "name": reports[0]["scenario"]["name"],
            "core_fingerprint": reports[0]["scenario"]["core_fingerprint"],
        },
        "throughput_per_s": {cid: _mean_ci(v) for cid, v in sorted(throughput.items())},
        "delivered_pairs": {cid: _mean_ci(v) for cid, v in sorted(delivered.items())},
        "detection_latency_s": {k: _mean_ci(v) for k, v in sorted(latencies.items())},
        "detection_rate": {k: sum(v) / len(v) for k, v in sorted(detected.items())},
        "cia_ledger": {k: _mean_ci(v) for k, v in sorted(ledger_vals.items())},
    }


def _pairwise(a: dict, b: dict) -> dict:
    """Entries of two keyed numeric tables that differ, with deltas."""
    out = {}
    for key in sorted(set(a) | set(b)):
        va, vb = a.get(key), b.get(key)
        if va == vb:
            continue
        ent = {"baseline": va, "candidate": vb}
        if isinstance(va, (int, float)) and isinstance(vb, (int, float)):
            ent["delta"] = vb - va
        out[key] = ent
    return out


def diff_reports(baseline: dict, candidate: dict, *, force: bool = False) -> dict:
    """Structured attack-vs-baseline delta.

    Two reports are only comparable when their scenarios share the core
    fingerprint (same topology/demands/protocol, attacks aside); `force`
    overrides that gate.
    """
    for tag, rep in (("baseline", baseline), ("candidate", candidate)):
        if not isinstance(rep, dict) or "scenario" not in rep:
            raise ValidationError([Violation(RULE_DIFF_FORMAT, tag,
                                             "not a run report")])
    fp_a = baseline["scenario"]["core_fingerprint"]
    fp_b = candidate["scenario"]["core_fingerprint"]
    if fp_a != fp_b and not force:
        raise ValidationError([Violation(
            RULE_DIFF_FINGERPRINT, "diff",
            f"core fingerprints differ ({fp_a[:12]}… vs {fp_b[:12]}…)")])

    led_a, led_b = baseline["cia_ledger"], candidate["cia_ledger"]
    ledger = _pairwise({k: led_a[k] for k in _LEDGER_NUMERIC},
                       {k: led_b[k] for k in _LEDGER_NUMERIC})
    fates = _pairwise(led_a["fate_counts"], led_b["fate_counts"])

    def conn_table(rep, field):
        return {c["connection"]: c[field] for c in rep["connections"]}

    def link_table(rep, field):
        return {lid: row[field] for lid, row in rep["links"].items()}

    throughput = _pairwise(conn_table(baseline, "throughput_per_s"),
                           conn_table(candidate, "throughput_per_s"))
    delivered = _pairwise(conn_table(baseline, "delivered_pairs"),
                          conn_table(candidate, "delivered_pairs"))
    states = _pairwise(conn_table(baseline, "state"),
                       conn_table(candidate, "state"))
    attempts = _pairwise(link_table(baseline, "attempts"),
                         link_table(candidate, "attempts"))
    verdicts = _pairwise(baseline["verdicts"], candidate["verdicts"])

    def detection_table(rep):
        return {e["action"]: e["latency_s"] for e in rep["detection"]}

    detection = _pairwise(detection_table(baseline), detection_table(candidate))
    sections = {
        "ledger": ledger,
        "fate_counts": fates,
        "throughput_per_s": throughput,
        "delivered_pairs": delivered,
        "connection_states": states,
        "link_attempts": attempts,
        "verdicts": verdicts,
        "detection_latency_s": detection,
    }
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "baseline": baseline["scenario"],
        "candidate": candidate["scenario"],
        "empty": not any(sections.values()),
        **sections,
    }
