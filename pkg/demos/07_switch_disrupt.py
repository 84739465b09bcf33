"""A hijacked switch silently rewires who is entangled with whom.

Two connections share a switching node: a-ap and b-bp. The compromised
switch crosses the swaps so the delivered pairs actually span a-bp and
ap-b. Applications that trust the control plane would consume garbage;
end-to-end certification catches it because the crossed halves do not
correlate, so the measured fidelity bound collapses below random-guess
territory.

Run:  python demos/07_switch_disrupt.py
"""

import _common
from qnetsec import monitor as mon


def main():
    e = _common.run("switch_disrupt")

    print("== what got delivered ==")
    for cid in ("dA", "dB"):
        conn = e.conns[cid]
        spans = set()
        for _ordinal, rec_src, rec_dst in conn.delivered:
            spans.add(tuple(sorted((rec_src.endpoint_a, rec_src.endpoint_b))))
            spans.add(tuple(sorted((rec_dst.endpoint_a, rec_dst.endpoint_b))))
        s = e.connection_summary(conn)
        print(f"  {cid} ({s['src']} -> {s['dst']}): {s['delivered_pairs']} "
              f"pairs actually spanning {sorted(spans)}")

    print()
    print("== certification verdicts ==")
    for cid in ("dA", "dB"):
        rep = e.cert_reports()[f"connection:{cid}"].to_dict()
        lo, hi = rep["fidelity_interval"]
        verdict = e.verdicts[f"connection:{cid}"]
        print(f"  {cid}: fidelity bound [{lo:.4f}, {hi:.4f}], "
              f"verdict {verdict}")
        assert verdict == mon.VERDICT_ATTACK

    lat = e.ledger.detection_latency_s
    print()
    for action, t in sorted(lat.items()):
        print(f"  {action} detected after {t} s"
              if t != mon.NOT_DETECTED else f"  {action}: never detected")


if __name__ == "__main__":
    main()
