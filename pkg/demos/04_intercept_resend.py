"""Intercept-resend on one link: loud, lossy, and caught.

The attacker measures every pair crossing the tapped link and fabricates a
replacement, which collapses the end-to-end state and pushes the matched
basis error rate toward 25%. Certification sampling picks that up quickly.
The same scenario pair also shows the operator workflow: run the honest
baseline and the attack variant, then diff the two reports.

Run:  python demos/04_intercept_resend.py
"""

import _common
from qnetsec import report as rpt


def main():
    honest = _common.run("honest_chain")
    attacked = _common.run("intercept_resend")

    print("== side by side ==")
    for tag, e in (("honest", honest), ("attacked", attacked)):
        s = e.connection_summary(e.conns["d1"])
        rep = e.cert_reports()["connection:d1"].to_dict()
        print(f"  {tag:9s} state {s['state']:9s} "
              f"QBER {rep['qber_pooled']:.4f}  "
              f"verdict {e.verdicts['connection:d1']}")

    lat = attacked.ledger.detection_latency_s
    for action, t in sorted(lat.items()):
        print(f"  detection latency for {action}: {t}")

    print()
    print("== report diff (attack vs baseline) ==")
    # same substrate (topology, demands, protocol), so no --force needed
    diff = rpt.diff_reports(rpt.build_report(honest, wall_s=0.0),
                            rpt.build_report(attacked, wall_s=0.0))
    for section in ("verdicts", "ledger", "connection_states"):
        entries = diff[section]
        if not entries:
            continue
        print(f"  [{section}]")
        for key, change in sorted(entries.items()):
            print(f"    {key}: {change['baseline']} -> {change['candidate']}")


if __name__ == "__main__":
    main()
