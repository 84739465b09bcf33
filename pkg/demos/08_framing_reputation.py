"""Turning the defense into the weapon: framing honest relays.

A reputation system that isolates accused nodes is itself attack surface.
Here a compromised switch forges failure reports against the two relays
forming a separator of the network. Under a naive policy (any k accusations
isolate the target) the framed relays are cut off and the end nodes lose
most of their connectivity. A hardened policy that requires authenticated,
corroborated accusations ignores the forgeries.

Run:  python demos/08_framing_reputation.py
"""

import _common


def describe(name):
    e = _common.run(name)
    rep = e.reputation.to_dict()
    led = e.ledger.to_dict()
    accepted = sum(a["accepted"] for a in rep["accusations"])
    print(f"== {name} (policy: {rep['policy']}) ==")
    print(f"  forged accusations accepted: {accepted} "
          f"of {len(rep['accusations'])}")
    print(f"  isolated relays: {sorted(rep['isolated']) or 'none'}")
    print(f"  end-node pairs disconnected: "
          f"{led['disconnected_pair_fraction']:.3f}")
    s = e.connection_summary(e.conns["d14"])
    print(f"  demand d14 (e1 -> e4): {s['state']}"
          + (f" ({s['reason']})" if s["reason"] else ""))
    print()


def main():
    describe("framing_naive")
    describe("framing_hardened")
    print("same forged traffic, different admission rule: the naive policy")
    print("amputates a graph separator on the attacker's say-so, the")
    print("hardened one keeps routing through the framed relays.")


if __name__ == "__main__":
    main()
