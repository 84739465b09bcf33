"""Key exchange through a hijacked repeater, with and without authentication.

A compromised relay can terminate the protocol on both sides: it runs one
honest-looking session with each endpoint and ends up holding both keys
while the endpoints believe they share one. Nothing in the quantum layer
flags this, because each half-session is physically clean. What stops it is
authentication of the classical channel, which turns the splice into an
abort before any key material is produced.

Run:  python demos/06_mitm_bbm92.py
"""

import _common


def main():
    e = _common.run("mitm_unauthenticated")
    s = e.connection_summary(e.conns["d1"])
    print("== unauthenticated classical channel ==")
    print(f"  state {s['state']}, sifted {s['sifted']} bits, "
          f"split session: {s['mitm_split']}")
    # the impostor answers each endpoint's error check itself, so the two
    # honest parties never actually compare bits with each other
    qber = s["qber_estimate"]
    print(f"  endpoint-to-endpoint error check: "
          f"{'never happened' if qber is None else f'{qber:.4f}'}")
    print(f"  key at a   : {s['key_src'][:32]}...")
    print(f"  key at b   : {s['key_dst'][:32]}...")
    print(f"  MAL's copy of a's key: {s['attacker_key_src'][:32]}...")
    print(f"  MAL's copy of b's key: {s['attacker_key_dst'][:32]}...")
    print(f"  a and b agree with each other: {s['key_src'] == s['key_dst']}")
    print(f"  attacker recovers both keys in full: "
          f"{s['attacker_key_src'] == s['key_src'] and s['attacker_key_dst'] == s['key_dst']}")
    led = e.ledger.to_dict()
    print(f"  leaked key bits recorded: {led['leaked_key_bits']}")

    print()
    e = _common.run("mitm_authenticated")
    s = e.connection_summary(e.conns["d1"])
    print("== authenticated classical channel, same attack ==")
    print(f"  state {s['state']} ({s['reason']})")
    print(f"  key bits delivered: {len(s['key_src']) + len(s['key_dst'])}")
    print(f"  verdict {e.verdicts.get('connection:d1')}")


if __name__ == "__main__":
    main()
