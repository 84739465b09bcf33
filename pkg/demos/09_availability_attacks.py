"""Availability: black holes, oversized requests, and load concentration.

Three ways to deny service without touching a single qubit in flight.
A black-hole node advertises a route it never serves, so the victim
connection burns its setup timeout while its links sit idle. A compromised
endpoint floods the path with an absurd request and soaks up link capacity
that honest traffic needed. And at the topology level, knocking out a hub
forces traffic onto longer shared paths, which both slows everyone down
and concentrates load on fewer links.

Run:  python demos/09_availability_attacks.py
"""

import _common
from qnetsec import scenario as scn


def main():
    honest = _common.run("honest_star")
    base = {cid: honest.connection_summary(c)
            for cid, c in honest.conns.items()}

    print("== black hole: advertised route, no service ==")
    e = _common.run("black_hole")
    ls = e.link_summary()
    sa = e.connection_summary(e.conns["dA"])
    sb = e.connection_summary(e.conns["dB"])
    print(f"  victim dA: {sa['state']} ({sa['reason']}), "
          f"delivered {sa['delivered_pairs']}")
    print(f"  victim-path link attempts: La {ls['La']['attempts']}, "
          f"Lap {ls['Lap']['attempts']} (quantum layer never fired)")
    print(f"  bystander dB throughput {sb['throughput_per_s']:.1f}/s vs "
          f"honest {base['dB']['throughput_per_s']:.1f}/s")

    print()
    print("== oversized request flood from a compromised endpoint ==")
    e = _common.run("qdos_flood")
    flood = [c for c in e.conns.values() if c.demand.injected_by]
    burned = sum(e.connection_summary(c)["e2e_pairs"] for c in flood)
    for cid in ("dA", "dB"):
        s = e.connection_summary(e.conns[cid])
        hs = base[cid]
        print(f"  honest {cid}: {s['state']}, delivered "
              f"{s['delivered_pairs']} (honest-run baseline "
              f"{hs['delivered_pairs']})")
    print(f"  attacker demand consumed {burned} end-to-end pairs of "
          f"shared link capacity")

    print()
    print("== hub removal concentrates load ==")
    t = scn.load_scenario(_common.load_doc("hub_ring")).topology
    demands = [("a", "ap"), ("b", "bp")]
    for tag, excluded in (("with hub", frozenset()), ("hub removed", {"X0"})):
        paths = [t.shortest_path(u, v, cost="hops", excluded=excluded)
                 for u, v in demands]
        load = t.link_load(paths)
        hops = [len(p) - 1 for p in paths]
        print(f"  {tag:12s} path lengths {hops}, "
              f"max pairs routed over one link: {load.max_count()}")


if __name__ == "__main__":
    main()
