"""Per-attempt success probability for the three link architectures.

MemoryToMemory sends one photon the whole span, MemoriesAndBSA meets in the
middle at a Bell-state analyzer (hard-capped at 1/2 with linear optics), and
MemoriesAndEPPS pushes a pair source to the midpoint. Loss is exponential
in length, so architecture choices only reshuffle constants; the demo also
spot-checks the closed form against Monte Carlo sampling of one link.

Run:  python demos/02_link_budget.py
"""

import numpy as np

from qnetsec import engine as eng
from qnetsec import topology as topo

ARCHS = (topo.MEMORY_TO_MEMORY, topo.MEMORIES_AND_BSA, topo.MEMORIES_AND_EPPS)


def make_link(arch: str, length_km: float) -> topo.LinkSpec:
    mid = None if arch == topo.MEMORY_TO_MEMORY else "mid"
    return topo.LinkSpec(f"L-{arch}", "a", "b", architecture=arch,
                         length_km=length_km, midpoint=mid)


def main():
    print("== per-attempt success probability vs length ==")
    header = "  km   " + "".join(f"{a:>18s}" for a in ARCHS)
    print(header)
    for km in (0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0):
        row = f"  {km:4.0f} "
        for arch in ARCHS:
            row += f"{make_link(arch, km).success_probability():18.6f}"
        print(row)

    print()
    print("== Monte Carlo check: BSA link at 2 km, 20000 attempts ==")
    link = make_link(topo.MEMORIES_AND_BSA, 2.0)
    rng = np.random.default_rng(7)
    n = 20_000
    wins = sum(eng.attempt_link(link, rng) is not None for _ in range(n))
    print(f"  closed form {link.success_probability():.4f}, "
          f"measured {wins / n:.4f}")

    print()
    print("== what one success actually stores ==")
    rng = np.random.default_rng(7)
    rec = None
    while rec is None:
        rec = eng.attempt_link(link, rng)
    print(f"  pair {rec.pair_id} spans {rec.endpoint_a}-{rec.endpoint_b} "
          f"at fidelity {rec.fidelity:.4f}")


if __name__ == "__main__":
    main()
