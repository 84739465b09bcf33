"""Werner pairs, swapping decay, and what purification buys back.

A pair distributed over a noisy link is modeled as a Werner state: a perfect
Bell pair mixed with white noise, summarized by one number, the fidelity F.
Chaining pairs end to end with entanglement swapping multiplies the noise,
so fidelity decays toward the 0.25 floor as the chain grows. A recurrence
purification round burns one pair to lift the fidelity of another.

Run:  python demos/01_werner_basics.py
"""

import numpy as np

from qnetsec import states as st


def main():
    print("== swap decay along a repeater chain (per-link F = 0.98) ==")
    f = 0.98
    print(f"  1 link : F = {f:.6f}")
    for hops in range(2, 7):
        f = st.swap_werner(f, 0.98)
        tag = "  (below cert floor 0.85)" if f < 0.85 else ""
        print(f"  {hops} links: F = {f:.6f}{tag}")

    print()
    print("== one purification round on two copies of the same pair ==")
    for f_in in (0.70, 0.80, 0.90, 0.98):
        p, f_out = st.purify_stats(f_in, f_in)
        print(f"  F_in {f_in:.2f} -> F_out {f_out:.4f}  "
              f"(success prob {p:.3f}, gain {f_out - f_in:+.4f})")

    print()
    print("== pump a 2-swap chain pair back above target 0.95 ==")
    f = st.swap_werner(st.swap_werner(0.98, 0.98), 0.98)
    print(f"  start F = {f:.4f}")
    rounds = 0
    while f < 0.95 and rounds < 8:
        _, f = st.purify_stats(f, f)
        rounds += 1
        print(f"  round {rounds}: F = {f:.4f}")

    print()
    print("== CHSH expectation, the device-independent check ==")
    for f in (1.0, 0.95, 0.85, 0.7803300858899106, 0.5, 0.25):
        s = st.chsh_expectation(st.make_werner(f))
        note = ""
        if abs(s - 2.0) < 1e-9:
            note = "  <- classical bound"
        elif s == 0.0:
            note = "  <- fully depolarized, no correlations"
        print(f"  F = {f:.4f}: S = {s:.6f}{note}")
    print(f"  max violation 2*sqrt(2) = {2 * np.sqrt(2):.6f}")


if __name__ == "__main__":
    main()
