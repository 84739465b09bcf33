import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from qnetsec import states as st
from qnetsec.errors import DomainError, PairConsumedError, StateError

fidelities = hs.floats(min_value=0.25, max_value=1.0, allow_nan=False)

GRID = np.arange(0.25, 1.0001, 0.05)


# ---------------------------------------------------------------- Bell basics

def test_bell_vectors_orthonormal():
    for i, u in enumerate(st.BELL_VECTORS):
        for j, v in enumerate(st.BELL_VECTORS):
            want = 1.0 if i == j else 0.0
            assert abs(u.conj() @ v - want) < st.ALGEBRA_ATOL


def test_corrections_rotate_each_outcome_to_phi_plus():
    # applying the k-th correction to the second qubit of the k-th Bell state
    # must land on Phi+ up to glob phase
    for vec, corr in zip(st.BELL_VECTORS, st.BELL_CORRECTIONS):
        fixed = np.kron(st.ID2, corr) @ vec
        assert abs(abs(st.PHI_PLUS.conj() @ fixed) - 1.0) < st.ALGEBRA_ATOL


def test_werner_roundtrip_and_validity():
    for f in GRID:
        rho = st.make_werner(f)
        st.validate_state(rho)
        assert abs(st.fidelity_to_phi_plus(rho) - f) < st.ALGEBRA_ATOL
        assert abs(st.werner_fidelity(st.werner_weight(f)) - f) < st.ALGEBRA_ATOL


@pytest.mark.parametrize("bad", [0.2499, -1.0, 1.0001, float("nan")])
def test_fidelity_domain_rejected(bad):
    with pytest.raises(DomainError):
        st.check_fidelity(bad)


def test_validate_state_rejects_garbage():
    with pytest.raises(StateError):
        st.validate_state(np.eye(3))
    with pytest.raises(StateError):
        st.validate_state(np.eye(4))  # trace 4
    bad = np.diag([0.7, 0.5, -0.1, -0.1]).astype(complex)
    with pytest.raises(StateError):
        st.validate_state(bad)


def test_partial_trace_of_bell_is_maximally_mixed():
    rho = st.make_werner(1.0)
    for keep in (0, 1):
        assert np.allclose(st.partial_trace(rho, keep), st.ID2 / 2, atol=st.ALGEBRA_ATOL)


# ---------------------------------------------------------------- swapping

def test_swap_closed_form_matches_oracle_on_grid():
    for f1 in GRID:
        for f2 in GRID:
            avg = st.oracle_swap_average(st.make_werner(f1), st.make_werner(f2))
            assert abs(st.fidelity_to_phi_plus(avg) - st.swap_werner(f1, f2)) < st.ALGEBRA_ATOL


def test_swap_outcomes_uniform_and_outcome_independent_for_werner():
    s1, s2 = st.make_werner(0.9), st.make_werner(0.8)
    for k in range(4):
        rho, p = st.oracle_swap(s1, s2, k)
        assert abs(p - 0.25) < st.ALGEBRA_ATOL
        assert abs(st.fidelity_to_phi_plus(rho) - 0.7266666666666668) < 1e-12


def test_swap_frozen_values():
    assert abs(st.swap_werner(1.0, 1.0) - 1.0) < st.ALGEBRA_ATOL
    assert abs(st.swap_werner(0.9, 0.8) - 0.7266666666666668) < 1e-12
    # fully mixed input wipes the output to fully mixed
    assert abs(st.swap_werner(0.25, 1.0) - 0.25) < st.ALGEBRA_ATOL


@given(fidelities, fidelities)
def test_swap_never_beats_weaker_input(f1, f2):
    out = st.swap_werner(f1, f2)
    assert out <= min(f1, f2) + st.ALGEBRA_ATOL
    assert out >= st.MIN_WERNER_FIDELITY - st.ALGEBRA_ATOL


@settings(max_examples=40)
@given(fidelities, fidelities)
def test_swap_closed_form_is_the_oracle(f1, f2):
    avg = st.oracle_swap_average(st.make_werner(f1), st.make_werner(f2))
    assert abs(st.fidelity_to_phi_plus(avg) - st.swap_werner(f1, f2)) < 1e-10


# ---------------------------------------------------------------- purification

def test_purify_closed_form_matches_oracle_on_grid():
    for f1 in GRID:
        for f2 in GRID:
            ps, fo = st.purify_stats(f1, f2)
            ps_o, rho = st.oracle_purify(st.make_werner(f1), st.make_werner(f2))
            assert abs(ps - ps_o) < st.ALGEBRA_ATOL
            assert abs(fo - st.fidelity_to_phi_plus(rho)) < st.ALGEBRA_ATOL


def test_purify_fixed_points():
    ps, fo = st.purify_stats(0.5, 0.5)
    assert abs(fo - 0.5) < st.ALGEBRA_ATOL
    assert abs(ps - 5.0 / 9.0) < st.ALGEBRA_ATOL
    ps, fo = st.purify_stats(0.25, 0.25)
    assert abs(ps - 0.5) < st.ALGEBRA_ATOL
    assert abs(fo - 0.25) < st.ALGEBRA_ATOL
    ps, fo = st.purify_stats(1.0, 1.0)
    assert abs(ps - 1.0) < st.ALGEBRA_ATOL
    assert abs(fo - 1.0) < st.ALGEBRA_ATOL


def test_purify_frozen_value():
    ps, fo = st.purify_stats(0.8, 0.8)
    assert abs(ps - 0.768888888888889) < 1e-12
    assert abs(fo - 0.8381502890173411) < 1e-12
    assert fo > 0.8


@given(hs.floats(min_value=0.501, max_value=0.999))
def test_purify_gains_above_half(f):
    _, fo = st.purify_stats(f, f)
    assert fo > f


@given(hs.floats(min_value=0.251, max_value=0.499))
def test_purify_degrades_below_half(f):
    # below the F=0.5 fixed point pumping actively hurts
    _, fo = st.purify_stats(f, f)
    assert fo < f


@settings(max_examples=40)
@given(fidelities, fidelities)
def test_purify_probability_is_physical(f1, f2):
    ps, fo = st.purify_stats(f1, f2)
    assert 0.0 < ps <= 1.0 + st.ALGEBRA_ATOL
    assert 0.25 - st.ALGEBRA_ATOL <= fo <= 1.0 + st.ALGEBRA_ATOL


# ---------------------------------------------------------------- channels

def test_intercept_resend_quarter_error_both_bases():
    rho = st.apply_attack_channel(st.make_werner(1.0), "intercept_resend_random_basis")
    st.validate_state(rho)
    for basis in (st.BASIS_Z, st.BASIS_X):
        pr = st.joint_probabilities(rho, basis, basis)
        assert abs((pr[0, 1] + pr[1, 0]) - 0.25) < 1e-12
    assert abs(st.fidelity_to_phi_plus(rho) - 0.5) < 1e-12


def test_entangling_probe_invisible_in_z_loud_in_x():
    rho = st.apply_attack_channel(st.make_werner(1.0), "entangling_probe")
    zz = st.joint_probabilities(rho, st.BASIS_Z, st.BASIS_Z)
    xx = st.joint_probabilities(rho, st.BASIS_X, st.BASIS_X)
    assert abs(zz[0, 1] + zz[1, 0]) < 1e-12
    assert abs((xx[0, 1] + xx[1, 0]) - 0.5) < 1e-12
    assert abs(st.fidelity_to_phi_plus(rho) - 0.5) < 1e-12


def test_dephase_and_depolarize_frozen_values():
    assert abs(st.fidelity_to_phi_plus(
        st.apply_attack_channel(st.make_werner(1.0), "dephase", 1.0)) - 0.5) < 1e-12
    assert abs(st.fidelity_to_phi_plus(
        st.apply_attack_channel(st.make_werner(1.0), "depolarize", 1.0)) - 0.25) < 1e-12
    assert abs(st.fidelity_to_phi_plus(
        st.apply_attack_channel(st.make_werner(1.0), "depolarize", 0.4)) - 0.7) < 1e-12


def test_channel_argument_errors():
    rho = st.make_werner(0.9)
    with pytest.raises(DomainError):
        st.apply_attack_channel(rho, "dephase")
    with pytest.raises(DomainError):
        st.apply_attack_channel(rho, "depolarize", 1.5)
    with pytest.raises(DomainError):
        st.apply_attack_channel(rho, "nonsense")


@settings(max_examples=25)
@given(fidelities, hs.floats(min_value=0.0, max_value=1.0))
def test_channels_preserve_physicality(f, q):
    for kind in st.ATTACK_CHANNEL_KINDS:
        out = st.apply_attack_channel(st.make_werner(f), kind,
                                      q if kind in ("depolarize", "dephase") else None)
        st.validate_state(out)
        assert st.fidelity_to_phi_plus(out) <= f + st.ALGEBRA_ATOL


# ---------------------------------------------------------------- CHSH

def test_chsh_law_on_grid():
    for f in GRID:
        s = st.chsh_expectation(st.make_werner(f))
        assert abs(s - st.CHSH_MAX * (4 * f - 1) / 3) < 1e-10


def test_chsh_threshold_exact():
    assert abs(st.CHSH_VIOLATION_FIDELITY - 0.7803300858899107) < 1e-15
    s = st.chsh_expectation(st.make_werner(st.CHSH_VIOLATION_FIDELITY))
    assert abs(s - st.CHSH_CLASSICAL_BOUND) < 1e-10
    assert st.chsh_expectation(st.make_werner(1.0)) <= st.CHSH_MAX + 1e-12


def test_chsh_label_pins_angle():
    with pytest.raises(DomainError):
        st.MeasurementBasis(0.3, "CHSH_A0")


# ---------------------------------------------------------------- measurement

def test_joint_probabilities_normalized():
    pr = st.joint_probabilities(st.make_werner(0.77), st.BASIS_X, st.BASIS_Z)
    assert pr.shape == (2, 2)
    assert abs(pr.sum() - 1.0) < st.ALGEBRA_ATOL
    assert (pr >= 0).all()


def test_werner_qber_law():
    # matched bases on Werner(F): disagreement = (1 - p)/2 with p=(4F-1)/3
    for f in (0.85, 0.95, 1.0):
        pr = st.joint_probabilities(st.make_werner(f), st.BASIS_Z, st.BASIS_Z)
        want = (1 - st.werner_weight(f)) / 2
        assert abs((pr[0, 1] + pr[1, 0]) - want) < 1e-12
    pr = st.joint_probabilities(st.make_werner(0.85), st.BASIS_Z, st.BASIS_Z)
    assert abs((pr[0, 1] + pr[1, 0]) - 0.1) < 1e-12


def test_fast_path_sampler_matches_exact_statistics():
    rng = random.Random(11)
    n = 40000
    fast = sum(a != b for a, b in
               (st._sample_werner_bits(st.werner_weight(0.85), st.BASIS_Z, st.BASIS_Z, rng)
                for _ in range(n))) / n
    assert abs(fast - 0.1) < 0.01


def test_measure_half_reproduces_joint_law():
    rng = random.Random(7)
    n = 20000
    errs = 0
    for _ in range(n):
        p = st.PairRecord("t", "A", "B", 1.0)
        p.apply_channel("entangling_probe")
        a = p.measure_half("A", st.BASIS_X, rng)
        b = p.measure_half("B", st.BASIS_X, rng)
        errs += a != b
    assert abs(errs / n - 0.5) < 0.02


# ---------------------------------------------------------------- records

def test_pair_consumption_is_final():
    rng = random.Random(0)
    p = st.PairRecord("p1", "A", "B", 0.9)
    p.measure_both(st.BASIS_Z, st.BASIS_Z, rng)
    with pytest.raises(PairConsumedError):
        p.measure_both(st.BASIS_Z, st.BASIS_Z, rng)
    with pytest.raises(PairConsumedError):
        p.consume("again")


def test_same_half_cannot_be_measured_twice():
    rng = random.Random(0)
    p = st.PairRecord("p1", "A", "B", 0.9)
    p.measure_half("A", st.BASIS_Z, rng)
    with pytest.raises(DomainError):
        p.measure_half("A", st.BASIS_Z, rng)


def test_half_measured_pair_cannot_be_swapped():
    rng = random.Random(0)
    p1 = st.PairRecord("p1", "A", "B", 0.9)
    p2 = st.PairRecord("p2", "B", "C", 0.9)
    p1.measure_half("A", st.BASIS_Z, rng)
    with pytest.raises(StateError):
        st.swap_pairs(p1, p2, "B", rng, "out", 0.0)


def test_swap_pairs_werner_path_wiring():
    rng = random.Random(3)
    p1 = st.PairRecord("p1", "A", "B", 0.9, leak_tag="eve")
    p2 = st.PairRecord("p2", "B", "C", 0.8)
    out, outcome = st.swap_pairs(p1, p2, "B", rng, "out", 1.5)
    assert (out.endpoint_a, out.endpoint_b) == ("A", "C")
    assert abs(out.fidelity - st.swap_werner(0.9, 0.8)) < st.ALGEBRA_ATOL
    assert out.leak_tag == "eve"
    assert outcome in range(4)
    assert p1.consumed_by == "swap" and p2.consumed_by == "swap"


def test_swap_pairs_exact_path_matches_oracle_fidelity():
    rng = random.Random(3)
    p1 = st.PairRecord("p1", "A", "B", 1.0)
    p1.apply_channel("dephase", 1.0)
    p2 = st.PairRecord("p2", "B", "C", 1.0)
    out, _ = st.swap_pairs(p1, p2, "B", rng, "out", 0.0)
    assert out.representation == st.EXACT
    # swapping through a fully dephased pair keeps the dephased fidelity
    assert abs(out.fidelity - 0.5) < 1e-9


def test_swap_rejects_degenerate_geometry():
    rng = random.Random(0)
    p1 = st.PairRecord("p1", "A", "B", 0.9)
    p2 = st.PairRecord("p2", "B", "A", 0.9)
    with pytest.raises(DomainError):
        st.swap_pairs(p1, p2, "B", rng, "out", 0.0)


def test_purify_pairs_updates_keeper_in_place():
    rng = random.Random(1)
    results = []
    for trial in range(200):
        keep = st.PairRecord(f"k{trial}", "A", "B", 0.8)
        fuel = st.PairRecord(f"f{trial}", "A", "B", 0.8)
        ok = st.purify_pairs(keep, fuel, rng, 0.0)
        assert fuel.consumed_by == "purify"
        if ok:
            assert keep.consumed_by is None
            assert abs(keep.fidelity - 0.8381502890173411) < 1e-12
        else:
            assert keep.consumed_by == "purify"
        results.append(ok)
    # success rate should hover near the closed-form 0.7689
    assert 0.65 < sum(results) / len(results) < 0.88


def test_purify_pairs_requires_same_endpoints():
    rng = random.Random(0)
    keep = st.PairRecord("k", "A", "B", 0.8)
    fuel = st.PairRecord("f", "A", "C", 0.8)
    with pytest.raises(DomainError):
        st.purify_pairs(keep, fuel, rng, 0.0)


def test_wrong_frame_pauli_flips_to_orthogonal_state():
    p = st.PairRecord("p", "A", "B", 1.0)
    p.apply_pauli("B", st.PAULI_Z)
    assert p.fidelity < 1e-9  # Phi+ went to Phi-


def test_apply_identity_pauli_stays_on_fast_path():
    p = st.PairRecord("p", "A", "B", 0.9)
    p.apply_pauli("B", st.ID2)
    assert p.representation == st.WERNER


# ---------------------------------------------------------------- teleport

def test_teleport_without_corrections_destroys_payload():
    chan = st.PairRecord("c", "A", "B", 1.0)
    res = st.teleport(chan, "A", far_half_holder="B", bits_reach_holder=False)
    assert res.delivered_to is None
    assert res.integrity_lost
    assert res.leaked_to is None
    assert np.allclose(res.holder_state, st.ID2 / 2, atol=st.MATRIX_ATOL)


def test_teleport_to_thief_with_bits_leaks():
    chan = st.PairRecord("c", "A", "B", 1.0)
    res = st.teleport(chan, "A", far_half_holder="mallory",
                      bits_reach_holder=True, holder_is_attacker=True)
    assert res.delivered_to == "mallory"
    assert res.leaked_to == "mallory"
    assert res.integrity_lost
    assert chan.consumed_by == "teleport"


def test_teleport_honest_delivery():
    chan = st.PairRecord("c", "A", "B", 0.95)
    res = st.teleport(chan, "A", far_half_holder="B", bits_reach_holder=True)
    assert res.delivered_to == "B"
    assert res.leaked_to is None
    assert not res.integrity_lost
