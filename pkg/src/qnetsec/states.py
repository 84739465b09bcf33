"""Exact and approximate algebra of two-qubit entangled pairs.

Honest-noise pairs are tracked on a Werner fast path (a single fidelity
number fully determines the state).  Anything an attacker has touched is
promoted to an explicit 4x4 density matrix, because attacks such as
intercept-resend produce states that are not Werner and whose error rates
differ from the twirled approximation.  The density-matrix functions double
as the oracles that the fast-path formulas are tested against.

Computational basis order is |00>, |01>, |10>, |11>.  The network's
canonical target state is Phi+ and all fidelities are to Phi+ after local
Pauli-frame correction.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    ImpossibleBranchError,
    PairConsumedError,
    StateError,
)

# Tolerances: algebraic identities vs. matrix-validity checks.
ALGEBRA_ATOL = 1e-12
MATRIX_ATOL = 1e-9

MIN_WERNER_FIDELITY = 0.25

_SQRT2 = math.sqrt(2.0)

ID2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / _SQRT2
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) / _SQRT2
PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) / _SQRT2
PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / _SQRT2

BELL_VECTORS = (PHI_PLUS, PHI_MINUS, PSI_PLUS, PSI_MINUS)
BELL_LABELS = ("phi_plus", "phi_minus", "psi_plus", "psi_minus")
# Pauli applied to the far qubit to rotate each swap outcome back to Phi+.
BELL_CORRECTIONS = (ID2, PAULI_Z, PAULI_X, PAULI_X @ PAULI_Z)

PHI_PLUS_PROJECTOR = np.outer(PHI_PLUS, PHI_PLUS.conj())
MAXIMALLY_MIXED_2Q = np.eye(4, dtype=complex) / 4.0

CHSH_MAX = 2.0 * _SQRT2
CHSH_CLASSICAL_BOUND = 2.0
# Werner fidelity above which the CHSH value exceeds the classical bound:
# 2*sqrt(2)*(4F-1)/3 > 2  <=>  F > (1 + 3/sqrt(2)) / 4.
CHSH_VIOLATION_FIDELITY = 0.25 * (1.0 + 3.0 / _SQRT2)

# Fixed optimal CHSH measurement angles in the X-Z plane (radians).
CHSH_ANGLES = {
    "CHSH_A0": 0.0,
    "CHSH_A1": math.pi / 2,
    "CHSH_B0": math.pi / 4,
    "CHSH_B1": -math.pi / 4,
}

ATTACK_CHANNEL_KINDS = (
    "intercept_resend_random_basis",
    "entangling_probe",
    "depolarize",
    "dephase",
)


# ---------------------------------------------------------------------------
# Werner algebra (fast path)
# ---------------------------------------------------------------------------

def check_fidelity(f: float) -> float:
    """Validate that `f` is a legal Werner fidelity and return it as float."""
    f = float(f)
    if not (MIN_WERNER_FIDELITY <= f <= 1.0) or math.isnan(f):
        raise DomainError(f"fidelity {f} outside [{MIN_WERNER_FIDELITY}, 1.0]")
    return f


def werner_weight(f: float) -> float:
    """Mixing weight p of the Phi+ component, p = (4F - 1) / 3."""
    return (4.0 * check_fidelity(f) - 1.0) / 3.0


def werner_fidelity(p: float) -> float:
    """Inverse of `werner_weight`: F = (1 + 3p) / 4."""
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"Werner weight {p} outside [0, 1]")
    return (1.0 + 3.0 * p) / 4.0


def make_werner(f: float) -> np.ndarray:
    """Density matrix p|Phi+><Phi+| + (1-p) I/4 with p = (4f-1)/3."""
    p = werner_weight(f)
    return p * PHI_PLUS_PROJECTOR + (1.0 - p) * np.eye(4, dtype=complex) / 4.0


def fidelity_to_phi_plus(rho: np.ndarray) -> float:
    """Overlap <Phi+| rho |Phi+>."""
    return float(np.real(PHI_PLUS.conj() @ rho @ PHI_PLUS))


def swap_werner(f1: float, f2: float) -> float:
    """Fidelity after a Bell measurement splices two Werner pairs.

    F_out = f1*f2 + (1 - f1)(1 - f2)/3, i.e. the Werner weights multiply.
    Equals the outcome-averaged `oracle_swap` result on Werner inputs; never
    exceeds min(f1, f2).
    """
    f1 = check_fidelity(f1)
    f2 = check_fidelity(f2)
    return f1 * f2 + (1.0 - f1) * (1.0 - f2) / 3.0


def purify_stats(f1: float, f2: float) -> tuple[float, float]:
    """Success probability and output fidelity of one BBPSSW round.

    Closed form for two Werner inputs (bilateral CNOT, Z measurement of the
    target pair, keep on coincident outcomes):

        p_success = (8 f1 f2 - 2 f1 - 2 f2 + 5) / 9
        f_out     = (f1 f2 + (1 - f1)(1 - f2) / 9) / p_success

    Matches `oracle_purify` on Werner inputs to better than 1e-12.
    """
    f1 = check_fidelity(f1)
    f2 = check_fidelity(f2)
    p_success = (8.0 * f1 * f2 - 2.0 * f1 - 2.0 * f2 + 5.0) / 9.0
    f_out = (f1 * f2 + (1.0 - f1) * (1.0 - f2) / 9.0) / p_success
    return p_success, f_out


@dataclass(frozen=True)
class PurifyResult:
    success: bool
    f_out: float
    p_success: float


def purify(f1: float, f2: float, rng) -> PurifyResult:
    """Sample one BBPSSW round on two Werner pairs.

    On failure both input pairs are lost (the caller destroys the records);
    on success the surviving pair has fidelity `f_out`.
    """
    p_success, f_out = purify_stats(f1, f2)
    return PurifyResult(bool(rng.random() < p_success), f_out, p_success)


# ---------------------------------------------------------------------------
# Density-matrix oracles (exact path)
# ---------------------------------------------------------------------------

def validate_state(rho: np.ndarray, atol: float = MATRIX_ATOL) -> np.ndarray:
    """Check trace-1, hermiticity and positivity of a 4x4 density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise StateError(f"expected 4x4 matrix, got {rho.shape}")
    if abs(np.trace(rho) - 1.0) > atol:
        raise StateError(f"trace {np.trace(rho)} != 1")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise StateError("matrix is not Hermitian")
    eigs = np.linalg.eigvalsh(rho)
    if eigs.min() < -atol:
        raise StateError(f"negative eigenvalue {eigs.min()}")
    return rho


def _cnot16(control: int, target: int) -> np.ndarray:
    """CNOT between two of four qubits as a 16x16 permutation matrix."""
    dim = 16
    mat = np.zeros((dim, dim))
    for idx in range(dim):
        bits = [(idx >> (3 - q)) & 1 for q in range(4)]
        bits[target] ^= bits[control]
        out = sum(b << (3 - q) for q, b in enumerate(bits))
        mat[out, idx] = 1.0
    return mat


_BILATERAL_CNOT = _cnot16(0, 2) @ _cnot16(1, 3)


def oracle_swap(s1: np.ndarray, s2: np.ndarray, outcome: int) -> tuple[np.ndarray, float]:
    """Exact entanglement swapping conditioned on one Bell outcome.

    `s1` lives on qubits (A, B1), `s2` on (B2, C).  A Bell measurement on
    (B1, B2) with result `outcome` (index into `BELL_VECTORS`) leaves (A, C)
    in the returned state after the standard Pauli correction on C.

    Returns
    -------
    (rho_ac, probability) : the renormalized conditional state and the
    probability of this outcome.  Raises `ImpossibleBranchError` if the
    outcome probability is below 1e-12.
    """
    s1 = validate_state(s1)
    s2 = validate_state(s2)
    if outcome not in range(4):
        raise DomainError(f"Bell outcome index {outcome} not in 0..3")
    full = np.kron(s1, s2).reshape((2,) * 8)
    bell = BELL_VECTORS[outcome].reshape(2, 2)
    # indices: a, m, n, c (ket) / e, p, q, f (bra); project (m, n) and (p, q).
    rho_ac = np.einsum("mn,amncepqf,pq->acef", bell.conj(), full, bell).reshape(4, 4)
    prob = float(np.real(np.trace(rho_ac)))
    if prob < 1e-12:
        raise ImpossibleBranchError(f"Bell outcome {outcome} has probability {prob}")
    rho_ac = rho_ac / prob
    corr = np.kron(ID2, BELL_CORRECTIONS[outcome])
    return corr @ rho_ac @ corr.conj().T, prob


def oracle_swap_average(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Outcome-averaged corrected swap state: sum_k p_k * rho_k."""
    acc = np.zeros((4, 4), dtype=complex)
    for k in range(4):
        rho_k, p_k = oracle_swap(s1, s2, k)
        acc += p_k * rho_k
    return acc


def oracle_purify(s1: np.ndarray, s2: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact single-round BBPSSW circuit on two pairs.

    `s1` is the source pair on (A1, B1), `s2` the target pair on (A2, B2).
    Both sides apply CNOT from their source qubit onto their target qubit,
    measure the target pair in Z, and keep the source pair when the outcomes
    coincide.

    Returns
    -------
    (p_success, post_state) : keep probability and the renormalized state of
    the surviving pair.  Raises `ImpossibleBranchError` when p_success ~ 0.
    """
    s1 = validate_state(s1)
    s2 = validate_state(s2)
    full = np.kron(s1, s2)  # qubit order A1, B1, A2, B2
    full = _BILATERAL_CNOT @ full @ _BILATERAL_CNOT.T
    t = full.reshape((2,) * 8)
    # keep branches: target qubits (A2, B2) both 0 or both 1
    kept = t[:, :, 0, 0, :, :, 0, 0] + t[:, :, 1, 1, :, :, 1, 1]
    kept = kept.reshape(4, 4)
    p_success = float(np.real(np.trace(kept)))
    if p_success < 1e-12:
        raise ImpossibleBranchError(f"purification keep probability {p_success}")
    return p_success, kept / p_success


def partial_trace(rho: np.ndarray, keep: int) -> np.ndarray:
    """Reduced 2x2 state of one half of a two-qubit state (keep 0 or 1)."""
    t = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    if keep == 0:
        return np.einsum("ikjk->ij", t)
    if keep == 1:
        return np.einsum("kikj->ij", t)
    raise DomainError(f"keep must be 0 or 1, got {keep}")


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementBasis:
    """A projective measurement direction in the X-Z plane.

    The observable is cos(angle) Z + sin(angle) X; outcome bit 0 is the +1
    eigenvalue.  CHSH labels are pinned to the fixed optimal angles.
    """

    angle: float
    label: str = "custom"

    def __post_init__(self):
        if self.label in CHSH_ANGLES and abs(self.angle - CHSH_ANGLES[self.label]) > 1e-15:
            raise DomainError(
                f"label {self.label} requires angle {CHSH_ANGLES[self.label]}, got {self.angle}"
            )

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        half = self.angle / 2.0
        plus = np.array([math.cos(half), math.sin(half)], dtype=complex)
        minus = np.array([-math.sin(half), math.cos(half)], dtype=complex)
        return np.outer(plus, plus.conj()), np.outer(minus, minus.conj())


BASIS_Z = MeasurementBasis(0.0, "Z")
BASIS_X = MeasurementBasis(math.pi / 2, "X")
BASIS_CHSH_A0 = MeasurementBasis(CHSH_ANGLES["CHSH_A0"], "CHSH_A0")
BASIS_CHSH_A1 = MeasurementBasis(CHSH_ANGLES["CHSH_A1"], "CHSH_A1")
BASIS_CHSH_B0 = MeasurementBasis(CHSH_ANGLES["CHSH_B0"], "CHSH_B0")
BASIS_CHSH_B1 = MeasurementBasis(CHSH_ANGLES["CHSH_B1"], "CHSH_B1")


def joint_probabilities(rho, basis_a: MeasurementBasis, basis_b: MeasurementBasis) -> np.ndarray:
    """2x2 array of Born probabilities P[bit_a, bit_b]."""
    rho = np.asarray(rho, dtype=complex)
    pa = basis_a.projectors()
    pb = basis_b.projectors()
    probs = np.empty((2, 2))
    for i, j in itertools.product(range(2), range(2)):
        probs[i, j] = max(0.0, float(np.real(np.trace(np.kron(pa[i], pb[j]) @ rho))))
    return probs / probs.sum()


def measure_pair(rho, basis_a: MeasurementBasis, basis_b: MeasurementBasis, rng) -> tuple[int, int]:
    """Sample both outcome bits from the exact joint distribution."""
    probs = joint_probabilities(rho, basis_a, basis_b)
    u = rng.random()
    acc = 0.0
    for i, j in itertools.product(range(2), range(2)):
        acc += probs[i, j]
        if u < acc:
            return i, j
    return 1, 1


def correlation(rho, basis_a: MeasurementBasis, basis_b: MeasurementBasis) -> float:
    """Expectation of the +/-1 outcome product at the given angles."""
    probs = joint_probabilities(rho, basis_a, basis_b)
    return float(probs[0, 0] + probs[1, 1] - probs[0, 1] - probs[1, 0])


def chsh_expectation(rho) -> float:
    """S = E(A0,B0) + E(A0,B1) + E(A1,B0) - E(A1,B1) at the optimal angles.

    For Werner states this equals 2*sqrt(2)*(4F-1)/3, crossing the classical
    bound 2 at F = CHSH_VIOLATION_FIDELITY.
    """
    return (
        correlation(rho, BASIS_CHSH_A0, BASIS_CHSH_B0)
        + correlation(rho, BASIS_CHSH_A0, BASIS_CHSH_B1)
        + correlation(rho, BASIS_CHSH_A1, BASIS_CHSH_B0)
        - correlation(rho, BASIS_CHSH_A1, BASIS_CHSH_B1)
    )


# ---------------------------------------------------------------------------
# Attack channels
# ---------------------------------------------------------------------------

def _one_sided(op: np.ndarray) -> np.ndarray:
    return np.kron(ID2, op)


def apply_attack_channel(rho, kind: str, q: float | None = None) -> np.ndarray:
    """Exact post-attack density matrix for one tampered half (side B).

    kinds:
      intercept_resend_random_basis : measure-and-reprepare in a uniformly
          random basis from {Z, X}; averaged over basis choice and outcome.
      entangling_probe : perfect CNOT probe copied into an attacker ancilla,
          ancilla traced out (full Z dephasing; attacker keeps Z correlations).
      depolarize : with probability q the half is replaced by I/2.
      dephase : with probability q the half fully dephases in Z.
    """
    rho = validate_state(rho)
    if kind == "intercept_resend_random_basis":
        out = np.zeros((4, 4), dtype=complex)
        for basis in (BASIS_Z, BASIS_X):
            for proj in basis.projectors():
                op = _one_sided(proj)
                out += 0.5 * (op @ rho @ op)
        return out
    if kind == "entangling_probe":
        z = _one_sided(PAULI_Z)
        return 0.5 * (rho + z @ rho @ z)
    if kind in ("depolarize", "dephase"):
        if q is None or not (0.0 <= q <= 1.0):
            raise DomainError(f"{kind} requires q in [0, 1], got {q}")
        if kind == "depolarize":
            reduced_a = partial_trace(rho, keep=0)
            return (1.0 - q) * rho + q * np.kron(reduced_a, ID2 / 2.0)
        z = _one_sided(PAULI_Z)
        return (1.0 - q) * rho + q * 0.5 * (rho + z @ rho @ z)
    raise DomainError(f"unknown attack channel kind {kind!r}")


# ---------------------------------------------------------------------------
# Pair records: ownership, consumption, half-measurements
# ---------------------------------------------------------------------------

WERNER = "werner"
EXACT = "exact"


@dataclass
class PairRecord:
    """One shared bipartite entangled resource.

    A record is single-owner: every consuming operation (swap, purify,
    measure, teleport) calls `consume` and any later use raises
    `PairConsumedError`, mirroring the no-cloning restriction that quantum
    data cannot be duplicated or revived.
    """

    pair_id: str
    endpoint_a: str
    endpoint_b: str
    fidelity: float
    created_at: float = 0.0
    leak_tag: str | None = None
    representation: str = WERNER
    matrix: np.ndarray | None = None
    consumed_by: str | None = None
    origin: str | None = None  # producing link id, kept through swaps by callers
    # cache key for repeated-measurement tables; valid only while the exact
    # matrix is byte-identical across records carrying the same token
    state_token: str | None = None
    # first-half measurement awaiting its partner: (endpoint, basis, bit)
    _pending: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.endpoint_a == self.endpoint_b:
            raise DomainError(f"pair {self.pair_id} endpoints must differ")
        if self.representation == WERNER:
            # fast-path fidelity is a Werner fidelity; exact records store a
            # plain overlap with Phi+, which can legitimately sit below 0.25
            self.fidelity = check_fidelity(self.fidelity)
        else:
            if self.matrix is None:
                raise StateError(f"pair {self.pair_id} marked exact without a matrix")
            if not (0.0 <= self.fidelity <= 1.0 + ALGEBRA_ATOL):
                raise DomainError(f"overlap {self.fidelity} outside [0, 1]")

    # -- ownership ---------------------------------------------------------

    def require_live(self):
        if self.consumed_by is not None:
            raise PairConsumedError(
                f"pair {self.pair_id} already consumed by {self.consumed_by}"
            )

    def consume(self, op: str):
        self.require_live()
        self.consumed_by = op

    @property
    def half_measured(self) -> bool:
        return self._pending is not None

    def require_unmeasured(self):
        """Pairs with one half already read cannot be swapped or reshaped."""
        if self._pending is not None:
            end, basis, _ = self._pending
            raise StateError(
                f"pair {self.pair_id} half-measured at {end} in basis {basis.label}"
            )

    # -- representation ----------------------------------------------------

    def state(self) -> np.ndarray:
        """Current density matrix (materialized on demand for Werner pairs)."""
        if self.representation == EXACT:
            return self.matrix
        return make_werner(self.fidelity)

    def promote(self) -> np.ndarray:
        """Switch to the exact path, returning the matrix."""
        if self.representation != EXACT:
            self.matrix = make_werner(self.fidelity)
            self.representation = EXACT
        return self.matrix

    def set_state(self, rho: np.ndarray, token: str | None = None):
        self.matrix = rho
        self.representation = EXACT
        self.fidelity = min(1.0, max(0.0, fidelity_to_phi_plus(rho)))
        self.state_token = token

    def apply_channel(self, kind: str, q: float | None = None, leak_tag: str | None = None):
        """Run an attack channel over this pair; promotes to the exact path."""
        self.require_live()
        self.require_unmeasured()
        self.set_state(apply_attack_channel(self.state(), kind, q))
        if leak_tag is not None:
            self.leak_tag = leak_tag

    def apply_pauli(self, end: str, op: np.ndarray):
        """Apply a local unitary to one half (promotes off the fast path).

        Fast-path records already store fidelity in the corrected Pauli
        frame, so this is only needed for a *wrong* frame, e.g. when an
        attacker forged the swap-outcome message.
        """
        self.require_live()
        self.require_unmeasured()
        if np.allclose(op, ID2, atol=ALGEBRA_ATOL):
            return
        rho = self.promote()
        full = np.kron(op, ID2) if end == self.endpoint_a else np.kron(ID2, op)
        self.set_state(full @ rho @ full.conj().T)

    # -- measurement -------------------------------------------------------

    def holds(self, node: str) -> bool:
        return node in (self.endpoint_a, self.endpoint_b)

    def measure_both(self, basis_a: MeasurementBasis, basis_b: MeasurementBasis, rng) -> tuple[int, int]:
        """Measure both halves at once; consumes the pair."""
        self.require_unmeasured()
        self.consume("measure")
        if self.representation == WERNER:
            return _sample_werner_bits(werner_weight(self.fidelity), basis_a, basis_b, rng)
        probs = joint_for(self, basis_a, basis_b)
        u = rng.random()
        acc = 0.0
        for i, j in itertools.product(range(2), range(2)):
            acc += probs[i, j]
            if u < acc:
                return i, j
        return 1, 1

    def measure_half(self, end: str, basis: MeasurementBasis, rng) -> int:
        """Measure one half; the pair is consumed when both halves are done.

        The first call samples from that half's marginal; the second samples
        the exact conditional distribution given the first outcome, so the
        two-call path reproduces `measure_both`'s joint statistics while the
        halves are measured at different times (or by different parties).
        """
        self.require_live()
        if not self.holds(end):
            raise DomainError(f"{end} holds no half of pair {self.pair_id}")
        if self._pending is None:
            marg = self._marginal(end, basis)
            bit = 0 if rng.random() < marg[0] else 1
            self._pending = (end, basis, bit)
            return bit
        first_end, first_basis, first_bit = self._pending
        if first_end == end:
            raise DomainError(f"half of pair {self.pair_id} at {end} measured twice")
        if end == self.endpoint_b:
            joint = joint_for(self, first_basis, basis)
            cond = joint[first_bit, :]
        else:
            joint = joint_for(self, basis, first_basis)
            cond = joint[:, first_bit]
        total = cond.sum()
        bit = 0 if total > 0 and rng.random() < cond[0] / total else 1
        self.consume("measure")
        return bit

    def _marginal(self, end: str, basis: MeasurementBasis) -> np.ndarray:
        if self.representation == WERNER:
            return np.array([0.5, 0.5])
        keep = 0 if end == self.endpoint_a else 1
        reduced = partial_trace(self.matrix, keep)
        p0, _ = basis.projectors()
        p = max(0.0, min(1.0, float(np.real(np.trace(p0 @ reduced)))))
        return np.array([p, 1.0 - p])


def _sample_werner_bits(p_weight: float, basis_a, basis_b, rng) -> tuple[int, int]:
    """Fast joint sampler for Werner states: uniform marginals, E = p*cos(delta)."""
    corr = p_weight * math.cos(basis_a.angle - basis_b.angle)
    bit_a = 0 if rng.random() < 0.5 else 1
    same = rng.random() < (1.0 + corr) / 2.0
    return bit_a, bit_a if same else 1 - bit_a


_TOKEN_JOINT_CACHE: dict = {}


def joint_for(record: PairRecord, basis_a: MeasurementBasis, basis_b: MeasurementBasis) -> np.ndarray:
    """Joint outcome table for a record, cached per shared state token.

    Many records produced by the same (link, channel, parameters) carry
    byte-identical matrices; tagging them with a token collapses the repeated
    Born-rule evaluations into one table lookup.
    """
    if record.representation == WERNER:
        corr = werner_weight(record.fidelity) * math.cos(basis_a.angle - basis_b.angle)
        same = (1.0 + corr) / 4.0
        diff = (1.0 - corr) / 4.0
        return np.array([[same, diff], [diff, same]])
    if record.state_token is not None:
        key = (record.state_token, basis_a.angle, basis_b.angle)
        hit = _TOKEN_JOINT_CACHE.get(key)
        if hit is None:
            hit = joint_probabilities(record.matrix, basis_a, basis_b)
            _TOKEN_JOINT_CACHE[key] = hit
        return hit
    return joint_probabilities(record.matrix, basis_a, basis_b)


def decay_werner(record: PairRecord, now: float, tau: float | None):
    """Exponential memory decay toward I/4, applied lazily on the fast path.

    The Werner weight shrinks by exp(-dt/tau); exact-representation records
    are left untouched (tampered pairs are short-lived in practice).
    """
    if tau is None or record.representation != WERNER or record.consumed_by is not None:
        return
    dt = now - record.created_at
    if dt <= 0.0:
        return
    w = werner_weight(record.fidelity) * math.exp(-dt / tau)
    record.fidelity = werner_fidelity(w)
    record.created_at = now


# ---------------------------------------------------------------------------
# Swap / purify on records
# ---------------------------------------------------------------------------

def _other_end(pair: PairRecord, node: str) -> str:
    if node == pair.endpoint_a:
        return pair.endpoint_b
    if node == pair.endpoint_b:
        return pair.endpoint_a
    raise DomainError(f"{node} holds no half of pair {pair.pair_id}")


def _merge_leak(p1: PairRecord, p2: PairRecord) -> str | None:
    return p1.leak_tag or p2.leak_tag


def swap_pairs(p1: PairRecord, p2: PairRecord, at_node: str, rng, new_id: str,
               now: float) -> tuple[PairRecord, int]:
    """Splice two pairs meeting at `at_node` into one longer pair.

    Returns the new record plus the Bell outcome index (needed for the
    classical Pauli-frame correction message).  Werner inputs stay on the
    fast path: the outcome statistics are uniform and the corrected state is
    outcome-independent, so only the fidelity product matters.
    """
    far_a = _other_end(p1, at_node)
    far_b = _other_end(p2, at_node)
    if far_a == far_b:
        raise DomainError(f"swap at {at_node} would join {far_a} to itself")
    p1.require_unmeasured()
    p2.require_unmeasured()
    if p1.representation == WERNER and p2.representation == WERNER:
        outcome = int(rng.random() * 4) % 4
        p1.consume("swap")
        p2.consume("swap")
        out = PairRecord(new_id, far_a, far_b, swap_werner(p1.fidelity, p2.fidelity),
                         created_at=now, leak_tag=_merge_leak(p1, p2))
        return out, outcome
    # exact path: orient states as (far_a, at_node) x (at_node, far_b)
    s1 = _oriented(p1, left=far_a)
    s2 = _oriented(p2, left=at_node)
    probs = []
    for k in range(4):
        try:
            probs.append(oracle_swap(s1, s2, k)[1])
        except ImpossibleBranchError:
            probs.append(0.0)
    total = sum(probs)
    u = rng.random() * total
    acc = 0.0
    outcome = 3
    for k, pk in enumerate(probs):
        acc += pk
        if u < acc:
            outcome = k
            break
    rho, _ = oracle_swap(s1, s2, outcome)
    p1.consume("swap")
    p2.consume("swap")
    out = PairRecord(new_id, far_a, far_b, min(1.0, max(0.0, fidelity_to_phi_plus(rho))),
                     created_at=now, leak_tag=_merge_leak(p1, p2),
                     representation=EXACT, matrix=rho)
    return out, outcome


def _oriented(pair: PairRecord, left: str) -> np.ndarray:
    """Pair state with qubit order (left, other); swaps halves if needed."""
    rho = pair.state()
    if left == pair.endpoint_a:
        return rho
    swap = np.zeros((4, 4))
    for i, j in itertools.product(range(2), range(2)):
        swap[2 * j + i, 2 * i + j] = 1.0
    return swap @ rho @ swap.T


def purify_pairs(keep: PairRecord, fuel: PairRecord, rng, now: float) -> bool:
    """One BBPSSW round: `fuel` is always consumed; `keep` survives on success.

    Both records must join the same endpoints.  On success `keep` is updated
    in place with the improved state; on failure `keep` is consumed too and
    the function returns False.
    """
    keep.require_live()
    fuel.require_live()
    keep.require_unmeasured()
    fuel.require_unmeasured()
    ends = {keep.endpoint_a, keep.endpoint_b}
    if {fuel.endpoint_a, fuel.endpoint_b} != ends:
        raise DomainError("purification requires two pairs over the same endpoints")
    if keep.representation == WERNER and fuel.representation == WERNER:
        result = purify(keep.fidelity, fuel.fidelity, rng)
        fuel.consume("purify")
        if not result.success:
            keep.consume("purify")
            return False
        keep.fidelity = result.f_out
        keep.leak_tag = _merge_leak(keep, fuel)
        return True
    s1 = _oriented(keep, left=keep.endpoint_a)
    s2 = _oriented(fuel, left=keep.endpoint_a)
    p_success, post = oracle_purify(s1, s2)
    fuel.consume("purify")
    if rng.random() >= p_success:
        keep.consume("purify")
        return False
    keep.set_state(post)
    keep.leak_tag = _merge_leak(keep, fuel)
    return True


# ---------------------------------------------------------------------------
# Teleportation semantics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TeleportResult:
    """Outcome of teleporting a payload over one channel pair.

    `delivered_to` is the node that ends up with the payload (None when the
    correction bits never reach the far half's holder, in which case the
    payload is destroyed and the holder is left with I/2).
    """

    delivered_to: str | None
    leaked_to: str | None
    integrity_lost: bool
    holder_state: np.ndarray


def teleport(channel_pair: PairRecord, sender: str, *, far_half_holder: str,
             bits_reach_holder: bool, holder_is_attacker: bool = False) -> TeleportResult:
    """Teleport a payload from `sender` across `channel_pair`.

    The payload materializes wherever the far half sits, but only if the two
    classical correction bits reach that holder; otherwise the holder keeps a
    maximally mixed qubit and the payload is gone (integrity loss without a
    confidentiality loss).  A theft plus read access to the classical channel
    is therefore a full confidentiality breach.
    """
    if not channel_pair.holds(sender):
        raise DomainError(f"{sender} holds no half of pair {channel_pair.pair_id}")
    channel_pair.require_unmeasured()
    far_end = _other_end(channel_pair, sender)
    keep = 0 if far_end == channel_pair.endpoint_a else 1
    unconditional = partial_trace(channel_pair.state(), keep)
    channel_pair.consume("teleport")
    if bits_reach_holder:
        leaked = far_half_holder if holder_is_attacker else None
        if leaked is not None:
            channel_pair.leak_tag = leaked
        return TeleportResult(far_half_holder, leaked, holder_is_attacker, unconditional)
    # Without the correction bits the holder's qubit averages over the four
    # Bell outcomes, i.e. exactly the far half's reduced state (I/2 for any
    # Bell-diagonal channel pair); the payload itself is destroyed.
    return TeleportResult(None, None, True, unconditional)
