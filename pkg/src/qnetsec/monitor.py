"""Defense side: certification statistics, verdicts, reputation, CIA ledger.

Fidelity is estimated from matched-basis disagreement under the Werner
assumption, F_hat = 1 - 1.5 * QBER, with a two-sided Hoeffding interval at
confidence 1 - delta. Verdicts follow a three-way rule: the interval either
clears the thresholds (clean), crosses them (attack_suspected), or straddles
(degraded); too few samples is its own verdict (inconclusive).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

VERDICT_CLEAN = "clean"
VERDICT_DEGRADED = "degraded"
VERDICT_ATTACK = "attack_suspected"
VERDICT_INCONCLUSIVE = "inconclusive"

NOT_DETECTED = "not_detected"

CHSH_TERMS = ((0, 0), (0, 1), (1, 0), (1, 1))


def hoeffding_epsilon(n: int, delta: float) -> float:
    """Two-sided deviation bound for a mean of n [0,1] samples."""
    if n < 1:
        raise DomainError("need at least one sample")
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta {delta} outside (0, 1)")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


@dataclass
class CertReport:
    scope: str  # "link:<id>" or "connection:<id>"
    n_samples: int
    n_qber: int
    qber_z: float | None
    qber_x: float | None
    qber_pooled: float | None
    qber_interval: tuple | None
    n_chsh: int
    chsh_estimate: float | None
    fidelity_estimate: float | None
    fidelity_interval: tuple | None
    delta: float

    def to_dict(self) -> dict:
        return {
            "scope": self.scope,
            "n_samples": self.n_samples,
            "n_qber": self.n_qber,
            "qber_z": self.qber_z,
            "qber_x": self.qber_x,
            "qber_pooled": self.qber_pooled,
            "qber_interval": list(self.qber_interval) if self.qber_interval else None,
            "n_chsh": self.n_chsh,
            "chsh_estimate": self.chsh_estimate,
            "fidelity_estimate": self.fidelity_estimate,
            "fidelity_interval": list(self.fidelity_interval) if self.fidelity_interval else None,
            "delta": self.delta,
        }


def build_cert_report(scope: str, samples: list, delta: float) -> CertReport:
    """Aggregate raw sacrifice outcomes into a report.

    Each sample is (mode, detail, bit_a, bit_b) where mode is qber_z/qber_x
    and detail is unused, or mode is chsh and detail is the (i, j) term the
    sample was assigned to.
    """
    z_err = z_n = x_err = x_n = 0
    chsh_sums = {t: [0, 0] for t in CHSH_TERMS}
    for mode, detail, bit_a, bit_b in samples:
        if mode == "qber_z":
            z_n += 1
            z_err += bit_a != bit_b
        elif mode == "qber_x":
            x_n += 1
            x_err += bit_a != bit_b
        elif mode == "chsh":
            acc = chsh_sums[tuple(detail)]
            acc[0] += 1
            acc[1] += (1 if bit_a == bit_b else -1)
        else:
            raise DomainError(f"unknown certification mode {mode!r}")
    n_qber = z_n + x_n
    qber_z = z_err / z_n if z_n else None
    qber_x = x_err / x_n if x_n else None
    qber_pooled = (z_err + x_err) / n_qber if n_qber else None
    n_chsh = sum(acc[0] for acc in chsh_sums.values())
    if all(acc[0] > 0 for acc in chsh_sums.values()):
        e = {t: acc[1] / acc[0] for t, acc in chsh_sums.items()}
        chsh = e[(0, 0)] + e[(0, 1)] + e[(1, 0)] - e[(1, 1)]
    else:
        chsh = None
    if n_qber:
        eps = hoeffding_epsilon(n_qber, delta)
        q_lo = max(0.0, qber_pooled - eps)
        q_hi = min(1.0, qber_pooled + eps)
        f_est = 1.0 - 1.5 * qber_pooled
        interval = (max(0.0, 1.0 - 1.5 * q_hi), min(1.0, 1.0 - 1.5 * q_lo))
        q_interval = (q_lo, q_hi)
    else:
        f_est, interval, q_interval = None, None, None
    return CertReport(scope, len(samples), n_qber, qber_z, qber_x, qber_pooled,
                      q_interval, n_chsh, chsh, f_est, interval, delta)


@dataclass(frozen=True)
class DetectionThresholds:
    fidelity_floor: float = 0.85
    qber_ceiling: float = 0.11
    min_samples: int = 30


def detect(report: CertReport, thresholds: DetectionThresholds) -> str:
    """Classify a certification report against the configured thresholds."""
    if report.n_qber < thresholds.min_samples:
        return VERDICT_INCONCLUSIVE
    f_lo, f_hi = report.fidelity_interval
    q_lo, q_hi = report.qber_interval
    if f_hi < thresholds.fidelity_floor or q_lo > thresholds.qber_ceiling:
        return VERDICT_ATTACK
    if f_lo >= thresholds.fidelity_floor and q_hi <= thresholds.qber_ceiling:
        return VERDICT_CLEAN
    return VERDICT_DEGRADED


# ---------------------------------------------------------------------------
# Reputation
# ---------------------------------------------------------------------------

POLICY_NAIVE = "naive"
POLICY_HARDENED = "hardened"


@dataclass
class Accusation:
    time_s: float
    source: str  # claimed reporter
    accused: str
    authenticated: bool
    corroborated: bool  # backed by an attack_suspected certification verdict
    forged: bool = False  # true origin differs from the claimed source
    accepted: bool = False


class ReputationLedger:
    """Accusation bookkeeping with two policies.

    naive: any accusation counts; a node is isolated once k distinct claimed
    sources have accused it. Forged reports count the same, which is exactly
    the weakness the framing attack exploits.

    hardened: an accusation counts only when it arrived authenticated (so the
    source cannot be spoofed) and carries corroborating certification
    evidence.
    """

    def __init__(self, policy: str = POLICY_NAIVE, k: int = 2):
        if policy not in (POLICY_NAIVE, POLICY_HARDENED):
            raise DomainError(f"unknown reputation policy {policy!r}")
        self.policy = policy
        self.k = int(k)
        self.accusations: list = []
        self.sources_by_accused: dict = {}
        self.isolated: list = []  # insertion order = isolation order
        self.isolated_at: dict = {}

    def add_accusation(self, acc: Accusation):
        """Returns the accused node id if this accusation triggered isolation."""
        self.accusations.append(acc)
        if self.policy == POLICY_HARDENED and not (acc.authenticated and acc.corroborated):
            return None
        acc.accepted = True
        sources = self.sources_by_accused.setdefault(acc.accused, set())
        sources.add(acc.source)
        if len(sources) >= self.k and acc.accused not in self.isolated_at:
            self.isolated.append(acc.accused)
            self.isolated_at[acc.accused] = acc.time_s
            return acc.accused
        return None

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "k": self.k,
            "isolated": list(self.isolated),
            "isolated_at": dict(sorted(self.isolated_at.items())),
            "accusations": [
                {"time_s": a.time_s, "source": a.source, "accused": a.accused,
                 "authenticated": a.authenticated, "corroborated": a.corroborated,
                 "forged": a.forged, "accepted": a.accepted}
                for a in self.accusations
            ],
        }


# ---------------------------------------------------------------------------
# CIA ledger
# ---------------------------------------------------------------------------

PAIR_FATES = ("swap", "purify", "sacrificed", "delivered",
              "destroyed_attack", "destroyed_failure")


@dataclass
class CIALedger:
    """Per-run counters for the three impact axes plus resource accounting."""

    link_pairs_generated: int = 0
    records_created: int = 0
    fate_counts: dict = field(default_factory=lambda: {f: 0 for f in PAIR_FATES})

    confidentiality_leaked_pairs: int = 0
    leaked_key_bits: int = 0
    integrity_bad_delivered: int = 0
    corrupted_key_bits: int = 0
    detection_latency_s: dict = field(default_factory=dict)  # attack tag -> s or "not_detected"
    disconnected_pair_fraction: float = 0.0
    leak_events: list = field(default_factory=list)  # (pair_id, attacker)
    _leaked_ids: set = field(default_factory=set, repr=False)

    def record_fate(self, fate: str):
        if fate not in self.fate_counts:
            raise DomainError(f"unknown pair fate {fate!r}")
        self.fate_counts[fate] += 1

    def record_leak(self, pair_id: str, attacker: str):
        # a pair leaks at most once, whatever paths report it
        if pair_id in self._leaked_ids:
            return
        self._leaked_ids.add(pair_id)
        self.confidentiality_leaked_pairs += 1
        self.leak_events.append((pair_id, attacker))

    def record_teleport(self, result) -> None:
        """Fold a state-engine teleport outcome into the counters."""
        if result.leaked_to is not None:
            self.record_leak(f"teleport:{len(self.leak_events)}", result.leaked_to)

    def accounting_identity_holds(self) -> bool:
        return sum(self.fate_counts.values()) == self.records_created

    def to_dict(self) -> dict:
        return {
            "link_pairs_generated": self.link_pairs_generated,
            "records_created": self.records_created,
            "fate_counts": dict(self.fate_counts),
            "accounting_identity_holds": self.accounting_identity_holds(),
            "confidentiality_leaked_pairs": self.confidentiality_leaked_pairs,
            "leaked_key_bits": self.leaked_key_bits,
            "integrity_bad_delivered": self.integrity_bad_delivered,
            "corrupted_key_bits": self.corrupted_key_bits,
            "detection_latency_s": dict(self.detection_latency_s),
            "disconnected_pair_fraction": self.disconnected_pair_fraction,
            "leak_events": [list(e) for e in self.leak_events],
        }


def detection_latency(verdict_times: list, attack_start: float):
    """Seconds from attack start to the first suspecting verdict, or a marker.

    `verdict_times` holds the times of attack_suspected verdicts already
    filtered to scopes the attack can influence.
    """
    for t in sorted(verdict_times):
        if t >= attack_start:
            return t - attack_start
    return NOT_DETECTED
