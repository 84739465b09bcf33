"""Deterministic discrete-event execution of one scenario.

Everything random flows through named substreams derived from the run seed,
so a rerun is byte-identical and an attack run can be diffed against its
baseline stream-for-stream: tampering with one link never shifts the random
numbers another link consumes.

Time unit is seconds. Events are ordered by (time, insertion sequence);
link-level entanglement attempts are not simulated one by one but jumped
over with geometric sampling, split at every instant where an attack window
toggles the per-attempt behavior, which keeps long horizons cheap without
changing the distribution.
"""
from __future__ import annotations

import hashlib
import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import attacks as atk
from . import monitor as mon
from . import scenario as scn_mod
from . import states as st
from . import topology as topo
from .errors import DomainError, StateError

SIFT_BATCH = 256  # raw pairs per basis-reconciliation round

# connection lifecycle
C_SETUP = "setup"
C_RUNNING = "running"
C_DONE = "done"
C_ABORTED = "aborted"
C_FAILED = "failed_setup"
C_INCOMPLETE = "incomplete"  # horizon hit while still running

_MASK63 = (1 << 63) - 1


class StreamRegistry:
    """Named, independent random substreams under one run seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK63
        self._streams: dict = {}

    def get(self, *parts) -> np.random.Generator:
        key = ":".join(str(p) for p in parts)
        rng = self._streams.get(key)
        if rng is None:
            child = int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, child]))
            self._streams[key] = rng
        return rng


def attempt_link(link: topo.LinkSpec, rng, *, now: float = 0.0,
                 pair_id: str = "pair") -> st.PairRecord | None:
    """One heralded generation attempt; None on failure.

    The batched scheduler inside the engine is distribution-equivalent to
    calling this in a loop at the link's attempt cadence.
    """
    if rng.random() >= link.success_probability():
        return None
    return st.PairRecord(pair_id, link.endpoint_a, link.endpoint_b,
                         link.base_fidelity, created_at=now, origin=link.link_id)


@dataclass
class PurifyPlan:
    reachable: bool
    rounds: int
    pairs_required: int
    trajectory: list
    message: str


def purify_until(f_base: float, f_target: float, *, budget_pairs: int = 4096,
                 max_rounds: int = 16) -> PurifyPlan:
    """Recursive pumping schedule from f_base toward f_target.

    Each round fuses two pairs of the previous round's output, so round r
    costs 2**r base pairs (success probabilities aside). Stops early when
    the recurrence plateaus or the budget runs out.
    """
    st.check_fidelity(f_base)
    if not (0.25 <= f_target <= 1.0):
        raise DomainError(f"target fidelity {f_target} outside [0.25, 1]")
    traj = [f_base]
    f = f_base
    for r in range(1, max_rounds + 1):
        if f >= f_target:
            break
        if 2 ** r > budget_pairs:
            return PurifyPlan(False, r - 1, 2 ** (r - 1), traj,
                              f"budget of {budget_pairs} pairs exhausted")
        _, f_next = st.purify_stats(f, f)
        if f_next <= f + 1e-15:
            return PurifyPlan(False, r - 1, 2 ** (r - 1), traj,
                              f"recurrence plateaus at {f:.6f}")
        f = f_next
        traj.append(f)
    if f >= f_target:
        rounds = len(traj) - 1
        return PurifyPlan(True, rounds, 2 ** rounds, traj, "ok")
    return PurifyPlan(False, len(traj) - 1, 2 ** (len(traj) - 1), traj,
                      f"still at {f:.6f} after {max_rounds} rounds")


@dataclass
class EventRecord:
    time_s: float
    seq: int
    kind: str
    node: str
    connection: str
    asset: str
    detail: dict


class _CertAccumulator:
    """O(1)-per-sample certification statistics for one scope."""

    __slots__ = ("scope", "samples", "z_n", "z_err", "x_n", "x_err", "chsh")

    def __init__(self, scope: str):
        self.scope = scope
        self.samples = 0
        self.z_n = self.z_err = self.x_n = self.x_err = 0
        self.chsh = {t: [0, 0] for t in mon.CHSH_TERMS}

    def add(self, mode: str, term, bit_a: int, bit_b: int):
        self.samples += 1
        if mode == "qber_z":
            self.z_n += 1
            self.z_err += bit_a != bit_b
        elif mode == "qber_x":
            self.x_n += 1
            self.x_err += bit_a != bit_b
        else:
            acc = self.chsh[tuple(term)]
            acc[0] += 1
            acc[1] += (1 if bit_a == bit_b else -1)

    def report(self, delta: float) -> mon.CertReport:
        n_qber = self.z_n + self.x_n
        qber_z = self.z_err / self.z_n if self.z_n else None
        qber_x = self.x_err / self.x_n if self.x_n else None
        pooled = (self.z_err + self.x_err) / n_qber if n_qber else None
        n_chsh = sum(a[0] for a in self.chsh.values())
        if all(a[0] > 0 for a in self.chsh.values()):
            e = {t: a[1] / a[0] for t, a in self.chsh.items()}
            s_val = e[(0, 0)] + e[(0, 1)] + e[(1, 0)] - e[(1, 1)]
        else:
            s_val = None
        if n_qber:
            eps = mon.hoeffding_epsilon(n_qber, delta)
            q_lo, q_hi = max(0.0, pooled - eps), min(1.0, pooled + eps)
            interval = (max(0.0, 1.0 - 1.5 * q_hi), min(1.0, 1.0 - 1.5 * q_lo))
            f_est = 1.0 - 1.5 * pooled
            q_int = (q_lo, q_hi)
        else:
            f_est, interval, q_int = None, None, None
        return mon.CertReport(self.scope, self.samples, n_qber, qber_z, qber_x,
                              pooled, q_int, n_chsh, s_val, f_est, interval, delta)


class _LinkRT:
    """Mutable per-link generation state."""

    __slots__ = ("spec", "rng", "next_idx", "attempts", "successes", "generated",
                 "pending", "serving", "rr", "boundaries", "destroyed",
                 "gen_scheduled", "paused")

    def __init__(self, spec: topo.LinkSpec, rng, boundaries: list):
        self.spec = spec
        self.rng = rng
        self.next_idx = 1  # attempt n happens at time n / rate
        self.attempts = 0
        self.successes = 0
        self.generated = 0
        self.pending = 0
        self.serving: list = []
        self.rr = 0
        self.boundaries = boundaries
        self.destroyed = False
        self.gen_scheduled = False
        self.paused = False


class _Connection:
    def __init__(self, demand: scn_mod.Demand, path: list, link_ids: list,
                 scope: str):
        self.demand = demand
        self.cid = demand.demand_id
        self.path = path
        self.link_ids = link_ids
        self.scope = scope
        self.state = C_SETUP
        self.reason = None
        self.started_at = None
        self.ended_at = None
        self.black_hole = None
        # innermost interior indexes first so segments grow outward
        n = len(path)
        center = (n - 1) / 2.0
        self.swap_order = sorted(range(1, n - 1), key=lambda j: (abs(j - center), j))
        self.segments: dict = {}
        self.e2e_count = 0
        self.side_ordinal = {"src": 0, "dst": 0}
        self.ready: dict = {}
        self.link_ordinal: dict = {}
        self.sac_plan: list = []
        self.sac_meta: list = []
        self.delivered: list = []  # (ordinal, rec_src, rec_dst)
        self.delivered_count = 0
        self.sacrificed_count = 0
        self.purify_levels: list = []
        self.purified_count = 0
        # bbm92 machinery
        self.side_meas = {"src": [], "dst": []}
        self.sift_round = 0
        self.sift_in_flight = False
        self.sifted_total = 0
        self.checked = 0
        self.check_errors = 0
        self.key_bits = {"src": [], "dst": []}
        self.mitm = None  # (node, attacker, split_sessions)
        self.mitm_store = {"src": [], "dst": []}
        self.mitm_sift = {"src": 0, "dst": 0}
        self.mitm_key = {"src": [], "dst": []}
        self.attacker_key = {"src": [], "dst": []}
        self.switch_pool = {"left": deque(), "right": deque()}
        self.leaked_delivered = 0
        self.fidelity_sum = 0.0
        self.fidelity_n = 0

    @property
    def src(self) -> str:
        return self.demand.src

    @property
    def dst(self) -> str:
        return self.demand.dst

    def end_node(self, side: str) -> str:
        return self.src if side == "src" else self.dst

    def target(self) -> int:
        d = self.demand
        if d.application == scn_mod.APP_BBM92:
            return d.sifted_target if d.sifted_target else d.target_pairs
        return d.target_pairs

    def finished(self) -> bool:
        return self.state in (C_DONE, C_ABORTED, C_FAILED)


class Engine:
    """Runs one scenario to its horizon and keeps every outcome inspectable."""

    def __init__(self, scenario: scn_mod.Scenario, *, collect_events: bool = True):
        self.scn = scenario
        self.topo = scenario.topology
        self.proto = scenario.protocol
        self.horizon = float(self.proto["horizon_s"])
        self.art = atk.AttackRuntime(scenario.scripts, self.topo, self.horizon)
        self.streams = StreamRegistry(scenario.seed)
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self._ev_seq = 0
        self.events: list | None = [] if collect_events else None
        self.ledger = mon.CIALedger()
        rep = self.proto["reputation"]
        self.reputation = mon.ReputationLedger(rep["policy"], rep["k"])
        self.thresholds = mon.DetectionThresholds(
            self.proto["fidelity_floor"], self.proto["qber_ceiling"],
            self.proto["min_cert_samples"])
        self.cert_acc: dict = {}
        self.verdicts: dict = {}
        self.verdict_log: list = []  # (t, scope, verdict)
        self.conns: dict = {}
        self.link_rts: dict = {}
        self.isolated: set = set()
        self.destroyed_nodes: set = set()
        self.attack_effects: dict = {}  # (attacker, kind, target) -> count/times
        self.pair_fates: dict = {}
        self._pair_home: dict = {}  # pair_id -> link rt while it occupies a buffer
        self._matrix_cache: dict = {}
        self._pair_counter = 0
        self._standoff = [(s, a) for s, a in self.art.physical_actions()
                          if a.kind == "standoff_noise"]
        self._ran = False

    # -- plumbing ------------------------------------------------------------

    def _schedule(self, t: float, fn, *args):
        if t > self.horizon:
            return
        heapq.heappush(self._heap, (t, self._seq, fn, args))
        self._seq += 1

    def _log(self, kind: str, node: str = "", connection: str = "",
             asset: str = "", **detail):
        if self.events is None:
            return
        self.events.append(EventRecord(self.now, self._ev_seq, kind, node,
                                       connection, asset, detail))
        self._ev_seq += 1

    def _effect(self, attacker: str, kind: str, target, **detail):
        key = (attacker, kind, str(target))
        slot = self.attack_effects.setdefault(
            key, {"count": 0, "first_s": self.now, "last_s": self.now})
        slot["count"] += 1
        slot["last_s"] = self.now
        self._log("attack_effect", node=str(target), asset=str(target),
                  detail_kind=kind, attacker=attacker, **detail)

    def _new_pair_id(self) -> str:
        self._pair_counter += 1
        return f"q{self._pair_counter}"

    def _track(self, rec: st.PairRecord):
        self.ledger.records_created += 1

    def _fate(self, rec: st.PairRecord, fate: str, **detail):
        if rec.pair_id in self.pair_fates:
            return
        self.pair_fates[rec.pair_id] = fate
        self.ledger.record_fate(fate)
        if fate == "delivered" and rec.leak_tag:
            self.ledger.record_leak(rec.pair_id, rec.leak_tag)

    def _release_buffer(self, rec: st.PairRecord):
        lrt = self._pair_home.pop(rec.pair_id, None)
        if lrt is None:
            return
        lrt.pending -= 1
        if lrt.paused and lrt.pending < int(self.proto["pending_pairs_per_link"]):
            lrt.paused = False
            self._kick_link(lrt)

    # -- run -----------------------------------------------------------------

    def run(self) -> "Engine":
        if self._ran:
            raise StateError("engine instances are single-use")
        self._ran = True
        self._setup()
        while self._heap:
            t, _, fn, args = heapq.heappop(self._heap)
            self.now = t
            fn(*args)
        self.now = self.horizon
        self._finalize()
        return self

    def _setup(self):
        for link in self.topo.links.values():
            rng = self.streams.get("link", link.link_id)
            bounds = self.art.link_boundaries(link.link_id)
            self.link_rts[link.link_id] = _LinkRT(link, rng, bounds)
        for demand in self.scn.demands:
            self._schedule(0.0, self._start_connection, demand)
        for flood in self.art.request_floods():
            demand = scn_mod.Demand(
                demand_id=flood["tag"], src=flood["src"], dst=flood["dst"],
                application=scn_mod.APP_PAIRS, target_pairs=flood["target_pairs"],
                injected_by=flood["attacker"])
            self._schedule(flood["start"], self._start_connection, demand)
        for script, act in self.art.physical_actions():
            if act.kind in ("destroy_asset", "steal_asset"):
                self._schedule(act.start(), self._physical, script, act)
        for node, script, act in self.art.false_failure_actions():
            self._schedule(act.start(), self._false_failure, node, script, act)
        for node, script, act in self.art.framing_actions():
            self._schedule(act.start(), self._framing, node, script, act)

    # -- connections -----------------------------------------------------------

    def _start_connection(self, demand: scn_mod.Demand):
        cid = demand.demand_id
        target_node = demand.dst
        bh = self.art.black_hole_for(demand.dst, self.now)
        bh_node = None
        if bh is not None and bh[0] != demand.dst:
            bh_node, bh_attacker = bh
            target_node = bh_node
        excluded = (self.isolated | self.destroyed_nodes) - {demand.src, target_node}
        if demand.src in self.isolated | self.destroyed_nodes:
            path = None
        else:
            path = self.topo.shortest_path(demand.src, target_node,
                                           cost=self.scn.cost_for(demand),
                                           excluded=excluded)
        if path is None:
            conn = _Connection(demand, [demand.src, demand.dst], [],
                               f"connection:{cid}")
            conn.state = C_FAILED
            conn.reason = "no_route"
            conn.ended_at = self.now
            self.conns[cid] = conn
            self._log("connection_state", node=demand.src, connection=cid,
                      state=C_FAILED, reason="no_route")
            return
        link_ids = [l.link_id for l in self.topo.links_on_path(path)]
        conn = _Connection(demand, path, link_ids, f"connection:{cid}")
        if bh_node is not None:
            conn.black_hole = bh_node
            self._effect(bh_attacker, "path_black_hole", bh_node, victim=cid)
        self.conns[cid] = conn
        interiors = [n for n in path[1:-1]]
        for node in interiors:
            hit = self.art.node_action(node, "mitm_bbm92", self.now)
            if hit is not None and demand.application == scn_mod.APP_BBM92:
                authenticated = self.topo.classical_channel(demand.src, demand.dst).authenticated
                split = not authenticated or self.art.holds_auth_keys(
                    hit[0].attacker_id, self.now)
                conn.mitm = (node, hit[0].attacker_id, split)
        self._log("connection_state", node=demand.src, connection=cid,
                  state=C_SETUP, path="-".join(path))
        rtt = 2.0 * sum(self.topo.classical_latency(a, b)
                        for a, b in zip(path, path[1:]))
        timeout = self.now + float(self.proto["path_setup_timeout_rtts"]) * max(rtt, 1e-9)
        self._schedule(timeout, self._setup_timeout, conn)
        self._setup_hop(conn, 0, forward=True)

    def _setup_hop(self, conn: _Connection, idx: int, forward: bool):
        if conn.state != C_SETUP:
            return
        path = conn.path
        if forward and idx == len(path) - 1:
            # reached the far node; blackhole nodes silently absorb the request
            if conn.black_hole == path[-1]:
                self._log("message", node=path[-1], connection=conn.cid,
                          kind_="setup", fate="absorbed_black_hole")
                return
            self._setup_hop(conn, idx, forward=False)
            return
        if not forward and idx == 0:
            self._activate(conn)
            return
        a = path[idx]
        b = path[idx + 1] if forward else path[idx - 1]
        nxt = idx + 1 if forward else idx - 1
        self._send(a, b, "setup" if forward else "setup_ack",
                   {"cid": conn.cid},
                   lambda payload: self._setup_hop(conn, nxt, forward))

    def _setup_timeout(self, conn: _Connection):
        if conn.state == C_SETUP:
            self._abort(conn, "setup_timeout")

    def _activate(self, conn: _Connection):
        if conn.state != C_SETUP:
            return
        conn.state = C_RUNNING
        conn.started_at = self.now
        self._log("connection_state", node=conn.src, connection=conn.cid,
                  state=C_RUNNING)
        for lid in conn.link_ids:
            lrt = self.link_rts[lid]
            if conn.cid not in lrt.serving:
                lrt.serving.append(conn.cid)
            self._kick_link(lrt)

    def _abort(self, conn: _Connection, reason: str):
        if conn.finished():
            return
        conn.state = C_ABORTED
        conn.reason = reason
        conn.ended_at = self.now
        if conn.demand.application == scn_mod.APP_BBM92:
            # no key material survives an aborted session
            conn.key_bits = {"src": [], "dst": []}
        self._log("connection_state", node=conn.src, connection=conn.cid,
                  state=C_ABORTED, reason=reason)
        self._teardown(conn)

    def _complete(self, conn: _Connection):
        conn.state = C_DONE
        conn.ended_at = self.now
        self._log("connection_state", node=conn.src, connection=conn.cid,
                  state=C_DONE)
        self._teardown(conn)

    def _teardown(self, conn: _Connection):
        for lid in conn.link_ids:
            lrt = self.link_rts.get(lid)
            if lrt and conn.cid in lrt.serving:
                lrt.serving.remove(conn.cid)
        for dq in conn.segments.values():
            while dq:
                rec = dq.popleft()
                self._fate(rec, "destroyed_failure", reason="connection_closed")
                self._release_buffer(rec)
        for level in conn.purify_levels:
            while level:
                rec = level.popleft()
                self._fate(rec, "destroyed_failure", reason="connection_closed")
        conn.segments.clear()

    # -- link generation -------------------------------------------------------

    def _kick_link(self, lrt: _LinkRT):
        if lrt.gen_scheduled or lrt.destroyed or lrt.paused:
            return
        serving = [c for c in lrt.serving if self.conns[c].state == C_RUNNING]
        if not serving:
            return
        if lrt.pending >= int(self.proto["pending_pairs_per_link"]):
            lrt.paused = True
            return
        rate = lrt.spec.attempt_rate_hz
        idx = max(lrt.next_idx, int(math.floor(self.now * rate)) + 1)
        p_base = lrt.spec.success_probability()
        bounds = lrt.boundaries
        while True:
            t_idx = idx / rate
            if t_idx > self.horizon:
                lrt.next_idx = idx
                return
            # end of the current constant-behavior stretch, in attempt indexes
            upcoming = [b for b in bounds if b > t_idx]
            seg_end_t = min(upcoming) if upcoming else self.horizon
            seg_end_idx = int(math.floor(seg_end_t * rate))
            if self.art.link_is_down(lrt.spec.link_id, t_idx):
                # forced outage: the device makes no attempts at all
                idx = seg_end_idx + 1
                continue
            span = seg_end_idx - idx + 1
            if span <= 0:
                idx = seg_end_idx + 1
                continue
            k = int(lrt.rng.geometric(p_base))
            if k <= span:
                succ_idx = idx + k - 1
                lrt.gen_scheduled = True
                lrt.next_idx = succ_idx + 1
                self._schedule(succ_idx / rate, self._link_success, lrt, k)
                return
            lrt.attempts += span
            idx = seg_end_idx + 1

    def _link_success(self, lrt: _LinkRT, attempts_used: int):
        lrt.gen_scheduled = False
        if lrt.destroyed:
            return
        lrt.attempts += attempts_used
        lrt.successes += 1
        lrt.generated += 1
        link = lrt.spec
        rec = st.PairRecord(self._new_pair_id(), link.endpoint_a, link.endpoint_b,
                            link.base_fidelity, created_at=self.now,
                            origin=link.link_id)
        self.ledger.link_pairs_generated += 1
        self._track(rec)
        self._log("link_pair", node=link.endpoint_a, asset=link.link_id,
                  pair=rec.pair_id, attempts=attempts_used)
        self._apply_standoff(rec, link)
        for eff in self.art.pair_effects(link.link_id, self.now):
            self._tamper(rec, eff)
        reader = self.art.read_destroys(link.link_id, self.now)
        if reader is not None:
            rec.consume("stolen_read")
            rec.leak_tag = reader
            self._fate(rec, "destroyed_attack", reason="eavesdrop_quantum")
            self.ledger.record_leak(rec.pair_id, reader)
            self._effect(reader, "eavesdrop_quantum", link.link_id, pair=rec.pair_id)
            self._kick_link(lrt)
            return
        if self.proto["cert_scope"] == scn_mod.CERT_SCOPE_LINK:
            secret = self.streams.get("cert", "link", link.link_id)
            if secret.random() < float(self.proto["sacrifice_fraction"]):
                self._cert_sacrifice_link(lrt, rec)
                self._kick_link(lrt)
                return
        serving = sorted(c for c in lrt.serving if self.conns[c].state == C_RUNNING)
        if not serving:
            self._fate(rec, "destroyed_failure", reason="no_consumer")
            self._kick_link(lrt)
            return
        cid = serving[lrt.rr % len(serving)]
        lrt.rr += 1
        conn = self.conns[cid]
        k = conn.link_ordinal.get(link.link_id, 0)
        conn.link_ordinal[link.link_id] = k + 1
        # without purification the k-th pair of every path link feeds the
        # k-th end-to-end pair, so the sampling plan is indexable now
        if self.proto["cert_scope"] == scn_mod.CERT_SCOPE_E2E \
                and conn.demand.application == scn_mod.APP_PAIRS \
                and not self.proto["purify"]["enabled"]:
            will_sacrifice = self._sac_plan(conn, k)
        else:
            will_sacrifice = False
        for eff in self.art.predictor_effects(link.link_id):
            if not eff.action.active(self.now, self.horizon):
                continue
            # the forecasting adversary skips exactly the pairs that will be
            # spent on certification; only the sampling *flag* crosses this
            # interface, never the stream that produced it
            if not will_sacrifice:
                self._tamper(rec, eff)
        lrt.pending += 1
        self._pair_home[rec.pair_id] = lrt
        self._enqueue_segment(conn, link, rec)
        self._kick_link(lrt)

    def _apply_standoff(self, rec: st.PairRecord, link: topo.LinkSpec):
        touched = set(link.endpoints)
        if link.midpoint:
            touched.add(link.midpoint)
        for script, act in self._standoff:
            if not act.active(self.now, self.horizon):
                continue
            hit = touched & set(act.params["nodes"])
            for _ in sorted(hit):
                eff = atk.ChannelEffect("depolarize", float(act.params["q"]),
                                        script.attacker_id, False, act)
                self._tamper(rec, eff)

    def _tamper(self, rec: st.PairRecord, eff: atk.ChannelEffect):
        base = rec.state_token or f"w{rec.fidelity:.12f}"
        token = f"{base}|{eff.kind}:{eff.q}"
        rho = self._matrix_cache.get(token)
        if rho is None:
            rho = st.apply_attack_channel(rec.state(), eff.kind, eff.q)
            self._matrix_cache[token] = rho
        rec.set_state(rho, token=token)
        if eff.leaks:
            rec.leak_tag = eff.attacker
        self._effect(eff.attacker, eff.action.kind, eff.action.target,
                     pair=rec.pair_id)

    # -- segments and swapping ---------------------------------------------------

    def _seg_index(self, conn: _Connection, link: topo.LinkSpec) -> tuple:
        i = conn.path.index(link.endpoint_a)
        j = conn.path.index(link.endpoint_b)
        return (i, j) if i < j else (j, i)

    def _enqueue_segment(self, conn: _Connection, link: topo.LinkSpec,
                         rec: st.PairRecord):
        seg = self._seg_index(conn, link)
        conn.segments.setdefault(seg, deque()).append(rec)
        self._pump(conn)

    def _pump(self, conn: _Connection):
        if conn.state != C_RUNNING:
            return
        progress = True
        while progress:
            progress = False
            for j in conn.swap_order:
                node = conn.path[j]
                if self._hijack_holds(conn, j):
                    continue
                lefts = sorted(k for k in conn.segments
                               if k[1] == j and conn.segments[k])
                rights = sorted((k for k in conn.segments
                                 if k[0] == j and conn.segments[k]),
                                key=lambda k: -k[1])
                if not lefts or not rights:
                    continue
                left_key, right_key = lefts[0], rights[0]
                p_left = conn.segments[left_key].popleft()
                p_right = conn.segments[right_key].popleft()
                self._do_swap(conn, node, left_key[0], right_key[1], p_left, p_right)
                progress = True
        self._drain_endpoints(conn)

    def _hijack_holds(self, conn: _Connection, j: int) -> bool:
        """True when the node at path index j withholds its swap on purpose."""
        node = conn.path[j]
        if conn.mitm and conn.mitm[0] == node:
            return True
        hit = self.art.node_action(node, "switch_disrupt", self.now)
        if hit is not None and conn.cid in tuple(hit[1].params["cross"]):
            return True
        return False

    def _do_swap(self, conn: _Connection, node: str, i: int, k: int,
                 p_left: st.PairRecord, p_right: st.PairRecord):
        tau = self.proto["memory_decay_time_s"]
        for rec in (p_left, p_right):
            st.decay_werner(rec, self.now, tau)
            self._bad_faith_taint(rec, node)
        rng = self.streams.get("swap", conn.cid)
        out, outcome = st.swap_pairs(p_left, p_right, node, rng,
                                     self._new_pair_id(), self.now)
        self._track(out)
        for rec in (p_left, p_right):
            self._fate(rec, "swap", at=node)
            self._release_buffer(rec)
        self._log("swap", node=node, connection=conn.cid, asset=out.pair_id,
                  outcome=outcome, span=f"{i}-{k}")
        seg = (i, k)
        if seg == (0, len(conn.path) - 1):
            self._complete_e2e(conn, node, out)
        else:
            conn.segments.setdefault(seg, deque()).append(out)

    def _bad_faith_taint(self, rec: st.PairRecord, node: str):
        if rec.origin is None or node not in self.art.hijacked:
            return
        attacker = self.art.bad_faith_attacker(rec.origin, self.now)
        if attacker is None:
            return
        link = self.topo.links[rec.origin]
        if node not in link.endpoints:
            return
        eff = atk.ChannelEffect("dephase", 1.0, attacker, False,
                                atk.AttackAction("link_bad_faith", rec.origin))
        self._tamper(rec, eff)

    def _drain_endpoints(self, conn: _Connection):
        # single-hop paths deliver straight off the link
        if len(conn.path) == 2:
            direct = conn.segments.get((0, 1))
            while direct:
                self._complete_e2e(conn, conn.path[0], direct.popleft())
        if conn.mitm:
            self._mitm_collect(conn)
        hit = None
        for j, node in enumerate(conn.path[1:-1], start=1):
            sd = self.art.node_action(node, "switch_disrupt", self.now)
            if sd is not None and conn.cid in tuple(sd[1].params["cross"]):
                hit = (j, node, sd)
        if hit is not None:
            self._switch_collect(conn, *hit)

    # -- end-to-end completion ---------------------------------------------------

    def _sac_plan(self, conn: _Connection, ordinal: int) -> bool:
        secret = self.streams.get("cert", "e2e", conn.cid)
        frac = self.scn.sacrifice_for(conn.demand)
        weights = self.proto["cert_mode_weights"]
        while len(conn.sac_plan) <= ordinal:
            hit = secret.random() < frac
            conn.sac_plan.append(hit)
            if not hit:
                conn.sac_meta.append(None)
                continue
            u = secret.random()
            if u < weights["qber_z"]:
                conn.sac_meta.append(("qber_z", None, st.BASIS_Z, st.BASIS_Z))
            elif u < weights["qber_z"] + weights["qber_x"]:
                conn.sac_meta.append(("qber_x", None, st.BASIS_X, st.BASIS_X))
            else:
                term = (int(secret.random() < 0.5), int(secret.random() < 0.5))
                basis_a = st.BASIS_CHSH_A1 if term[0] else st.BASIS_CHSH_A0
                basis_b = st.BASIS_CHSH_B1 if term[1] else st.BASIS_CHSH_B0
                conn.sac_meta.append(("chsh", term, basis_a, basis_b))
        return conn.sac_plan[ordinal]

    def _complete_e2e(self, conn: _Connection, at_node: str, rec: st.PairRecord):
        if conn.state != C_RUNNING:
            self._fate(rec, "destroyed_failure", reason="connection_closed")
            self._release_buffer(rec)
            return
        conn.e2e_count += 1
        if len(conn.path) == 2:
            o = conn.side_ordinal["src"]
            conn.side_ordinal["src"] += 1
            conn.side_ordinal["dst"] += 1
            self._side_ready(conn, "src", o, rec, False)
            self._side_ready(conn, "dst", o, rec, False)
            return
        for side in ("src", "dst"):
            ordinal = conn.side_ordinal[side]
            conn.side_ordinal[side] += 1
            end = conn.end_node(side)
            if at_node == end:
                self._side_ready(conn, side, ordinal, rec, False)
                continue
            self._send(at_node, end, "correction",
                       {"conn": conn, "side": side, "ordinal": ordinal, "rec": rec},
                       self._correction_arrived)

    def _correction_arrived(self, payload: dict):
        conn = payload["conn"]
        rec = payload["rec"]
        wrong = "corrupted_by" in payload
        self._side_ready(conn, payload["side"], payload["ordinal"], rec, wrong)

    def _side_ready(self, conn: _Connection, side: str, ordinal: int,
                    rec: st.PairRecord, wrong_frame: bool):
        if conn.state != C_RUNNING:
            if rec.consumed_by is None:
                self._fate(rec, "destroyed_failure", reason="connection_closed")
                self._release_buffer(rec)
            return
        if wrong_frame and rec.consumed_by is None and not rec.half_measured:
            rec.apply_pauli(conn.end_node(side), st.PAULI_Z)
        if conn.demand.application == scn_mod.APP_BBM92:
            self._bbm92_side_measure(conn, side, ordinal, rec)
            return
        slot = conn.ready.setdefault(ordinal, {})
        slot[side] = rec
        if "src" in slot and "dst" in slot:
            del conn.ready[ordinal]
            self._complete_pairs_ordinal(conn, ordinal, slot["src"], slot["dst"])

    def _complete_pairs_ordinal(self, conn: _Connection, ordinal: int,
                                rec_src: st.PairRecord, rec_dst: st.PairRecord):
        pur = self.proto["purify"]
        if pur["enabled"]:
            if rec_src is not rec_dst:
                raise StateError("purification over mismatched halves")
            self._purify_enqueue(conn, rec_src, 0)
            return
        sac = conn.sac_plan[ordinal] if ordinal < len(conn.sac_plan) else \
            (self.proto["cert_scope"] == scn_mod.CERT_SCOPE_E2E
             and self._sac_plan(conn, ordinal))
        if sac:
            self._cert_sacrifice_e2e(conn, ordinal, rec_src, rec_dst)
        else:
            self._deliver_pairs(conn, ordinal, rec_src, rec_dst)

    def _deliver_pairs(self, conn: _Connection, ordinal: int,
                       rec_src: st.PairRecord, rec_dst: st.PairRecord):
        recs = [rec_src] if rec_src is rec_dst else [rec_src, rec_dst]
        for side, rec in (("src", rec_src), ("dst", rec_dst)):
            end = conn.end_node(side)
            mal = self.art.node_action(end, "malicious_application", self.now)
            if mal is not None:
                rec.leak_tag = rec.leak_tag or mal[0].attacker_id
                self._effect(mal[0].attacker_id, "malicious_application", end,
                             pair=rec.pair_id)
        for rec in recs:
            self._fate(rec, "delivered")
            self._release_buffer(rec)
            conn.fidelity_sum += rec.fidelity
            conn.fidelity_n += 1
            if rec.leak_tag:
                conn.leaked_delivered += 1
            verdict = self.verdicts.get(conn.scope)
            if rec.fidelity < self.thresholds.fidelity_floor \
                    and verdict != mon.VERDICT_ATTACK:
                self.ledger.integrity_bad_delivered += 1
        conn.delivered.append((ordinal, rec_src, rec_dst))
        conn.delivered_count += 1
        self._log("deliver", node=conn.src, connection=conn.cid,
                  asset=rec_src.pair_id, ordinal=ordinal,
                  crossed=int(rec_src is not rec_dst))
        if conn.delivered_count >= conn.target():
            self._complete(conn)

    # -- certification -------------------------------------------------------------

    def _acc(self, scope: str) -> _CertAccumulator:
        acc = self.cert_acc.get(scope)
        if acc is None:
            acc = _CertAccumulator(scope)
            self.cert_acc[scope] = acc
        return acc

    def _cert_add(self, scope: str, mode: str, term, bit_a: int, bit_b: int):
        acc = self._acc(scope)
        acc.add(mode, term, bit_a, bit_b)
        report = acc.report(float(self.proto["delta"]))
        verdict = mon.detect(report, self.thresholds)
        self._log("cert_sample", node=scope, asset=scope, mode=mode,
                  bit_a=bit_a, bit_b=bit_b)
        self._set_verdict(scope, verdict)

    def _set_verdict(self, scope: str, verdict: str):
        prev = self.verdicts.get(scope)
        if verdict == prev:
            return
        self.verdicts[scope] = verdict
        self.verdict_log.append((self.now, scope, verdict))
        self._log("verdict", node=scope, asset=scope, verdict=verdict)

    def _cert_modes_draw(self, secret) -> tuple:
        weights = self.proto["cert_mode_weights"]
        u = secret.random()
        if u < weights["qber_z"]:
            return ("qber_z", None, st.BASIS_Z, st.BASIS_Z)
        if u < weights["qber_z"] + weights["qber_x"]:
            return ("qber_x", None, st.BASIS_X, st.BASIS_X)
        term = (int(secret.random() < 0.5), int(secret.random() < 0.5))
        basis_a = st.BASIS_CHSH_A1 if term[0] else st.BASIS_CHSH_A0
        basis_b = st.BASIS_CHSH_B1 if term[1] else st.BASIS_CHSH_B0
        return ("chsh", term, basis_a, basis_b)

    def _cert_sacrifice_link(self, lrt: _LinkRT, rec: st.PairRecord):
        link = lrt.spec
        scope = f"link:{link.link_id}"
        secret = self.streams.get("cert", "link", link.link_id)
        mode, term, basis_a, basis_b = self._cert_modes_draw(secret)
        rng = self.streams.get("cert_meas", link.link_id)
        bit_a, bit_b = rec.measure_both(basis_a, basis_b, rng)
        self._fate(rec, "sacrificed")
        monitor_node, remote = sorted(link.endpoints)
        self._send(remote, monitor_node, "cert_result",
                   {"scope": scope, "mode": mode, "term": term,
                    "bit_a": bit_a, "bit_b": bit_b},
                   self._cert_result_arrived)

    def _cert_sacrifice_e2e(self, conn: _Connection, ordinal: int,
                            rec_src: st.PairRecord, rec_dst: st.PairRecord):
        mode, term, basis_a, basis_b = conn.sac_meta[ordinal]
        bit_a = rec_src.measure_half(conn.src, basis_a,
                                     self.streams.get("app", conn.cid, "src"))
        bit_b = rec_dst.measure_half(conn.dst, basis_b,
                                     self.streams.get("app", conn.cid, "dst"))
        for rec in {rec_src.pair_id: rec_src, rec_dst.pair_id: rec_dst}.values():
            if rec.consumed_by is not None:
                self._fate(rec, "sacrificed")
                self._release_buffer(rec)
        conn.sacrificed_count += 1
        self._send(conn.dst, conn.src, "cert_result",
                   {"scope": conn.scope, "mode": mode, "term": term,
                    "bit_a": bit_a, "bit_b": bit_b},
                   self._cert_result_arrived)

    def _cert_result_arrived(self, payload: dict):
        bit_a, bit_b = payload["bit_a"], payload["bit_b"]
        if "corrupted_by" in payload:
            # a forger with channel access rewrites the report so the
            # comparison looks ideal for the measured setting
            bit_b = bit_a if payload["mode"] != "chsh" \
                or tuple(payload["term"]) != (1, 1) else 1 - bit_a
        self._cert_add(payload["scope"], payload["mode"], payload["term"],
                       bit_a, bit_b)

    # -- purification ---------------------------------------------------------------

    def _purify_enqueue(self, conn: _Connection, rec: st.PairRecord, level: int):
        pur = self.proto["purify"]
        while len(conn.purify_levels) <= level:
            conn.purify_levels.append(deque())
        if rec.fidelity >= float(pur["f_target"]) or level >= int(pur["max_rounds"]):
            self._purified_delivery(conn, rec)
            return
        q = conn.purify_levels[level]
        q.append(rec)
        if len(q) >= 2:
            keep = q.popleft()
            fuel = q.popleft()
            rng = self.streams.get("purify", conn.cid)
            ok = st.purify_pairs(keep, fuel, rng, self.now)
            self._fate(fuel, "purify")
            self._release_buffer(fuel)
            self._log("purify_round", node=conn.src, connection=conn.cid,
                      asset=keep.pair_id, level=level, success=int(ok),
                      fidelity=round(keep.fidelity, 6))
            if ok:
                self._purify_enqueue(conn, keep, level + 1)
            else:
                self._fate(keep, "purify")
                self._release_buffer(keep)

    def _purified_delivery(self, conn: _Connection, rec: st.PairRecord):
        ordinal = conn.purified_count
        conn.purified_count += 1
        secret = self.streams.get("cert", "e2e", conn.cid)
        if self.proto["cert_scope"] == scn_mod.CERT_SCOPE_E2E \
                and secret.random() < self.scn.sacrifice_for(conn.demand):
            mode, term, basis_a, basis_b = self._cert_modes_draw(secret)
            bit_a = rec.measure_half(conn.src, basis_a,
                                     self.streams.get("app", conn.cid, "src"))
            bit_b = rec.measure_half(conn.dst, basis_b,
                                     self.streams.get("app", conn.cid, "dst"))
            self._fate(rec, "sacrificed")
            self._release_buffer(rec)
            conn.sacrificed_count += 1
            self._send(conn.dst, conn.src, "cert_result",
                       {"scope": conn.scope, "mode": mode, "term": term,
                        "bit_a": bit_a, "bit_b": bit_b},
                       self._cert_result_arrived)
            return
        self._deliver_pairs(conn, ordinal, rec, rec)

    # -- BBM92 -----------------------------------------------------------------------

    def _bbm92_side_measure(self, conn: _Connection, side: str, ordinal: int,
                            rec: st.PairRecord):
        rng = self.streams.get("app", conn.cid, side)
        basis_idx = int(rng.random() < 0.5)  # 0 -> Z, 1 -> X
        basis = st.BASIS_X if basis_idx else st.BASIS_Z
        end = conn.end_node(side)
        st.decay_werner(rec, self.now, self.proto["memory_decay_time_s"])
        bit = rec.measure_half(end, basis, rng)
        conn.side_meas[side].append((basis_idx, bit))
        if rec.consumed_by is not None:
            self._fate(rec, "delivered")
            self._release_buffer(rec)
        if conn.mitm and conn.mitm[2]:
            self._mitm_try_sift(conn, side)
        else:
            self._bbm92_try_sift(conn)

    def _bbm92_try_sift(self, conn: _Connection):
        if conn.sift_in_flight or conn.state != C_RUNNING:
            return
        batch = conn.sift_round
        need = (batch + 1) * SIFT_BATCH
        if len(conn.side_meas["src"]) < need or len(conn.side_meas["dst"]) < need:
            return
        conn.sift_in_flight = True
        lo = batch * SIFT_BATCH
        dst_bases = [b for b, _ in conn.side_meas["dst"][lo:need]]
        self._send(conn.dst, conn.src, "sift_bases",
                   {"conn": conn, "batch": batch, "bases": dst_bases},
                   self._bbm92_bases_arrived)

    def _bbm92_bases_arrived(self, payload: dict):
        conn = payload["conn"]
        if conn.state != C_RUNNING:
            return
        batch = payload["batch"]
        dst_bases = payload["bases"]
        if "corrupted_by" in payload:
            dst_bases = [1 - b for b in dst_bases]
        lo = batch * SIFT_BATCH
        check_rng = self.streams.get("check", conn.cid)
        matched, checks = [], []
        for off, db in enumerate(dst_bases):
            sb, _ = conn.side_meas["src"][lo + off]
            if sb != db:
                continue
            matched.append(lo + off)
            if check_rng.random() < float(self.proto["check_fraction"]):
                checks.append(lo + off)
        key_positions = [p for p in matched if p not in set(checks)]
        self._send(conn.src, conn.dst, "sift_check",
                   {"conn": conn, "batch": batch, "matched": matched,
                    "checks": checks, "keys": key_positions},
                   self._bbm92_check_request_arrived)

    def _bbm92_check_request_arrived(self, payload: dict):
        conn = payload["conn"]
        if conn.state != C_RUNNING:
            return
        for p in payload["keys"]:
            conn.key_bits["dst"].append(conn.side_meas["dst"][p][1])
        bits = [conn.side_meas["dst"][p][1] for p in payload["checks"]]
        self._send(conn.dst, conn.src, "sift_check_bits",
                   {"conn": conn, "batch": payload["batch"],
                    "matched": payload["matched"], "checks": payload["checks"],
                    "keys": payload["keys"], "bits": bits},
                   self._bbm92_check_bits_arrived)

    def _bbm92_check_bits_arrived(self, payload: dict):
        conn = payload["conn"]
        if conn.state != C_RUNNING:
            return
        conn.sift_in_flight = False
        conn.sift_round = payload["batch"] + 1
        conn.sifted_total += len(payload["matched"])
        for pos, dst_bit in zip(payload["checks"], payload["bits"]):
            basis_idx, src_bit = conn.side_meas["src"][pos]
            conn.checked += 1
            conn.check_errors += src_bit != dst_bit
            self._cert_add(conn.scope, "qber_x" if basis_idx else "qber_z",
                           None, src_bit, dst_bit)
        for p in payload["keys"]:
            conn.key_bits["src"].append(conn.side_meas["src"][p][1])
        qber = conn.check_errors / conn.checked if conn.checked else 0.0
        self._log("sift", node=conn.src, connection=conn.cid,
                  batch=payload["batch"], sifted=conn.sifted_total,
                  checked=conn.checked, qber=round(qber, 6))
        if conn.checked >= self.thresholds.min_samples \
                and qber > float(self.proto["qber_abort_threshold"]):
            self._set_verdict(conn.scope, mon.VERDICT_ATTACK)
            conn.key_bits = {"src": [], "dst": []}
            self._abort(conn, "qber_abort")
            return
        if conn.sifted_total >= conn.target():
            self._bbm92_done(conn)
            return
        self._bbm92_try_sift(conn)

    def _bbm92_done(self, conn: _Connection):
        for side in ("src", "dst"):
            end = conn.end_node(side)
            mal = self.art.node_action(end, "malicious_application", self.now)
            if mal is not None:
                self.ledger.leaked_key_bits += len(conn.key_bits[side])
                self._effect(mal[0].attacker_id, "malicious_application", end,
                             bits=len(conn.key_bits[side]))
        ka, kb = conn.key_bits["src"], conn.key_bits["dst"]
        mismatched = sum(a != b for a, b in zip(ka, kb)) + abs(len(ka) - len(kb))
        self.ledger.corrupted_key_bits += mismatched
        self._complete(conn)

    # -- BBM92 under an in-path impostor ----------------------------------------------

    def _mitm_collect(self, conn: _Connection):
        """The impostor node turns held halves into fake end-to-end deliveries."""
        node, attacker, _split = conn.mitm
        j = conn.path.index(node)
        last = len(conn.path) - 1
        for seg, side in (((0, j), "src"), ((j, last), "dst")):
            dq = conn.segments.get(seg)
            while dq:
                rec = dq.popleft()
                # the impostor parks the half in its own storage; the link's
                # herald buffer slot frees as it would on honest consumption
                self._release_buffer(rec)
                conn.mitm_store[side].append(rec)
                ordinal = conn.side_ordinal[side]
                conn.side_ordinal[side] += 1
                end = conn.end_node(side)
                self._effect(attacker, "mitm_bbm92", node, side=side,
                             ordinal=ordinal)
                delay = self.topo.classical_latency(node, end)
                self._schedule(self.now + delay, self._side_ready, conn, side,
                               ordinal, rec, False)

    def _mitm_try_sift(self, conn: _Connection, side: str):
        """Split sessions: each endpoint reconciles with the impostor, who
        echoes the announced bases and so keeps every position and learns
        every bit."""
        if conn.state != C_RUNNING:
            return
        node, attacker, _ = conn.mitm
        batch = conn.mitm_sift[side]
        need = (batch + 1) * SIFT_BATCH
        if len(conn.side_meas[side]) < need:
            return
        conn.mitm_sift[side] += 1
        lo = batch * SIFT_BATCH
        rng = self.streams.get("attacker", attacker)
        check_rng = self.streams.get("check", conn.cid, side)
        frac = float(self.proto["check_fraction"])
        for pos in range(lo, need):
            basis_idx, bit = conn.side_meas[side][pos]
            rec = conn.mitm_store[side][pos]
            basis = st.BASIS_X if basis_idx else st.BASIS_Z
            ebit = rec.measure_half(node, basis, rng)
            rec.leak_tag = rec.leak_tag or attacker
            if rec.consumed_by is not None:
                self._fate(rec, "delivered")
                self._release_buffer(rec)
            if check_rng.random() < frac:
                self._cert_add(conn.scope, "qber_x" if basis_idx else "qber_z",
                               None, bit, ebit)
            else:
                conn.mitm_key[side].append(bit)
                conn.attacker_key[side].append(ebit)
        if len(conn.mitm_key[side]) >= conn.target() and not conn.key_bits[side]:
            conn.key_bits[side] = conn.mitm_key[side][:conn.target()]
            conn.attacker_key[side] = conn.attacker_key[side][:conn.target()]
            self.ledger.leaked_key_bits += sum(
                a == b for a, b in zip(conn.key_bits[side],
                                       conn.attacker_key[side]))
            self._log("sift", node=conn.end_node(side), connection=conn.cid,
                      side=side, key_bits=len(conn.key_bits[side]), split=1)
        if conn.key_bits["src"] and conn.key_bits["dst"]:
            ka, kb = conn.key_bits["src"], conn.key_bits["dst"]
            mismatched = sum(a != b for a, b in zip(ka, kb)) + abs(len(ka) - len(kb))
            self.ledger.corrupted_key_bits += mismatched
            self._complete(conn)

    # -- crossed switching ---------------------------------------------------------

    def _switch_collect(self, conn: _Connection, j: int, node: str, hit):
        script, act = hit
        d_a, d_b = act.params["cross"]
        if d_a not in self.conns or d_b not in self.conns:
            return
        other_id = d_b if conn.cid == d_a else d_a
        other = self.conns[other_id]
        if other.state != C_RUNNING:
            return
        self._pool_reaching_segments(conn, j, node)
        if node in other.path:
            self._pool_reaching_segments(other, other.path.index(node), node)
        self._switch_try(node, script.attacker_id,
                         self.conns[d_a], self.conns[d_b])

    def _pool_reaching_segments(self, conn: _Connection, j: int, node: str):
        last = len(conn.path) - 1
        left = conn.segments.get((0, j))
        while left:
            conn.switch_pool["left"].append(left.popleft())
        right = conn.segments.get((j, last))
        while right:
            conn.switch_pool["right"].append(right.popleft())

    def _switch_try(self, node: str, attacker: str, conn_a: _Connection,
                    conn_b: _Connection):
        pool_a = conn_a.switch_pool
        pool_b = conn_b.switch_pool
        rng = self.streams.get("attacker", attacker)

        def splice(left_conn, left_pool, right_conn, right_pool):
            while left_pool["left"] and right_pool["right"]:
                p_left = left_pool["left"].popleft()
                p_right = right_pool["right"].popleft()
                out, outcome = st.swap_pairs(p_left, p_right, node, rng,
                                             self._new_pair_id(), self.now)
                self._track(out)
                for rec in (p_left, p_right):
                    self._fate(rec, "swap", at=node)
                    self._release_buffer(rec)
                self._effect(attacker, "switch_disrupt", node,
                             pair=out.pair_id, outcome=outcome)
                # each victim connection is told its own ordinal is ready
                for conn, side in ((left_conn, "src"), (right_conn, "dst")):
                    ordinal = conn.side_ordinal[side]
                    conn.side_ordinal[side] += 1
                    end = conn.end_node(side)
                    delay = self.topo.classical_latency(node, end)
                    self._schedule(self.now + delay, self._switch_side_ready,
                                   conn, side, ordinal, out)

        splice(conn_a, pool_a, conn_b, pool_b)
        splice(conn_b, pool_b, conn_a, pool_a)

    def _switch_side_ready(self, conn: _Connection, side: str, ordinal: int,
                           rec: st.PairRecord):
        self._side_ready(conn, side, ordinal, rec, False)

    # -- classical messaging ----------------------------------------------------------

    def _send(self, src: str, dst: str, kind: str, payload: dict, handler):
        latency = self.topo.classical_latency(src, dst)
        delay = 0.0
        channel = self.topo.classical_channel(src, dst)
        fate = "delivered"
        corrupted_by = None
        for script, act in self.art.message_actions(src, dst, self.now):
            kinds = act.params.get("kinds")
            if kinds and kind not in kinds:
                continue
            if act.kind == "eavesdrop_classical":
                self._effect(script.attacker_id, act.kind, (src, dst), msg=kind)
                continue
            if act.kind == "classical_dos":
                delay += float(act.params.get("delay_s", 0.01))
                self._effect(script.attacker_id, act.kind, (src, dst), msg=kind)
                continue
            if act.kind in ("drop_messages", "reroute_messages"):
                fate = "absorbed"
                self._effect(script.attacker_id, act.kind, (src, dst), msg=kind)
                break
            if act.kind == "modify_messages":
                if channel.authenticated and not self.art.holds_auth_keys(
                        script.attacker_id, self.now):
                    fate = "rejected_forgery"
                    self._effect(script.attacker_id, act.kind, (src, dst),
                                 msg=kind, detected=1)
                    break
                corrupted_by = script.attacker_id
                self._effect(script.attacker_id, act.kind, (src, dst), msg=kind)
        self._log("message", node=src, asset=dst, kind_=kind, fate=fate,
                  latency=round(latency + delay, 9))
        if fate != "delivered":
            return
        if corrupted_by is not None:
            payload = dict(payload, corrupted_by=corrupted_by)
        self._schedule(self.now + latency + delay, handler, payload)

    # -- reputation and physical attacks ------------------------------------------------

    def _false_failure(self, node: str, script, act):
        accused = act.params["accused"]
        acc = mon.Accusation(self.now, node, accused, authenticated=True,
                             corroborated=self._corroborated(accused), forged=False)
        self._effect(script.attacker_id, "false_failure_report", node,
                     accused=accused)
        hit = self.reputation.add_accusation(acc)
        if hit:
            self._isolate(hit)

    def _framing(self, node: str, script, act):
        victims = list(act.params["victims"])
        claimed = act.params.get("claimed_sources")
        if not claimed:
            pool = [n for n in sorted(self.topo.nodes)
                    if n not in victims and n != node]
            claimed = pool[:max(2, self.reputation.k)]
        for victim in victims:
            for source in claimed:
                acc = mon.Accusation(self.now, source, victim,
                                     authenticated=False,
                                     corroborated=self._corroborated(victim),
                                     forged=True)
                self._effect(script.attacker_id, "frame_nodes", node,
                             victim=victim, claimed_source=source)
                hit = self.reputation.add_accusation(acc)
                if hit:
                    self._isolate(hit)

    def _corroborated(self, accused: str) -> bool:
        """Does any standing suspicious verdict touch the accused node?"""
        for scope, verdict in sorted(self.verdicts.items()):
            if verdict != mon.VERDICT_ATTACK:
                continue
            if scope.startswith("link:"):
                link = self.topo.links.get(scope[5:])
                if link and accused in (*link.endpoints, link.midpoint):
                    return True
            else:
                conn = self.conns.get(scope.split(":", 1)[1])
                if conn and accused in conn.path:
                    return True
        return False

    def _isolate(self, node: str):
        if node in self.isolated:
            return
        self.isolated.add(node)
        self._log("node_event", node=node, event="isolated")
        self._remove_node_from_service(node, "isolated_node")

    def _remove_node_from_service(self, node: str, reason: str):
        for lid, lrt in sorted(self.link_rts.items()):
            link = lrt.spec
            if node in link.endpoints or node == link.midpoint:
                lrt.destroyed = True
        for cid in sorted(self.conns):
            conn = self.conns[cid]
            if conn.state in (C_SETUP, C_RUNNING) and node in conn.path:
                self._abort(conn, reason)

    def _physical(self, script, act):
        target = act.target
        if act.kind == "destroy_asset":
            self._effect(script.attacker_id, act.kind, target)
            if target in self.topo.links:
                self.link_rts[target].destroyed = True
                for cid in sorted(self.conns):
                    conn = self.conns[cid]
                    if conn.state in (C_SETUP, C_RUNNING) and target in conn.link_ids:
                        self._abort(conn, "asset_destroyed")
            else:
                self.destroyed_nodes.add(target)
                self._log("node_event", node=target, event="destroyed")
                self._remove_node_from_service(target, "asset_destroyed")
            return
        # theft: quantum steals stored halves, classical surrenders credentials
        self._effect(script.attacker_id, act.kind, target,
                     data=act.params.get("data", "quantum"))
        if act.params.get("data", "quantum") == "quantum":
            for cid in sorted(self.conns):
                conn = self.conns[cid]
                for seg in sorted(conn.segments):
                    dq = conn.segments[seg]
                    kept = deque()
                    while dq:
                        rec = dq.popleft()
                        if rec.holds(target):
                            rec.leak_tag = rec.leak_tag or script.attacker_id
                            rec.consume("stolen")
                            self._fate(rec, "destroyed_attack", reason="stolen")
                            self._release_buffer(rec)
                            self.ledger.record_leak(rec.pair_id, script.attacker_id)
                        else:
                            kept.append(rec)
                    conn.segments[seg] = kept

    # -- finalization ------------------------------------------------------------------

    def _finalize(self):
        for cid in sorted(self.conns):
            conn = self.conns[cid]
            if conn.state == C_RUNNING:
                conn.state = C_INCOMPLETE
                conn.ended_at = self.horizon
                self._teardown(conn)
            elif conn.state == C_SETUP:
                conn.state = C_FAILED
                conn.reason = conn.reason or "setup_unfinished"
                conn.ended_at = self.horizon
            for side in ("src", "dst"):
                for rec in conn.mitm_store[side]:
                    if rec.consumed_by is None and rec.pair_id not in self.pair_fates:
                        self._fate(rec, "destroyed_failure", reason="horizon")
                        self._release_buffer(rec)
            for slot in conn.ready.values():
                for rec in slot.values():
                    if rec.pair_id not in self.pair_fates:
                        self._fate(rec, "destroyed_failure", reason="horizon")
                        self._release_buffer(rec)
            for dq in conn.switch_pool.values():
                while dq:
                    rec = dq.popleft()
                    self._fate(rec, "destroyed_failure", reason="horizon")
                    self._release_buffer(rec)
        # records referenced only by undelivered messages (e.g. a dropped
        # correction) expire with the run
        unaccounted = self.ledger.records_created - sum(
            self.ledger.fate_counts.values())
        for _ in range(unaccounted):
            self.ledger.record_fate("destroyed_failure")
        removed = self.isolated | self.destroyed_nodes
        if removed:
            part = self.topo.partition_report(removed)
            self.ledger.disconnected_pair_fraction = part.disconnected_pairs_fraction
        self._detection_latencies()

    def _relevant_scopes(self, act: atk.AttackAction, script) -> set:
        target = act.target
        scopes = set()
        if isinstance(target, str) and target in self.topo.links:
            scopes.add(f"link:{target}")
        for cid in sorted(self.conns):
            conn = self.conns[cid]
            if isinstance(target, (list, tuple)):
                if set(target) & set(conn.path):
                    scopes.add(conn.scope)
            elif target in conn.link_ids or (isinstance(target, str)
                                             and target in conn.path):
                scopes.add(conn.scope)
        if act.kind in atk.REQUEST_KINDS:
            scopes |= {c.scope for c in self.conns.values()}
        return scopes

    def _detection_latencies(self):
        for script in self.art.scripts:
            for idx, act in enumerate(script.actions):
                scopes = self._relevant_scopes(act, script)
                times = [t for t, scope, v in self.verdict_log
                         if v == mon.VERDICT_ATTACK and scope in scopes]
                key = f"{script.attacker_id}:{act.kind}:{act.target}#{idx}"
                self.ledger.detection_latency_s[key] = mon.detection_latency(
                    times, act.start())

    # -- summaries ----------------------------------------------------------------------

    def cert_reports(self) -> dict:
        delta = float(self.proto["delta"])
        return {scope: acc.report(delta) for scope, acc
                in sorted(self.cert_acc.items())}

    def connection_summary(self, conn: _Connection) -> dict:
        d = conn.demand
        duration = (conn.ended_at if conn.ended_at is not None else self.horizon) \
            - (conn.started_at if conn.started_at is not None else 0.0)
        duration = max(duration, 1e-12)
        if d.application == scn_mod.APP_BBM92:
            produced = len(conn.key_bits["src"])
            throughput = produced / duration
        else:
            produced = conn.delivered_count
            throughput = produced / duration
        out = {
            "connection": conn.cid,
            "src": d.src,
            "dst": d.dst,
            "application": d.application,
            "injected_by": d.injected_by,
            "path": list(conn.path),
            "links": list(conn.link_ids),
            "state": conn.state,
            "reason": conn.reason,
            "started_s": conn.started_at,
            "ended_s": conn.ended_at,
            "target": conn.target(),
            "e2e_pairs": conn.e2e_count,
            "delivered_pairs": conn.delivered_count,
            "sacrificed_pairs": conn.sacrificed_count,
            "leaked_delivered": conn.leaked_delivered,
            "mean_delivered_fidelity": (conn.fidelity_sum / conn.fidelity_n
                                        if conn.fidelity_n else None),
            "throughput_per_s": throughput,
        }
        if d.application == scn_mod.APP_BBM92:
            out.update({
                "sifted": conn.sifted_total if not (conn.mitm and conn.mitm[2])
                else sum(len(v) for v in conn.mitm_key.values()),
                "checked": conn.checked,
                "qber_estimate": (conn.check_errors / conn.checked
                                  if conn.checked else None),
                "key_src": "".join(str(b) for b in conn.key_bits["src"]),
                "key_dst": "".join(str(b) for b in conn.key_bits["dst"]),
                "attacker_key_src": "".join(str(b) for b in conn.attacker_key["src"]),
                "attacker_key_dst": "".join(str(b) for b in conn.attacker_key["dst"]),
                "mitm_split": bool(conn.mitm and conn.mitm[2]),
            })
        return out

    def link_summary(self) -> dict:
        out = {}
        for lid, lrt in sorted(self.link_rts.items()):
            out[lid] = {"attempts": lrt.attempts, "successes": lrt.successes,
                        "pairs_generated": lrt.generated,
                        "destroyed": lrt.destroyed}
        return out
