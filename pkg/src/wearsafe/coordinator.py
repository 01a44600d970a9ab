"""Centralized conflict detection and resolution service.

The coordinator ingests safety-message frames, drops implausible ones,
keeps a freshness-bounded registry of everyone's latest state and predicted
occupancy, scans registry pairs for conflicts on its processing tick, and
issues complementary advisory pairs: one agent acts (brakes or turns), the
other holds course. Compliance is monitored after a grace period; if the
acting agent ignores its advisory the senses are swapped exactly once, and
further non-compliance escalates to an alarm. It is a deterministic state
machine: identical message/tick sequences replay identical decisions.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .intent import IntentDistribution
from .reachset import (
    BETA_DEFAULT,
    D_SAFE_DEFAULT,
    DT_REACH_DEFAULT,
    HORIZON_DEFAULT,
    P_MIN_DEFAULT,
    Conflict,
    ReachableSet,
    compute_reachable_set,
    conflict_scan,
    extended_ttc,
)
from .sensing import FusedEstimate
from .world import KinematicState, Maneuver, ModeLimits, TransportMode
from .world import maneuver_to_control
from .world import step as world_step

T_STALE_DEFAULT = 2.0  # s, registry freshness horizon
T_GRACE_DEFAULT = 1.0  # s, compliance grace period
HANDLING_MS_DEFAULT = 5.0  # per-message cloud processing latency
CLEAR_STREAK_DEFAULT = 3  # conflict-free ticks before a record clears

# Plausibility envelope: reported motion may exceed the mode limits by this
# factor before it is branded impossible, plus a fixed slack for noise.
_PLAUS_FACTOR = 1.5
_PLAUS_SLACK_M = 5.0

_MANEUVER_SPEED_TOL = 1.0  # m/s, allowed drift for a maintain-course advisory
_MAINTAIN_HEADING_TOL = math.radians(15.0)
_TURN_HEADING_MIN = math.radians(5.0)


class Compliance(Enum):
    PENDING = "pending"
    COMPLIANT = "compliant"
    NON_COMPLIANT = "non_compliant"


class RecordState(Enum):
    ACTIVE = "active"
    REVERSED = "reversed"
    CLEARED = "cleared"
    ESCALATED = "escalated"


class StaleConflictError(Exception):
    """An involved agent's registry entry aged out before resolution."""


class AlreadyReversedError(Exception):
    """A conflict record may swap senses at most once."""


@dataclass(frozen=True)
class CoordinatorConfig:
    p_min: float = P_MIN_DEFAULT
    d_safe: float = D_SAFE_DEFAULT
    tau_imminent_s: float = 3.0
    t_grace_s: float = T_GRACE_DEFAULT
    t_stale_s: float = T_STALE_DEFAULT
    horizon_s: float = HORIZON_DEFAULT
    dt_reach_s: float = DT_REACH_DEFAULT
    beta: float = BETA_DEFAULT
    eps_floor: float = 0.01
    handling_ms: float = HANDLING_MS_DEFAULT
    clear_streak: int = CLEAR_STREAK_DEFAULT
    advisories_enabled: bool = True
    plausibility_enabled: bool = True
    gaze_suppression: bool = True
    speed_std_nominal: float = 0.25  # placeholder spread for wire-reconstructed estimates


# Late import to avoid a cycle: wire needs reachset types, we need wire types.
from .netsim.wire import Advisory, Bsm, decode_bsm  # noqa: E402


@dataclass
class RegistryEntry:
    bsm: Bsm
    effective_ms: float  # arrival + handling; visible to ticks from here on


class Registry:
    """Latest accepted safety message per agent."""

    def __init__(self):
        self.entries: dict[int, RegistryEntry] = {}

    def get(self, agent: int) -> Optional[RegistryEntry]:
        return self.entries.get(agent)

    def update(self, bsm: Bsm, effective_ms: float) -> None:
        self.entries[bsm.sender] = RegistryEntry(bsm=bsm, effective_ms=effective_ms)

    def fresh(self, now_ms: float, t_stale_s: float) -> list[tuple[int, RegistryEntry]]:
        horizon = t_stale_s * 1000.0
        return sorted(
            ((aid, e) for aid, e in self.entries.items()
             if e.effective_ms <= now_ms and now_ms - e.effective_ms <= horizon),
            key=lambda item: item[0],
        )


def plausibility_filter(prev: Optional[Bsm], nxt: Bsm, limits: ModeLimits) -> Optional[str]:
    """Return a rejection reason for a physically impossible report, or None.

    Checks, in order: sequence regression, timestamp regression, reported
    speed beyond 1.5x the mode maximum, and implied displacement beyond what
    1.5x the mode maximum could cover since the previous accepted report.
    """
    if prev is not None:
        if nxt.seq <= prev.seq:
            return "seq_regress"
        if nxt.timestamp_ms < prev.timestamp_ms:
            return "timestamp_regress"
    if nxt.state.speed > _PLAUS_FACTOR * limits.v_max:
        return "overspeed"
    if prev is not None:
        dt_s = (nxt.timestamp_ms - prev.timestamp_ms) / 1000.0
        moved = math.hypot(nxt.state.x - prev.state.x, nxt.state.y - prev.state.y)
        if moved > _PLAUS_FACTOR * limits.v_max * dt_s + _PLAUS_SLACK_M:
            return "teleport"
    return None


def estimate_from_bsm(bsm: Bsm, limits: ModeLimits,
                      speed_std: float = 0.25) -> FusedEstimate:
    """Rebuild a fused estimate from wire data for advisory verification.

    The positional spread is recovered from the step-0 disc radius, which
    encodes footprint + 2 * pos_std at computation time.
    """
    r0 = bsm.reach.steps[0][0].radius
    pos_std = max(0.05, (r0 - limits.footprint_radius) / 2.0)
    return FusedEstimate(time=bsm.reach.t0, mean=bsm.state,
                         pos_std=pos_std, speed_std=speed_std)


def detect_conflicts(registry: Registry, now_ms: float,
                     p_min: float = P_MIN_DEFAULT,
                     d_safe: float = D_SAFE_DEFAULT,
                     t_stale_s: float = T_STALE_DEFAULT,
                     prefilter: bool = True) -> list[Conflict]:
    """Scan all fresh registry pairs, canonically ordered by (t_first, pair).

    Pairs whose prediction grids are skewed by more than one step are
    skipped (one side is too stale to align). The optional prefilter drops
    pairs whose bounding circles cannot touch; it never changes the result.
    """
    entries = registry.fresh(now_ms, t_stale_s)
    conflicts: list[Conflict] = []
    for i in range(len(entries)):
        aid_a, ea = entries[i]
        reach_a = ea.bsm.reach
        for j in range(i + 1, len(entries)):
            aid_b, eb = entries[j]
            reach_b = eb.bsm.reach
            if abs(reach_a.dt_reach - reach_b.dt_reach) > 1e-9:
                continue
            if abs(reach_a.t0 - reach_b.t0) > reach_a.dt_reach + 1e-9:
                continue  # staler set; wait for the next wave
            if prefilter:
                ca, cb = reach_a.steps[0][0], reach_b.steps[0][0]
                gap = math.hypot(ca.x - cb.x, ca.y - cb.y)
                if gap > reach_a.max_extent() + reach_b.max_extent() + d_safe:
                    continue
            c = conflict_scan(reach_a, reach_b, p_min=p_min, d_safe=d_safe)
            if c is not None:
                conflicts.append(c)
    conflicts.sort(key=lambda c: (c.t_first, c.agent_a, c.agent_b))
    return conflicts


def make_conflict_id(pair: tuple[int, int], created_ms: float) -> int:
    digest = hashlib.sha256(
        struct.pack("<IIQ", pair[0], pair[1], int(created_ms))
    ).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class ConflictRecord:
    conflict_id: int
    pair: tuple[int, int]
    conflict: Conflict
    created_ms: float
    state: RecordState = RecordState.ACTIVE
    lateral: bool = False
    active_agent: Optional[int] = None  # Brake/turn duty holder
    passive_agent: Optional[int] = None
    current: tuple[Advisory, ...] = ()
    pairs_issued: int = 0
    reversed_once: bool = False
    informational: bool = False
    suppressed_ticks: int = 0
    baselines: dict[int, tuple[float, float]] = field(default_factory=dict)  # speed, heading
    grace_deadline_ms: Optional[float] = None
    clear_streak: int = 0
    cleared_reason: Optional[str] = None

    def transition(self, new_state: RecordState) -> None:
        allowed = {
            RecordState.ACTIVE: {RecordState.REVERSED, RecordState.CLEARED, RecordState.ESCALATED},
            RecordState.REVERSED: {RecordState.CLEARED, RecordState.ESCALATED},
        }
        if new_state not in allowed.get(self.state, set()):
            raise ValueError(f"illegal transition {self.state.value} -> {new_state.value}")
        self.state = new_state


@dataclass(frozen=True)
class ResolveOutcome:
    actions: dict[int, Maneuver]  # agent -> advised maneuver
    active_agent: int
    passive_agent: Optional[int]
    lateral: bool
    escalated: bool


@dataclass(frozen=True)
class IssuedPair:
    record_id: int
    pair: tuple[int, int]
    advisories: tuple[Advisory, ...]
    is_reversal: bool
    escalated: bool
    t_conflict_s: float
    separation_m: float


@dataclass(frozen=True)
class IngestResult:
    accepted: bool
    sender: int
    seq: int
    reject_reason: Optional[str] = None


@dataclass(frozen=True)
class TickResult:
    conflicts: tuple[Conflict, ...]
    issued: tuple[IssuedPair, ...]
    alarms: tuple[tuple[int, tuple[int, int]], ...]  # (conflict_id, pair)
    cleared: tuple[tuple[int, tuple[int, int], str], ...]  # (conflict_id, pair, reason)
    suppressed: tuple[tuple[int, tuple[int, int]], ...]  # informational downgrades


def _verify_pair(actions: dict[int, Maneuver], entries: dict[int, RegistryEntry],
                 limits_for: Callable[[TransportMode], ModeLimits],
                 cfg: CoordinatorConfig) -> bool:
    """True when the advised maneuvers, if followed, clear the conflict.

    Two checks must pass: the advised reachable sets stay disjoint over the
    horizon, and the advised end states are not left on a closing course
    (a plan that merely pushes the impact past the horizon, e.g. holding
    course toward a braked agent, is not a resolution).
    """
    sets: list[ReachableSet] = []
    terminals: list[tuple[KinematicState, float]] = []
    for aid, action in sorted(actions.items()):
        entry = entries[aid]
        limits = limits_for(entry.bsm.mode)
        est = estimate_from_bsm(entry.bsm, limits, cfg.speed_std_nominal)
        intent = IntentDistribution.concentrated(action, floor=cfg.eps_floor)
        sets.append(compute_reachable_set(
            aid, est, intent, limits,
            horizon=cfg.horizon_s, dt_reach=cfg.dt_reach_s, beta=cfg.beta))
        u = maneuver_to_control(action, est.mean, limits)
        term = est.mean
        for _ in range(sets[-1].n_steps - 1):
            term = world_step(term, u, limits, cfg.dt_reach_s)
        terminals.append((term, limits.footprint_radius))
    if conflict_scan(sets[0], sets[1], p_min=cfg.p_min, d_safe=cfg.d_safe) is not None:
        return False
    ttc = extended_ttc(terminals[0][0], terminals[1][0],
                       terminals[0][1], terminals[1][1])
    return ttc is None or ttc >= cfg.horizon_s


def plan_resolution(c: Conflict, entries: dict[int, RegistryEntry],
                    limits_for: Callable[[TransportMode], ModeLimits],
                    cfg: CoordinatorConfig) -> ResolveOutcome:
    """Choose and verify the advisory pair for a conflict.

    Sense assignment: the less vulnerable agent brakes; on equal rank the
    lower id brakes. If the verified rescan still conflicts, both agents are
    told to turn to their own right; if that fails too, the pair escalates
    to an alarm with both braking.
    """
    a, b = c.pair
    va = entries[a].bsm.mode.vulnerability
    vb = entries[b].bsm.mode.vulnerability
    if va != vb:
        brake_agent = a if va < vb else b
    else:
        brake_agent = min(a, b)
    hold_agent = b if brake_agent == a else a

    primary = {brake_agent: Maneuver.BRAKE, hold_agent: Maneuver.MAINTAIN_COURSE}
    if _verify_pair(primary, entries, limits_for, cfg):
        return ResolveOutcome(actions=primary, active_agent=brake_agent,
                              passive_agent=hold_agent, lateral=False, escalated=False)

    lateral = {a: Maneuver.TURN_RIGHT, b: Maneuver.TURN_RIGHT}
    if _verify_pair(lateral, entries, limits_for, cfg):
        return ResolveOutcome(actions=lateral, active_agent=min(a, b),
                              passive_agent=None, lateral=True, escalated=False)

    alarm = {a: Maneuver.BRAKE, b: Maneuver.BRAKE}
    return ResolveOutcome(actions=alarm, active_agent=min(a, b),
                          passive_agent=None, lateral=False, escalated=True)


def advisory_compliance(action: Maneuver, baseline_speed: float, baseline_heading: float,
                        observed_speed: float, observed_heading: float,
                        limits: ModeLimits, t_grace_s: float) -> bool:
    """Did the observed motion honor the advisory, after the grace period?"""
    from .world import wrap_angle

    dv = observed_speed - baseline_speed
    dh = wrap_angle(observed_heading - baseline_heading)
    if action is Maneuver.BRAKE:
        required = min(0.5 * abs(limits.a_min) * t_grace_s, baseline_speed)
        return -dv >= required
    if action is Maneuver.MAINTAIN_COURSE:
        return abs(dh) <= _MAINTAIN_HEADING_TOL and abs(dv) <= _MANEUVER_SPEED_TOL
    if action is Maneuver.TURN_LEFT:
        return dh >= _TURN_HEADING_MIN
    if action is Maneuver.TURN_RIGHT:
        return dh <= -_TURN_HEADING_MIN
    if action is Maneuver.ACCELERATE:
        required = min(0.5 * limits.a_max * t_grace_s, max(0.0, limits.v_max - baseline_speed))
        return dv >= required
    raise ValueError(f"unknown action {action!r}")


def monitor_compliance(rec: ConflictRecord, registry: Registry, now_ms: float,
                       limits_for: Callable[[TransportMode], ModeLimits],
                       t_grace_s: float = T_GRACE_DEFAULT) -> dict[int, Compliance]:
    """Per-agent compliance with the record's current advisories."""
    statuses: dict[int, Compliance] = {}
    for adv in rec.current:
        if rec.grace_deadline_ms is None or now_ms <= rec.grace_deadline_ms:
            statuses[adv.target] = Compliance.PENDING
            continue
        entry = registry.get(adv.target)
        # Judge only on motion observed after the grace period elapsed;
        # earlier reports cannot show the full required response yet.
        if entry is None or entry.bsm.timestamp_ms < rec.grace_deadline_ms:
            statuses[adv.target] = Compliance.PENDING
            continue
        base_speed, base_heading = rec.baselines[adv.target]
        ok = advisory_compliance(
            adv.action, base_speed, base_heading,
            entry.bsm.state.speed, entry.bsm.state.heading,
            limits_for(entry.bsm.mode), t_grace_s,
        )
        statuses[adv.target] = Compliance.COMPLIANT if ok else Compliance.NON_COMPLIANT
    return statuses


class Coordinator:
    """Deterministic cloud-side state machine driven by deliveries and ticks."""

    def __init__(self, cfg: CoordinatorConfig,
                 limits_for: Callable[[TransportMode], ModeLimits],
                 gaze_lookup: Optional[Callable[[int], bool]] = None):
        self.cfg = cfg
        self.limits_for = limits_for
        self.gaze_lookup = gaze_lookup
        self.registry = Registry()
        self.records: dict[tuple[int, int], ConflictRecord] = {}
        self.history: list[ConflictRecord] = []
        self.rejected_counts: dict[str, int] = {}

    # -- ingest ------------------------------------------------------------

    def ingest(self, frame: bytes, arrival_ms: float) -> IngestResult:
        """Decode one safety-message frame and admit it past the filter."""
        bsm = decode_bsm(frame)
        prev_entry = self.registry.get(bsm.sender)
        prev = prev_entry.bsm if prev_entry is not None else None
        reason = None
        if self.cfg.plausibility_enabled:
            reason = plausibility_filter(prev, bsm, self.limits_for(bsm.mode))
        if reason is not None:
            self.rejected_counts[reason] = self.rejected_counts.get(reason, 0) + 1
            return IngestResult(accepted=False, sender=bsm.sender, seq=bsm.seq,
                                reject_reason=reason)
        self.registry.update(bsm, arrival_ms + self.cfg.handling_ms)
        return IngestResult(accepted=True, sender=bsm.sender, seq=bsm.seq)

    # -- per-tick processing -------------------------------------------------

    def _separation_m(self, pair: tuple[int, int]) -> float:
        ea, eb = self.registry.get(pair[0]), self.registry.get(pair[1])
        return math.hypot(ea.bsm.state.x - eb.bsm.state.x,
                          ea.bsm.state.y - eb.bsm.state.y)

    def _suppressed(self, rec: ConflictRecord, now_ms: float) -> bool:
        if not self.cfg.gaze_suppression or self.gaze_lookup is None:
            return False
        if rec.conflict.t_first - now_ms / 1000.0 <= self.cfg.tau_imminent_s:
            return False
        return all(self.gaze_lookup(aid) for aid in rec.pair)

    def _issue(self, rec: ConflictRecord, outcome: ResolveOutcome,
               now_ms: float) -> IssuedPair:
        expiry = int(now_ms + self.cfg.horizon_s * 1000.0)
        t_conf_s = max(0.0, rec.conflict.t_first - now_ms / 1000.0)
        sep_m = self._separation_m(rec.pair)
        advisories = tuple(
            Advisory(
                conflict_id=rec.conflict_id,
                target=aid,
                action=outcome.actions[aid],
                issued_at_ms=int(now_ms),
                is_reversal=False,
                expiry_ms=expiry,
                t_conflict_ms=int(t_conf_s * 1000.0),
                separation_cm=min(0xFFFFFFFF, round(sep_m * 100.0)),
            )
            for aid in rec.pair
        )
        rec.current = advisories
        rec.pairs_issued += 1
        rec.active_agent = outcome.active_agent
        rec.passive_agent = outcome.passive_agent
        rec.lateral = outcome.lateral
        rec.informational = False
        rec.baselines = {
            aid: (self.registry.get(aid).bsm.state.speed,
                  self.registry.get(aid).bsm.state.heading)
            for aid in rec.pair
        }
        rec.grace_deadline_ms = now_ms + self.cfg.t_grace_s * 1000.0
        if outcome.escalated:
            rec.transition(RecordState.ESCALATED)
        return IssuedPair(record_id=rec.conflict_id, pair=rec.pair,
                          advisories=advisories, is_reversal=False,
                          escalated=outcome.escalated,
                          t_conflict_s=t_conf_s, separation_m=sep_m)

    def reverse(self, rec: ConflictRecord, now_ms: float) -> IssuedPair:
        """Swap senses once: the hold-course agent now brakes."""
        if rec.state is not RecordState.ACTIVE or rec.reversed_once:
            raise AlreadyReversedError(f"record {rec.conflict_id:x} already {rec.state.value}")
        entries = {aid: self.registry.get(aid) for aid in rec.pair}
        if any(e is None for e in entries.values()):
            raise StaleConflictError(f"registry entry missing for pair {rec.pair}")
        old_active = rec.active_agent
        new_active = rec.passive_agent if rec.passive_agent is not None else (
            rec.pair[0] if rec.pair[1] == old_active else rec.pair[1])
        actions = {new_active: Maneuver.BRAKE, old_active: Maneuver.MAINTAIN_COURSE}
        expiry = int(now_ms + self.cfg.horizon_s * 1000.0)
        t_conf_s = max(0.0, rec.conflict.t_first - now_ms / 1000.0)
        sep_m = self._separation_m(rec.pair)
        advisories = tuple(
            Advisory(
                conflict_id=rec.conflict_id,
                target=aid,
                action=actions[aid],
                issued_at_ms=int(now_ms),
                is_reversal=True,
                expiry_ms=expiry,
                t_conflict_ms=int(t_conf_s * 1000.0),
                separation_cm=min(0xFFFFFFFF, round(sep_m * 100.0)),
            )
            for aid in rec.pair
        )
        rec.current = advisories
        rec.pairs_issued += 1
        rec.reversed_once = True
        rec.active_agent = new_active
        rec.passive_agent = old_active
        rec.lateral = False
        rec.baselines = {
            aid: (entries[aid].bsm.state.speed, entries[aid].bsm.state.heading)
            for aid in rec.pair
        }
        rec.grace_deadline_ms = now_ms + self.cfg.t_grace_s * 1000.0
        rec.transition(RecordState.REVERSED)
        return IssuedPair(record_id=rec.conflict_id, pair=rec.pair,
                          advisories=advisories, is_reversal=True, escalated=False,
                          t_conflict_s=t_conf_s, separation_m=sep_m)

    def _retire(self, rec: ConflictRecord, reason: str) -> tuple[int, tuple[int, int], str]:
        # Escalated records keep their terminal state; others clear.
        if rec.state in (RecordState.ACTIVE, RecordState.REVERSED):
            rec.transition(RecordState.CLEARED)
        rec.cleared_reason = reason
        self.history.append(rec)
        del self.records[rec.pair]
        return (rec.conflict_id, rec.pair, reason)

    def tick(self, now_ms: float) -> TickResult:
        """One coordinator processing step at time now_ms."""
        conflicts = detect_conflicts(
            self.registry, now_ms, p_min=self.cfg.p_min, d_safe=self.cfg.d_safe,
            t_stale_s=self.cfg.t_stale_s)
        if not self.cfg.advisories_enabled:
            return TickResult(conflicts=tuple(conflicts), issued=(),
                              alarms=(), cleared=(), suppressed=())

        issued: list[IssuedPair] = []
        alarms: list[tuple[int, tuple[int, int]]] = []
        cleared: list[tuple[int, tuple[int, int], str]] = []
        suppressed: list[tuple[int, tuple[int, int]]] = []
        live_pairs = {c.pair for c in conflicts}

        for c in conflicts:
            rec = self.records.get(c.pair)
            if rec is None:
                rec = ConflictRecord(
                    conflict_id=make_conflict_id(c.pair, now_ms),
                    pair=c.pair, conflict=c, created_ms=now_ms)
                self.records[c.pair] = rec
                entries = {aid: self.registry.get(aid) for aid in c.pair}
                if self._suppressed(rec, now_ms):
                    rec.informational = True
                    rec.suppressed_ticks += 1
                    suppressed.append((rec.conflict_id, rec.pair))
                else:
                    outcome = plan_resolution(c, entries, self.limits_for, self.cfg)
                    issued.append(self._issue(rec, outcome, now_ms))
            else:
                rec.conflict = c
                rec.clear_streak = 0
                if rec.informational and rec.state is RecordState.ACTIVE:
                    if self._suppressed(rec, now_ms):
                        rec.suppressed_ticks += 1
                        suppressed.append((rec.conflict_id, rec.pair))
                    else:
                        entries = {aid: self.registry.get(aid) for aid in c.pair}
                        outcome = plan_resolution(c, entries, self.limits_for, self.cfg)
                        issued.append(self._issue(rec, outcome, now_ms))

        # Compliance, reversal, escalation; deterministic record order.
        for pair in sorted(self.records):
            rec = self.records[pair]
            if not rec.current or rec.state is RecordState.ESCALATED:
                continue
            statuses = monitor_compliance(rec, self.registry, now_ms,
                                          self.limits_for, self.cfg.t_grace_s)
            if rec.state is RecordState.ACTIVE:
                actors = sorted(rec.pair) if rec.lateral else [rec.active_agent]
                defector = next((aid for aid in actors
                                 if statuses.get(aid) is Compliance.NON_COMPLIANT), None)
                if defector is not None:
                    if rec.lateral:
                        rec.active_agent = defector
                        rec.passive_agent = (rec.pair[0] if rec.pair[1] == defector
                                             else rec.pair[1])
                    issued.append(self.reverse(rec, now_ms))
            elif rec.state is RecordState.REVERSED:
                if statuses.get(rec.active_agent) is Compliance.NON_COMPLIANT:
                    rec.transition(RecordState.ESCALATED)
                    alarms.append((rec.conflict_id, rec.pair))

        # Expiry and hysteresis-based clearing.
        for pair in sorted(self.records):
            rec = self.records[pair]
            if pair not in live_pairs:
                rec.clear_streak += 1
            if rec.current and now_ms >= rec.current[0].expiry_ms:
                cleared.append(self._retire(rec, "expired"))
            elif rec.clear_streak >= self.cfg.clear_streak:
                cleared.append(self._retire(rec, "separated"))

        return TickResult(conflicts=tuple(conflicts), issued=tuple(issued),
                          alarms=tuple(alarms), cleared=tuple(cleared),
                          suppressed=tuple(suppressed))

    # -- introspection -------------------------------------------------------

    def state_dump(self, now_ms: float) -> dict:
        """JSON-serializable snapshot for debugging and checkpoint inspection."""
        return {
            "t_ms": now_ms,
            "registry": {
                str(aid): {
                    "seq": e.bsm.seq,
                    "t_ms": e.bsm.timestamp_ms,
                    "x": e.bsm.state.x,
                    "y": e.bsm.state.y,
                    "speed": e.bsm.state.speed,
                    "effective_ms": e.effective_ms,
                }
                for aid, e in sorted(self.registry.entries.items())
            },
            "records": [
                {
                    "conflict_id": f"{rec.conflict_id:016x}",
                    "pair": list(rec.pair),
                    "state": rec.state.value,
                    "pairs_issued": rec.pairs_issued,
                    "reversed": rec.reversed_once,
                    "informational": rec.informational,
                    "t_first": rec.conflict.t_first,
                }
                for _, rec in sorted(self.records.items())
            ],
            "rejected": dict(sorted(self.rejected_counts.items())),
        }
