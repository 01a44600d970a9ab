"""End-to-end simulation: the per-agent pipeline, event loop and tracing.

Each 0.1 s world tick advances every agent's ground truth under its
scripted (or advised) maneuver, feeds the sensor models, runs the fusion
filter and intent estimator, and on the reach cadence broadcasts a safety
message to the coordinator over the selected channel. Coordinator ticks
detect conflicts and issue advisories, which travel back over the channel
models and, after a per-agent reaction delay, override the scripted
maneuver until they expire. Ground-truth collision bookkeeping is entirely
independent of the estimation stack.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .. import rng as rngmod
from ..coordinator import Coordinator, CoordinatorConfig
from ..intent import CueWindow, RuleBasedIntentEstimator, W_CUE_DEFAULT
from ..netsim import (
    ChannelKind,
    ChannelPolicy,
    EventQueue,
    WireError,
    channel_profile,
    decode_advisory,
    encode_advisory,
    encode_bsm,
    select_channel,
    transmit,
)
from ..netsim.wire import Bsm
from ..reachset import compute_reachable_set
from ..sensing import FusedEstimate, sample_cues, sample_gps, sample_imu
from ..sensing import fuse_predict, fuse_update
from ..world import (
    KinematicState,
    Maneuver,
    ModeLimits,
    TransportMode,
    default_limits,
    maneuver_to_control,
    step,
)
from .metrics import RunMetrics, TraceWriter, write_summary, TRACE_NAME
from .scenario import (
    AgentSpec,
    CUE_PERIOD_S,
    GPS_PERIOD_S,
    IMU_PERIOD_S,
    REACH_PERIOD_S,
    Scenario,
)

COORD_PERIOD_MS = 100  # 10 Hz coordinator processing tick
INIT_POS_STD = 1.4  # m, near the fusion steady state for default GPS noise
INIT_SPEED_STD = 0.5  # m/s

COORD_DEST = "coord"


class SimFault(Exception):
    """Runtime fault (codec or range violation) that aborts the run."""


@dataclass(frozen=True)
class Delivery:
    dest: object  # COORD_DEST or an agent id
    data: bytes
    channel: ChannelKind
    sent_ms: float


@dataclass
class _AdvisoryState:
    action: Maneuver
    activate_ms: float
    expiry_ms: float
    t_conflict_ms: int
    separation_cm: int
    issued_at_ms: int


class AgentRuntime:
    """Mutable per-agent simulation state and pipeline."""

    def __init__(self, spec: AgentSpec, seed: int, spoof_anchor: tuple[float, float]):
        self.spec = spec
        self.limits: ModeLimits = spec.limits or default_limits(spec.mode)
        self.truth: KinematicState = spec.start
        self.est = FusedEstimate(time=0.0, mean=spec.start,
                                 pos_std=INIT_POS_STD, speed_std=INIT_SPEED_STD)
        self.rng_gps = rngmod.stream(seed, spec.id, "gps")
        self.rng_imu = rngmod.stream(seed, spec.id, "imu")
        self.rng_cue = rngmod.stream(seed, spec.id, "cue")
        self.rng_comply = rngmod.stream(seed, spec.id, "comply")
        self.rng_channel = rngmod.stream(seed, spec.id, "channel")
        self.seq = 0
        window_len = max(1, round(W_CUE_DEFAULT / CUE_PERIOD_S))
        self.cues = deque(maxlen=window_len)
        self.pending: Optional[_AdvisoryState] = None
        self.active: Optional[_AdvisoryState] = None
        self.spoof_anchor = spoof_anchor  # claimed-teleport target zone
        self.spoof_idx = 0

    # -- maneuver scheduling -------------------------------------------------

    def scripted_maneuver(self, t_s: float) -> Maneuver:
        current = self.spec.timeline[0][1]
        for start, m in self.spec.timeline:
            if start <= t_s + 1e-9:
                current = m
            else:
                break
        return current

    def refresh_advisory(self, t_ms: float) -> None:
        if self.pending is not None and t_ms >= self.pending.activate_ms:
            self.active = self.pending
            self.pending = None
        if self.active is not None and t_ms >= self.active.expiry_ms:
            self.active = None

    def current_maneuver(self, t_ms: float) -> Maneuver:
        if self.active is not None and t_ms < self.active.expiry_ms:
            return self.active.action
        return self.scripted_maneuver(t_ms / 1000.0)

    def cue_context(self, t_ms: float) -> tuple[Maneuver, float]:
        """Maneuver to signal plus its lead time (0 while it is active)."""
        active = self.current_maneuver(t_ms)
        if active is not Maneuver.MAINTAIN_COURSE:
            return active, 0.0
        t_s = t_ms / 1000.0
        for start, m in self.spec.timeline:
            if start > t_s + 1e-9:
                return m, start - t_s
        return Maneuver.MAINTAIN_COURSE, 0.0

    def gaze_at(self, t_ms: float) -> bool:
        t_s = t_ms / 1000.0
        return any(lo <= t_s <= hi for lo, hi in self.spec.gaze)

    # -- uplink channel hint ---------------------------------------------------

    def imminence(self, t_ms: float) -> tuple[Optional[float], float]:
        """(time-to-conflict, peer distance) as known from the live advisory."""
        adv = self.active or self.pending
        if adv is None:
            return None, 0.0
        elapsed_s = max(0.0, (t_ms - adv.issued_at_ms) / 1000.0)
        t_conf = max(0.0, adv.t_conflict_ms / 1000.0 - elapsed_s)
        return t_conf, adv.separation_cm / 100.0

    # -- spoofed claims ---------------------------------------------------------

    def spoof_claim(self, t_ms: float) -> KinematicState:
        """Claimed state for a spoofing agent: an outward teleport spiral.

        Claims circle the honest agents' corridor at radius 250 + 20k m, so
        any two claims are at least 20 m apart per broadcast gap, more than
        a pedestrian's plausibility envelope can cover. Whichever claim is
        delivered first (frames can be lost) is accepted as the no-history
        baseline but sits too far out to conflict with anyone; every later
        claim then reads as a teleport.
        """
        k = self.spoof_idx
        self.spoof_idx += 1
        ang = (k + 1) * 2.39996322972865332  # golden angle, offset off the lane axis
        radius = 250.0 + 20.0 * k
        return KinematicState(
            x=self.spoof_anchor[0] + radius * math.cos(ang),
            y=self.spoof_anchor[1] + radius * math.sin(ang),
            heading=ang, speed=0.5,
        )


class Simulation:
    """One deterministic run of one scenario."""

    def __init__(self, scenario: Scenario, out_dir: str | Path,
                 channel_profile_name: Optional[str] = None,
                 disable_advisories: bool = False,
                 disable_plausibility: bool = False,
                 dump_coordinator: bool = False):
        self.scenario = scenario
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.tick_ms = round(scenario.tick * 1000.0)
        self.duration_ms = round(scenario.duration * 1000.0)
        self.gps_every = round(GPS_PERIOD_S / scenario.tick)
        self.cue_every = round(CUE_PERIOD_S / scenario.tick)
        self.imu_every = round(IMU_PERIOD_S / scenario.tick)
        self.reach_every = round(REACH_PERIOD_S / scenario.tick)

        profile = channel_profile_name or scenario.channel_profile
        self.policy: ChannelPolicy = channel_profile(
            profile, tau_imminent_s=scenario.thresholds.tau_imminent)

        self.estimator = RuleBasedIntentEstimator()
        seed = scenario.seed
        others_mean = self._anchor_for_spoofers()
        self.agents = {
            spec.id: AgentRuntime(spec, seed, others_mean) for spec in scenario.agents
        }
        self.order = sorted(self.agents)

        advisories_on = scenario.toggles.advisories and not disable_advisories
        plausibility_on = scenario.toggles.plausibility_filter and not disable_plausibility
        cfg = CoordinatorConfig(
            p_min=scenario.thresholds.p_min,
            tau_imminent_s=scenario.thresholds.tau_imminent,
            t_grace_s=scenario.thresholds.t_grace,
            horizon_s=scenario.thresholds.horizon,
            advisories_enabled=advisories_on,
            plausibility_enabled=plausibility_on,
            gaze_suppression=scenario.toggles.gaze_suppression,
        )
        self.coordinator = Coordinator(
            cfg,
            limits_for=self._limits_for_mode,
            gaze_lookup=self._gaze_lookup,
        )
        self.rng_coord_channel = rngmod.stream(seed, COORD_DEST, "channel")
        self.queue = EventQueue()
        self.metrics = RunMetrics(seed=seed, scenario=scenario.name,
                                  duration_s=scenario.duration)
        self.dump_coordinator = dump_coordinator
        self._dump_fh = None
        self._now_ms = 0.0
        self._tick_index = 0
        self._overlapping: set[tuple[int, int]] = set()

    # -- helpers -----------------------------------------------------------

    def _anchor_for_spoofers(self) -> tuple[float, float]:
        honest = [a for a in self.scenario.agents if not a.spoof]
        if not honest:
            return (0.0, 0.0)
        return (
            sum(a.start.x for a in honest) / len(honest),
            sum(a.start.y for a in honest) / len(honest),
        )

    def _limits_for_mode(self, mode: TransportMode) -> ModeLimits:
        return default_limits(mode)

    def _gaze_lookup(self, agent_id: int) -> bool:
        agent = self.agents.get(agent_id)
        return agent.gaze_at(self._now_ms) if agent is not None else False

    # -- main loop -----------------------------------------------------------

    def run(self) -> RunMetrics:
        trace = TraceWriter(self.out_dir / TRACE_NAME)
        trace.write({
            "k": "meta", "t": 0, "seed": self.scenario.seed,
            "scenario": self.scenario.name, "duration_s": self.scenario.duration,
            "channel_profile": self.scenario.channel_profile,
            "agents": [a.id for a in self.scenario.agents],
        })
        if self.dump_coordinator:
            self._dump_fh = open(self.out_dir / "coordinator_state.jsonl", "w",
                                 encoding="utf-8")
        try:
            if self.duration_ms >= self.tick_ms:
                self.queue.schedule(float(self.tick_ms), "tick", 1)
                self.queue.schedule(float(COORD_PERIOD_MS), "coord", None)
            while self.queue:
                ev = self.queue.pop()
                self._now_ms = ev.due_ms
                if ev.kind == "tick":
                    if ev.due_ms > self.duration_ms:
                        continue
                    self._world_tick(ev.due_ms, ev.payload, trace)
                    nxt = (ev.payload + 1) * self.tick_ms
                    if nxt <= self.duration_ms:
                        self.queue.schedule(float(nxt), "tick", ev.payload + 1)
                elif ev.kind == "coord":
                    if ev.due_ms > self.duration_ms:
                        continue
                    self._coord_tick(ev.due_ms, trace)
                    nxt = ev.due_ms + COORD_PERIOD_MS
                    if nxt <= self.duration_ms:
                        self.queue.schedule(nxt, "coord", None)
                elif ev.kind == "delivery":
                    self._handle_delivery(ev.due_ms, ev.payload, trace)
        finally:
            if self._dump_fh is not None:
                self._dump_fh.close()
            self.metrics.finalize_derived()
            self.metrics.trace_sha256 = trace.close()
        write_summary(self.out_dir, self.metrics)
        return self.metrics

    # -- world tick ------------------------------------------------------------

    def _world_tick(self, t_ms: float, tick_index: int, trace: TraceWriter) -> None:
        tick_s = self.tick_ms / 1000.0
        for aid in self.order:
            agent = self.agents[aid]
            t_prev = t_ms - self.tick_ms
            agent.refresh_advisory(t_prev)
            maneuver = agent.current_maneuver(t_prev)
            control = maneuver_to_control(maneuver, agent.truth, agent.limits)
            agent.truth = step(agent.truth, control, agent.limits, tick_s)
            trace.write({
                "k": "truth", "t": t_ms, "agent": aid,
                "x": round(agent.truth.x, 9), "y": round(agent.truth.y, 9),
                "heading": round(agent.truth.heading, 9),
                "speed": round(agent.truth.speed, 9),
                "maneuver": maneuver.name.lower(),
            })

            sensors = agent.spec.sensors
            if tick_index % self.imu_every == 0:
                imu = sample_imu(
                    t_ms / 1000.0, agent.truth.accel, agent.truth.yaw_rate,
                    sensors.sigma_imu, agent.rng_imu,
                    accel_bias=sensors.accel_bias, yaw_rate_bias=sensors.yaw_rate_bias)
                agent.est = fuse_predict(agent.est, imu, tick_s, agent.limits)
            if tick_index % self.gps_every == 0:
                fix = sample_gps(t_ms / 1000.0, agent.truth, sensors.sigma_gps,
                                 agent.rng_gps)
                agent.est = fuse_update(agent.est, fix, sensors.sigma_gps)
            if tick_index % self.cue_every == 0:
                cue_m, lead = agent.cue_context(t_ms)
                cue = sample_cues(t_ms / 1000.0, cue_m, lead, agent.rng_cue,
                                  sigma_cue=sensors.sigma_cue,
                                  gaze_covers_conflict=agent.gaze_at(t_ms))
                agent.cues.append(cue)
            trace.write({
                "k": "est", "t": t_ms, "agent": aid,
                "x": round(agent.est.mean.x, 9), "y": round(agent.est.mean.y, 9),
                "speed": round(agent.est.mean.speed, 9),
                "pos_std": round(agent.est.pos_std, 9),
            })

            if (tick_index - 1) % self.reach_every == 0:
                self._broadcast(agent, t_ms, trace)

        self._collision_check(t_ms, trace)

    def _broadcast(self, agent: AgentRuntime, t_ms: float, trace: TraceWriter) -> None:
        window = CueWindow(tuple(agent.cues))
        intent = self.estimator.estimate(window, agent.est)
        if agent.spec.spoof:
            claimed = agent.spoof_claim(t_ms)
            est = FusedEstimate(time=agent.est.time, mean=claimed,
                                pos_std=INIT_POS_STD, speed_std=INIT_SPEED_STD)
        else:
            est = agent.est
        reach = compute_reachable_set(
            agent.spec.id, est, intent, agent.limits,
            horizon=self.scenario.thresholds.horizon)
        bsm = Bsm(sender=agent.spec.id, seq=agent.seq, timestamp_ms=int(t_ms),
                  state=est.mean, mode=agent.spec.mode, intent=intent, reach=reach)
        agent.seq += 1
        try:
            frame = encode_bsm(bsm)
        except WireError as e:
            raise SimFault(f"agent {agent.spec.id} produced an unencodable "
                           f"safety message at t={t_ms}ms: {e}") from e

        t_conf, distance = agent.imminence(t_ms)
        kind = select_channel(t_conf, distance, self.policy)
        channel = self.policy.channel(kind)
        payload = Delivery(dest=COORD_DEST, data=frame, channel=kind, sent_ms=t_ms)
        ev = transmit(self.queue, payload, channel, t_ms, agent.rng_channel)
        dropped = ev is None
        ch = self.metrics.channel(kind.value)
        ch.sent += 1
        self.metrics.bsm_sent += 1
        self.metrics.bytes_sent += len(frame)
        if dropped:
            ch.dropped += 1
            self.metrics.bsm_dropped += 1
        trace.write({
            "k": "bsm_sent", "t": t_ms, "agent": agent.spec.id, "seq": bsm.seq,
            "channel": kind.value, "bytes": len(frame), "dropped": dropped,
        })

    def _collision_check(self, t_ms: float, trace: TraceWriter) -> None:
        for i in range(len(self.order)):
            for j in range(i + 1, len(self.order)):
                a, b = self.order[i], self.order[j]
                ra = self.agents[a].limits.footprint_radius
                rb = self.agents[b].limits.footprint_radius
                sa, sb = self.agents[a].truth, self.agents[b].truth
                sep = math.hypot(sa.x - sb.x, sa.y - sb.y)
                key = f"{a}-{b}"
                prev = self.metrics.pair_min_sep.get(key)
                if prev is None or sep < prev:
                    self.metrics.pair_min_sep[key] = sep
                overlapping = sep < ra + rb
                was = (a, b) in self._overlapping
                if overlapping and not was:
                    self._overlapping.add((a, b))
                    self.metrics.collision_events.append(
                        {"t_ms": t_ms, "pair": [a, b]})
                    trace.write({"k": "collision", "t": t_ms, "pair": [a, b],
                                 "sep": round(sep, 6)})
                elif not overlapping and was:
                    self._overlapping.discard((a, b))

    # -- coordinator tick -------------------------------------------------------

    def _coord_tick(self, t_ms: float, trace: TraceWriter) -> None:
        result = self.coordinator.tick(t_ms)
        for c in result.conflicts:
            self.metrics.conflict_events += 1
            trace.write({
                "k": "conflict", "t": t_ms, "a": c.agent_a, "b": c.agent_b,
                "t_first": round(c.t_first, 6), "prob": round(c.prob, 6),
                "sep": round(c.separation_at_t, 6),
            })
        for cid, pair in result.suppressed:
            rec = self.coordinator.records.get(pair)
            if rec is not None and rec.suppressed_ticks == 1:
                self.metrics.informational += 1
                trace.write({"k": "suppressed", "t": t_ms,
                             "conflict_id": f"{cid:016x}", "pair": list(pair)})
        for issue in result.issued:
            self.metrics.advisories_issued += 1
            if issue.is_reversal:
                self.metrics.reversals += 1
            if issue.escalated:
                self.metrics.escalations += 1
            self.metrics.advisory_pairs.append({
                "t_ms": t_ms, "conflict_id": f"{issue.record_id:016x}",
                "pair": list(issue.pair), "reversal": issue.is_reversal,
                "escalated": issue.escalated,
            })
            trace.write({
                "k": "advisory_pair", "t": t_ms,
                "conflict_id": f"{issue.record_id:016x}", "pair": list(issue.pair),
                "reversal": issue.is_reversal, "escalated": issue.escalated,
                "t_conflict_s": round(issue.t_conflict_s, 6),
                "separation_m": round(issue.separation_m, 6),
            })
            kind = select_channel(issue.t_conflict_s, issue.separation_m, self.policy)
            channel = self.policy.channel(kind)
            for adv in issue.advisories:
                frame = encode_advisory(adv)
                send_ms = t_ms + self.coordinator.cfg.handling_ms
                payload = Delivery(dest=adv.target, data=frame, channel=kind,
                                   sent_ms=send_ms)
                ev = transmit(self.queue, payload, channel, send_ms,
                              self.rng_coord_channel)
                dropped = ev is None
                ch = self.metrics.channel(kind.value)
                ch.sent += 1
                self.metrics.advisory_frames += 1
                self.metrics.bytes_sent += len(frame)
                if dropped:
                    ch.dropped += 1
                trace.write({
                    "k": "advisory_sent", "t": t_ms,
                    "conflict_id": f"{adv.conflict_id:016x}", "target": adv.target,
                    "action": adv.action.name.lower(), "reversal": adv.is_reversal,
                    "channel": kind.value, "bytes": len(frame), "dropped": dropped,
                    "expiry_ms": adv.expiry_ms,
                })
        for cid, pair in result.alarms:
            self.metrics.escalations += 1
            trace.write({"k": "alarm", "t": t_ms, "conflict_id": f"{cid:016x}",
                         "pair": list(pair)})
        for cid, pair, reason in result.cleared:
            trace.write({"k": "record_cleared", "t": t_ms,
                         "conflict_id": f"{cid:016x}", "pair": list(pair),
                         "reason": reason})
        if self._dump_fh is not None:
            import json as _json
            self._dump_fh.write(
                _json.dumps(self.coordinator.state_dump(t_ms), sort_keys=True,
                            separators=(",", ":")) + "\n")

    # -- deliveries ---------------------------------------------------------------

    def _handle_delivery(self, t_ms: float, payload: Delivery, trace: TraceWriter) -> None:
        latency = t_ms - payload.sent_ms
        ch = self.metrics.channel(payload.channel.value)
        ch.delivered += 1
        ch.latencies_ms.append(latency)
        if payload.dest == COORD_DEST:
            try:
                result = self.coordinator.ingest(payload.data, t_ms)
            except WireError as e:
                raise SimFault(f"coordinator received a corrupt frame: {e}") from e
            self.metrics.bsm_delivered += 1
            if not result.accepted:
                self.metrics.bsm_rejected += 1
                self.metrics.rejected_by_reason[result.reject_reason] = \
                    self.metrics.rejected_by_reason.get(result.reject_reason, 0) + 1
            trace.write({
                "k": "bsm_delivered", "t": t_ms, "agent": result.sender,
                "seq": result.seq, "channel": payload.channel.value,
                "latency_ms": round(latency, 6), "accepted": result.accepted,
                "reject_reason": result.reject_reason,
            })
        else:
            try:
                adv = decode_advisory(payload.data)
            except WireError as e:
                raise SimFault(f"agent {payload.dest} received a corrupt advisory: {e}") from e
            self.metrics.advisory_latencies_ms.setdefault(
                payload.channel.value, []).append(latency)
            agent = self.agents[payload.dest]
            complied = bool(agent.rng_comply.random() < agent.spec.compliance_prob)
            if complied:
                agent.pending = _AdvisoryState(
                    action=adv.action,
                    activate_ms=t_ms + agent.spec.reaction_delay * 1000.0,
                    expiry_ms=float(adv.expiry_ms),
                    t_conflict_ms=adv.t_conflict_ms,
                    separation_cm=adv.separation_cm,
                    issued_at_ms=adv.issued_at_ms,
                )
            trace.write({
                "k": "advisory_delivered", "t": t_ms, "target": adv.target,
                "conflict_id": f"{adv.conflict_id:016x}",
                "action": adv.action.name.lower(), "reversal": adv.is_reversal,
                "channel": payload.channel.value, "latency_ms": round(latency, 6),
                "complied": complied,
            })


def run_scenario(scenario: Scenario, out_dir: str | Path, **kwargs) -> RunMetrics:
    """Convenience wrapper: build, run and summarize one simulation."""
    return Simulation(scenario, out_dir, **kwargs).run()
