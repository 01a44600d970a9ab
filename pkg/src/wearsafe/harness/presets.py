"""Scenario factories for the standard experiment suites.

These builders construct the geometries the acceptance experiments run on:
engineered-collision pairs (head-on and crossing) for the safety benefit
measurement, wide pass-bys for false-positive discipline, close-range
pop-up conflicts for the latency policy, the canonical non-compliance
crossing for reversal logic, and a spoofing third party for the
plausibility filter. Everything is derived deterministically from a master
seed via named streams.
"""

from __future__ import annotations

import math

from .. import rng as rngmod
from ..world import KinematicState, Maneuver, TransportMode, default_limits
from .scenario import AgentSpec, Scenario, SensorParams, Thresholds, Toggles

_COLLISION_MODES = (TransportMode.CAR, TransportMode.BICYCLE)


def _maintain(start: KinematicState, agent_id: int, mode: TransportMode,
              compliance: float = 1.0, reaction: float = 0.25,
              spoof: bool = False) -> AgentSpec:
    return AgentSpec(
        id=agent_id, mode=mode, start=start,
        timeline=((0.0, Maneuver.MAINTAIN_COURSE),),
        compliance_prob=compliance, reaction_delay=reaction, spoof=spoof,
    )


def head_on(seed: int, mode: TransportMode = TransportMode.CAR,
            speed_a: float = 10.0, speed_b: float = 10.0, meet_time: float = 5.0,
            duration: float | None = None, compliance: tuple[float, float] = (1.0, 1.0),
            channel_profile: str = "default", name: str = "") -> Scenario:
    """Two agents on a collision course along the x axis, meeting at the origin."""
    a = _maintain(KinematicState(x=-speed_a * meet_time, y=0.0, heading=0.0, speed=speed_a),
                  1, mode, compliance[0])
    b = _maintain(KinematicState(x=speed_b * meet_time, y=0.0, heading=math.pi, speed=speed_b),
                  2, mode, compliance[1])
    return Scenario(seed=seed, duration=duration or meet_time + 8.0, agents=(a, b),
                    channel_profile=channel_profile, name=name or f"head_on_{seed}")


def crossing(seed: int, mode: TransportMode = TransportMode.CAR,
             speed_a: float = 10.0, speed_b: float = 10.0, meet_time: float = 6.0,
             duration: float | None = None, compliance: tuple[float, float] = (1.0, 1.0),
             channel_profile: str = "default", name: str = "") -> Scenario:
    """Perpendicular paths timed to co-arrive at the origin."""
    a = _maintain(KinematicState(x=-speed_a * meet_time, y=0.0, heading=0.0, speed=speed_a),
                  1, mode, compliance[0])
    b = _maintain(KinematicState(x=0.0, y=-speed_b * meet_time, heading=math.pi / 2.0,
                                 speed=speed_b),
                  2, mode, compliance[1])
    return Scenario(seed=seed, duration=duration or meet_time + 8.0, agents=(a, b),
                    channel_profile=channel_profile, name=name or f"crossing_{seed}")


def passby(seed: int, lateral_gap: float = 16.0, mode: TransportMode = TransportMode.CAR,
           speed: float = 10.0, duration: float = 16.0,
           channel_profile: str = "default", name: str = "") -> Scenario:
    """Opposite-direction passage on parallel lanes; min separation = gap."""
    reach = speed * duration / 2.0
    a = _maintain(KinematicState(x=-reach, y=0.0, heading=0.0, speed=speed), 1, mode)
    b = _maintain(KinematicState(x=reach, y=lateral_gap, heading=math.pi, speed=speed), 2, mode)
    return Scenario(seed=seed, duration=duration, agents=(a, b),
                    channel_profile=channel_profile, name=name or f"passby_{seed}")


def collision_batch(master_seed: int, n: int) -> list[Scenario]:
    """Pairs engineered to collide when nobody intervenes."""
    out = []
    for i in range(n):
        g = rngmod.stream(master_seed, "collision_batch", i)
        mode = _COLLISION_MODES[int(g.integers(0, len(_COLLISION_MODES)))]
        v_hi = default_limits(mode).v_max
        speed_a = float(g.uniform(0.4, 0.7) * v_hi)
        speed_b = float(g.uniform(0.4, 0.7) * v_hi)
        meet = float(g.uniform(5.0, 9.0))
        seed = rngmod.stream_seed(master_seed, "collision_seed", i)
        if g.random() < 0.5:
            sc = head_on(seed, mode, speed_a, speed_b, meet, name=f"collide_{i:03d}")
        else:
            sc = crossing(seed, mode, speed_a, speed_b, meet, name=f"collide_{i:03d}")
        out.append(sc)
    return out


def passby_batch(master_seed: int, n: int, min_gap: float = 18.0,
                 max_gap: float = 30.0) -> list[Scenario]:
    """Non-conflicting pass-bys: baseline min separation is the lateral gap."""
    out = []
    for i in range(n):
        g = rngmod.stream(master_seed, "passby_batch", i)
        mode = _COLLISION_MODES[int(g.integers(0, len(_COLLISION_MODES)))]
        v_hi = default_limits(mode).v_max
        speed = float(g.uniform(0.4, 0.7) * v_hi)
        gap = float(g.uniform(min_gap, max_gap))
        seed = rngmod.stream_seed(master_seed, "passby_seed", i)
        out.append(passby(seed, gap, mode, speed, name=f"passby_{i:03d}"))
    return out


def imminent_batch(master_seed: int, n: int,
                   channel_profile: str = "default") -> list[Scenario]:
    """Close-range pop-up conflicts: imminent from the very first broadcast."""
    out = []
    for i in range(n):
        g = rngmod.stream(master_seed, "imminent_batch", i)
        speed = float(g.uniform(4.0, 5.5))
        gap = float(g.uniform(22.0, 30.0))
        meet = gap / (2.0 * speed)
        seed = rngmod.stream_seed(master_seed, "imminent_seed", i)
        sc = head_on(seed, TransportMode.BICYCLE, speed, speed, meet,
                     duration=meet + 8.0, channel_profile=channel_profile,
                     name=f"imminent_{i:03d}")
        out.append(sc)
    return out


def noncompliance_crossing(seed: int, channel_profile: str = "lossless") -> Scenario:
    """Canonical reversal case: the agent told to brake ignores it.

    A crossing is used so a single reversal fully resolves the encounter:
    the braking duty swaps to the crossing partner, which stops short while
    the defector sails through. The lossless profile isolates reversal
    logic from stochastic frame loss.
    """
    sc = crossing(seed, TransportMode.CAR, 10.0, 10.0, meet_time=6.0,
                  duration=14.0, compliance=(0.0, 1.0),
                  channel_profile=channel_profile, name=f"noncompliance_{seed}")
    return sc


def spoof_scenario(seed: int, spoofing: bool = True,
                   duration: float = 60.0) -> Scenario:
    """Two honest agents on a collision course plus a remote third party.

    With ``spoofing`` the third party teleports its claimed position into
    the honest pair's corridor every broadcast, trying to fabricate
    conflicts; without it the same agent reports its true, distant,
    stationary state. Everything else is identical, so advisory sets of the
    two variants should match exactly when the filter holds.
    """
    base = head_on(seed, TransportMode.CAR, 10.0, 10.0, meet_time=5.0,
                   duration=duration, name=f"spoof_{'on' if spoofing else 'off'}_{seed}")
    spoofer = AgentSpec(
        id=9, mode=TransportMode.PEDESTRIAN,
        start=KinematicState(x=400.0, y=400.0, heading=0.0, speed=0.0),
        timeline=((0.0, Maneuver.MAINTAIN_COURSE),),
        spoof=spoofing,
    )
    return Scenario(seed=base.seed, duration=base.duration,
                    agents=base.agents + (spoofer,),
                    channel_profile=base.channel_profile,
                    thresholds=base.thresholds, toggles=base.toggles,
                    name=base.name)


def determinism_batch(master_seed: int, n: int = 20) -> list[Scenario]:
    """Mixed suite for replay fuzzing."""
    out = []
    for i in range(n):
        kind = i % 4
        seed = rngmod.stream_seed(master_seed, "determinism", i)
        if kind == 0:
            out.append(head_on(seed, meet_time=5.0, name=f"fuzz_{i:02d}"))
        elif kind == 1:
            out.append(crossing(seed, meet_time=6.0, name=f"fuzz_{i:02d}"))
        elif kind == 2:
            out.append(passby(seed, lateral_gap=18.0, name=f"fuzz_{i:02d}"))
        else:
            out.append(spoof_scenario(seed, spoofing=True, duration=12.0))
    return out
