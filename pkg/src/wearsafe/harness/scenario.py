"""Scenario schema: strict JSON loading with field-path diagnostics.

A scenario pins everything a run needs: master seed, duration, the agent
roster with scripted maneuver timelines and sensor overrides, channel
profile and policy thresholds, plus feature toggles. Unknown fields are
rejected so an experiment file can't silently drift from what the code
actually reads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from ..world import KinematicState, Maneuver, ModeLimits, TransportMode

SCHEMA_VERSION = 1

TICK_DEFAULT_S = 0.1
# Sensor and pipeline cadences; the tick must divide all of them.
GPS_PERIOD_S = 1.0
IMU_PERIOD_S = 0.1
CUE_PERIOD_S = 0.1
REACH_PERIOD_S = 0.5


class ScenarioError(Exception):
    """Schema violation, reported with the offending field path."""


@dataclass(frozen=True)
class SensorParams:
    sigma_gps: float = 3.0  # m
    sigma_imu: float = 0.01  # shared accel / yaw-rate noise
    accel_bias: float = 0.0  # m/s^2
    yaw_rate_bias: float = 0.0  # rad/s
    sigma_cue: float = 0.005


@dataclass(frozen=True)
class Thresholds:
    tau_imminent: float = 3.0  # s
    p_min: float = 0.05
    t_grace: float = 1.0  # s
    horizon: float = 6.0  # s


@dataclass(frozen=True)
class Toggles:
    advisories: bool = True
    plausibility_filter: bool = True
    gaze_suppression: bool = True


@dataclass(frozen=True)
class AgentSpec:
    id: int
    mode: TransportMode
    start: KinematicState
    timeline: tuple[tuple[float, Maneuver], ...] = ((0.0, Maneuver.MAINTAIN_COURSE),)
    compliance_prob: float = 1.0
    reaction_delay: float = 0.25  # s
    sensors: SensorParams = field(default_factory=SensorParams)
    spoof: bool = False
    gaze: tuple[tuple[float, float], ...] = ()  # intervals with eyes on the conflict
    limits: Optional[ModeLimits] = None  # per-agent override of the mode table


@dataclass(frozen=True)
class Scenario:
    seed: int
    duration: float  # s
    agents: tuple[AgentSpec, ...]
    tick: float = TICK_DEFAULT_S
    channel_profile: str = "default"
    thresholds: Thresholds = field(default_factory=Thresholds)
    toggles: Toggles = field(default_factory=Toggles)
    name: str = ""


def _fail(path: str, message: str) -> "NoReturn":  # noqa: F821
    raise ScenarioError(f"{path}: {message}")


def _expect_object(obj: Any, path: str, allowed: set[str], required: set[str]) -> dict:
    if not isinstance(obj, dict):
        _fail(path, f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        _fail(path, f"unknown fields {sorted(unknown)} (allowed: {sorted(allowed)})")
    missing = required - set(obj)
    if missing:
        _fail(path, f"missing required fields {sorted(missing)}")
    return obj


def _number(obj: dict, key: str, path: str, default=None, lo=None, hi=None) -> float:
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(f"{path}.{key}", f"expected a finite number, got {v!r}")
    if lo is not None and v < lo:
        _fail(f"{path}.{key}", f"must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        _fail(f"{path}.{key}", f"must be <= {hi}, got {v}")
    return float(v)


def _integer(obj: dict, key: str, path: str, default=None, lo=None) -> int:
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{path}.{key}", f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        _fail(f"{path}.{key}", f"must be >= {lo}, got {v}")
    return v


def _boolean(obj: dict, key: str, path: str, default: bool) -> bool:
    if key not in obj:
        return default
    v = obj[key]
    if not isinstance(v, bool):
        _fail(f"{path}.{key}", f"expected a boolean, got {v!r}")
    return v


def _parse_limits(obj: Any, path: str) -> ModeLimits:
    allowed = {"v_max", "a_max", "a_min", "yaw_rate_max", "footprint_radius"}
    o = _expect_object(obj, path, allowed, allowed)
    try:
        return ModeLimits(
            v_max=_number(o, "v_max", path),
            a_max=_number(o, "a_max", path),
            a_min=_number(o, "a_min", path),
            yaw_rate_max=_number(o, "yaw_rate_max", path),
            footprint_radius=_number(o, "footprint_radius", path),
        )
    except ValueError as e:
        _fail(path, str(e))


def _parse_agent(obj: Any, path: str) -> AgentSpec:
    allowed = {"id", "mode", "start", "timeline", "compliance_prob", "reaction_delay",
               "sensors", "spoof", "gaze", "limits"}
    o = _expect_object(obj, path, allowed, {"id", "mode", "start"})

    agent_id = _integer(o, "id", path, lo=0)
    if agent_id > 0xFFFFFFFF:
        _fail(f"{path}.id", "must fit in 32 bits")

    if not isinstance(o["mode"], str):
        _fail(f"{path}.mode", f"expected a string, got {o['mode']!r}")
    try:
        mode = TransportMode.from_name(o["mode"])
    except ValueError as e:
        _fail(f"{path}.mode", str(e))

    s = _expect_object(o["start"], f"{path}.start",
                       {"x", "y", "heading", "speed"}, {"x", "y"})
    try:
        start = KinematicState(
            x=_number(s, "x", f"{path}.start"),
            y=_number(s, "y", f"{path}.start"),
            heading=_number(s, "heading", f"{path}.start", default=0.0),
            speed=_number(s, "speed", f"{path}.start", default=0.0, lo=0.0),
        )
    except ValueError as e:
        _fail(f"{path}.start", str(e))

    timeline: list[tuple[float, Maneuver]] = [(0.0, Maneuver.MAINTAIN_COURSE)]
    if "timeline" in o:
        if not isinstance(o["timeline"], list) or not o["timeline"]:
            _fail(f"{path}.timeline", "expected a non-empty array")
        timeline = []
        last_t = -math.inf
        for i, entry in enumerate(o["timeline"]):
            epath = f"{path}.timeline[{i}]"
            if (not isinstance(entry, list) or len(entry) != 2
                    or isinstance(entry[0], bool)
                    or not isinstance(entry[0], (int, float))
                    or not isinstance(entry[1], str)):
                _fail(epath, f"expected [time, maneuver-name], got {entry!r}")
            t = float(entry[0])
            if not math.isfinite(t) or t < 0.0:
                _fail(epath, f"time must be finite and >= 0, got {t}")
            if t <= last_t:
                _fail(epath, f"times must be strictly increasing, got {t} after {last_t}")
            last_t = t
            try:
                m = Maneuver.from_name(entry[1])
            except ValueError as e:
                _fail(epath, str(e))
            timeline.append((t, m))
        if timeline[0][0] != 0.0:
            timeline.insert(0, (0.0, Maneuver.MAINTAIN_COURSE))

    sensors = SensorParams()
    if "sensors" in o:
        sp = f"{path}.sensors"
        so = _expect_object(o["sensors"], sp,
                            {"sigma_gps", "sigma_imu", "accel_bias", "yaw_rate_bias",
                             "sigma_cue"}, set())
        sensors = SensorParams(
            sigma_gps=_number(so, "sigma_gps", sp, default=3.0, lo=0.0),
            sigma_imu=_number(so, "sigma_imu", sp, default=0.01, lo=0.0),
            accel_bias=_number(so, "accel_bias", sp, default=0.0),
            yaw_rate_bias=_number(so, "yaw_rate_bias", sp, default=0.0),
            sigma_cue=_number(so, "sigma_cue", sp, default=0.005, lo=0.0),
        )

    gaze: list[tuple[float, float]] = []
    if "gaze" in o:
        if not isinstance(o["gaze"], list):
            _fail(f"{path}.gaze", "expected an array of [start, end] intervals")
        for i, iv in enumerate(o["gaze"]):
            ipath = f"{path}.gaze[{i}]"
            if (not isinstance(iv, list) or len(iv) != 2
                    or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in iv)):
                _fail(ipath, f"expected [start, end], got {iv!r}")
            lo_t, hi_t = float(iv[0]), float(iv[1])
            if not (0.0 <= lo_t < hi_t):
                _fail(ipath, f"need 0 <= start < end, got {iv!r}")
            gaze.append((lo_t, hi_t))

    return AgentSpec(
        id=agent_id,
        mode=mode,
        start=start,
        timeline=tuple(timeline),
        compliance_prob=_number(o, "compliance_prob", path, default=1.0, lo=0.0, hi=1.0),
        reaction_delay=_number(o, "reaction_delay", path, default=0.25, lo=0.0),
        sensors=sensors,
        spoof=_boolean(o, "spoof", path, default=False),
        gaze=tuple(gaze),
        limits=_parse_limits(o["limits"], f"{path}.limits") if "limits" in o else None,
    )


def parse_scenario(obj: Any, source: str = "<scenario>") -> Scenario:
    allowed = {"schema_version", "seed", "duration", "tick", "agents",
               "channel_profile", "thresholds", "toggles", "name"}
    o = _expect_object(obj, source, allowed, {"schema_version", "seed", "duration", "agents"})

    version = _integer(o, "schema_version", source)
    if version != SCHEMA_VERSION:
        _fail(f"{source}.schema_version", f"expected {SCHEMA_VERSION}, got {version}")

    seed = _integer(o, "seed", source, lo=0)
    if seed > 0xFFFFFFFFFFFFFFFF:
        _fail(f"{source}.seed", "must fit in 64 bits")
    duration = _number(o, "duration", source, lo=0.0)
    tick = _number(o, "tick", source, default=TICK_DEFAULT_S, lo=1e-3)

    for period, what in ((GPS_PERIOD_S, "GPS"), (IMU_PERIOD_S, "IMU"),
                         (CUE_PERIOD_S, "cue"), (REACH_PERIOD_S, "reach")):
        ratio = period / tick
        if abs(ratio - round(ratio)) > 1e-9:
            _fail(f"{source}.tick", f"{tick} does not divide the {what} period {period}")

    if not isinstance(o["agents"], list) or not o["agents"]:
        _fail(f"{source}.agents", "expected a non-empty array")
    agents = tuple(_parse_agent(a, f"{source}.agents[{i}]")
                   for i, a in enumerate(o["agents"]))
    ids = [a.id for a in agents]
    if len(set(ids)) != len(ids):
        _fail(f"{source}.agents", f"agent ids must be unique, got {ids}")

    thresholds = Thresholds()
    if "thresholds" in o:
        tp = f"{source}.thresholds"
        to = _expect_object(o["thresholds"], tp,
                            {"tau_imminent", "p_min", "t_grace", "horizon"}, set())
        thresholds = Thresholds(
            tau_imminent=_number(to, "tau_imminent", tp, default=3.0, lo=0.0),
            p_min=_number(to, "p_min", tp, default=0.05, lo=0.0, hi=1.0),
            t_grace=_number(to, "t_grace", tp, default=1.0, lo=0.0),
            horizon=_number(to, "horizon", tp, default=6.0, lo=0.1),
        )

    toggles = Toggles()
    if "toggles" in o:
        gp = f"{source}.toggles"
        go = _expect_object(o["toggles"], gp,
                            {"advisories", "plausibility_filter", "gaze_suppression"}, set())
        toggles = Toggles(
            advisories=_boolean(go, "advisories", gp, default=True),
            plausibility_filter=_boolean(go, "plausibility_filter", gp, default=True),
            gaze_suppression=_boolean(go, "gaze_suppression", gp, default=True),
        )

    name = o.get("name", "")
    if not isinstance(name, str):
        _fail(f"{source}.name", f"expected a string, got {name!r}")

    channel_profile = o.get("channel_profile", "default")
    if not isinstance(channel_profile, str):
        _fail(f"{source}.channel_profile", f"expected a string, got {channel_profile!r}")

    return Scenario(seed=seed, duration=duration, agents=agents, tick=tick,
                    channel_profile=channel_profile, thresholds=thresholds,
                    toggles=toggles, name=name)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text("utf-8")
    except OSError as e:
        raise ScenarioError(f"{path}: cannot read scenario: {e}") from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e
    return parse_scenario(obj, source=str(path))


def scenario_to_dict(sc: Scenario) -> dict:
    """Inverse of parse_scenario, for writing generated scenarios to disk."""
    out: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "seed": sc.seed,
        "duration": sc.duration,
        "tick": sc.tick,
        "channel_profile": sc.channel_profile,
        "thresholds": {
            "tau_imminent": sc.thresholds.tau_imminent,
            "p_min": sc.thresholds.p_min,
            "t_grace": sc.thresholds.t_grace,
            "horizon": sc.thresholds.horizon,
        },
        "toggles": {
            "advisories": sc.toggles.advisories,
            "plausibility_filter": sc.toggles.plausibility_filter,
            "gaze_suppression": sc.toggles.gaze_suppression,
        },
        "agents": [],
    }
    if sc.name:
        out["name"] = sc.name
    for a in sc.agents:
        row: dict[str, Any] = {
            "id": a.id,
            "mode": a.mode.name.lower(),
            "start": {"x": a.start.x, "y": a.start.y,
                      "heading": a.start.heading, "speed": a.start.speed},
            "timeline": [[t, m.name.lower()] for t, m in a.timeline],
            "compliance_prob": a.compliance_prob,
            "reaction_delay": a.reaction_delay,
            "sensors": {
                "sigma_gps": a.sensors.sigma_gps,
                "sigma_imu": a.sensors.sigma_imu,
                "accel_bias": a.sensors.accel_bias,
                "yaw_rate_bias": a.sensors.yaw_rate_bias,
                "sigma_cue": a.sensors.sigma_cue,
            },
            "spoof": a.spoof,
        }
        if a.gaze:
            row["gaze"] = [[lo, hi] for lo, hi in a.gaze]
        if a.limits is not None:
            row["limits"] = {
                "v_max": a.limits.v_max, "a_max": a.limits.a_max,
                "a_min": a.limits.a_min, "yaw_rate_max": a.limits.yaw_rate_max,
                "footprint_radius": a.limits.footprint_radius,
            }
        out["agents"].append(row)
    return out
