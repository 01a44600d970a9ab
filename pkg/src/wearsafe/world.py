"""Transport modes, kinematic state and the shared ground-truth motion model.

All four road-user classes move under one planar unicycle model; the
differences between a pedestrian and a car live entirely in the per-mode
limit table (``default_limits``). The integrator is exact for piecewise
constant controls: position follows the closed-form solution of

    x' = v(t) cos(theta0 + w t),   y' = v(t) sin(theta0 + w t),
    v(t) = clamp(v0 + a t, 0, v_max)

so composing two half steps reproduces one full step bit-for-bit whenever
the speed never saturates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from importlib import resources

TWO_PI = 2.0 * math.pi

# Yaw rates below this integrate as straight-line motion; arc and line
# solutions differ by well under 1e-6 m there for any admissible speed.
OMEGA_EPS = 1e-8

# Turn intents command half the mode's yaw-rate budget: a deliberate route
# change, not a limit maneuver.
KAPPA_TURN = 0.5


def wrap_angle(theta: float) -> float:
    """Normalize an angle to [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


class TransportMode(IntEnum):
    """Road-user class; the integer value is the wire encoding."""

    PEDESTRIAN = 0
    BICYCLE = 1
    MOTORCYCLE = 2
    CAR = 3

    @property
    def vulnerability(self) -> int:
        """Rank with pedestrians highest; motorized traffic yields to higher ranks."""
        return 3 - int(self)

    @classmethod
    def from_name(cls, name: str) -> "TransportMode":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown transport mode: {name!r}") from None


class Maneuver(IntEnum):
    """Discrete intent vocabulary; the integer value fixes serialization order."""

    MAINTAIN_COURSE = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    BRAKE = 3
    ACCELERATE = 4

    @classmethod
    def from_name(cls, name: str) -> "Maneuver":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown maneuver: {name!r}") from None


MANEUVERS = tuple(Maneuver)


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class KinematicState:
    """Planar state of one agent in the local frame."""

    x: float  # m
    y: float  # m
    heading: float  # rad, normalized to [-pi, pi)
    speed: float  # m/s, >= 0
    yaw_rate: float = 0.0  # rad/s
    accel: float = 0.0  # m/s^2, signed, along heading

    def __post_init__(self):
        for name in ("x", "y", "heading", "speed", "yaw_rate", "accel"):
            _require_finite(name, getattr(self, name))
        if self.speed < 0.0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.speed * math.cos(self.heading), self.speed * math.sin(self.heading))


@dataclass(frozen=True)
class ModeLimits:
    """Kinematic envelope of one transport mode."""

    v_max: float  # m/s
    a_max: float  # m/s^2
    a_min: float  # m/s^2, max braking, negative
    yaw_rate_max: float  # rad/s
    footprint_radius: float  # m

    def __post_init__(self):
        for name in ("v_max", "a_max", "a_min", "yaw_rate_max", "footprint_radius"):
            _require_finite(name, getattr(self, name))
        if self.v_max <= 0 or self.a_max <= 0 or self.yaw_rate_max <= 0 or self.footprint_radius <= 0:
            raise ValueError("v_max, a_max, yaw_rate_max, footprint_radius must be > 0")
        if self.a_min >= 0:
            raise ValueError(f"a_min must be < 0, got {self.a_min}")


@dataclass(frozen=True)
class ControlInput:
    """Commanded acceleration and yaw rate for one step."""

    accel_cmd: float  # m/s^2
    yaw_rate_cmd: float  # rad/s

    def __post_init__(self):
        _require_finite("accel_cmd", self.accel_cmd)
        _require_finite("yaw_rate_cmd", self.yaw_rate_cmd)


@lru_cache(maxsize=1)
def _limits_table() -> dict:
    text = resources.files("wearsafe.data").joinpath("mode_limits.json").read_text("utf-8")
    raw = json.loads(text)
    table = {}
    for mode in TransportMode:
        row = raw[mode.name.lower()]
        table[mode] = ModeLimits(
            v_max=float(row["v_max"]),
            a_max=float(row["a_max"]),
            a_min=float(row["a_min"]),
            yaw_rate_max=float(row["yaw_rate_max"]),
            footprint_radius=float(row["footprint_radius"]),
        )
    return table


def default_limits(mode: TransportMode) -> ModeLimits:
    """Return the frozen per-mode limit table entry (see data/mode_limits.json)."""
    return _limits_table()[mode]


def maneuver_to_control(m: Maneuver, state: KinematicState, limits: ModeLimits) -> ControlInput:
    """Map a discrete maneuver to the control it commands under the given limits.

    Total over the maneuver vocabulary; ``state`` is part of the interface so
    that richer policies (e.g. speed-dependent turn rates) can slot in.
    """
    if m is Maneuver.MAINTAIN_COURSE:
        return ControlInput(0.0, 0.0)
    if m is Maneuver.BRAKE:
        return ControlInput(limits.a_min, 0.0)
    if m is Maneuver.ACCELERATE:
        return ControlInput(limits.a_max, 0.0)
    if m is Maneuver.TURN_LEFT:
        return ControlInput(0.0, +limits.yaw_rate_max * KAPPA_TURN)
    if m is Maneuver.TURN_RIGHT:
        return ControlInput(0.0, -limits.yaw_rate_max * KAPPA_TURN)
    raise ValueError(f"unknown maneuver: {m!r}")


def _clamp(value: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, value))


def _advance(x, y, theta, v, a, w, tau):
    # Exact solution for constant (a, w) with v staying inside its bounds
    # over the whole sub-interval [0, tau].
    theta1 = theta + w * tau
    v1 = v + a * tau
    if abs(w) < OMEGA_EPS:
        s = v * tau + 0.5 * a * tau * tau
        return x + s * math.cos(theta), y + s * math.sin(theta), theta1, v1
    x1 = x + (v1 * math.sin(theta1) - v * math.sin(theta)) / w \
        + (a / (w * w)) * (math.cos(theta1) - math.cos(theta))
    y1 = y - (v1 * math.cos(theta1) - v * math.cos(theta)) / w \
        + (a / (w * w)) * (math.sin(theta1) - math.sin(theta))
    return x1, y1, theta1, v1


def step(state: KinematicState, u: ControlInput, limits: ModeLimits, dt: float) -> KinematicState:
    """Advance one agent by dt under constant controls, exactly.

    Controls are clamped to the mode envelope; speed saturates at 0 and
    v_max (no reverse motion). When the speed hits a bound inside the step
    the trajectory is integrated piecewise, so the update stays exact.
    """
    if not isinstance(dt, (int, float)) or not math.isfinite(dt) or dt <= 0.0:
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")

    a = _clamp(u.accel_cmd, limits.a_min, limits.a_max)
    w = _clamp(u.yaw_rate_cmd, -limits.yaw_rate_max, limits.yaw_rate_max)

    x, y, theta, v = state.x, state.y, state.heading, state.speed
    remaining = float(dt)
    while remaining > 1e-15:
        if a > 0.0 and v < limits.v_max:
            t_hit = (limits.v_max - v) / a
        elif a < 0.0 and v > 0.0:
            t_hit = -v / a
        else:
            t_hit = math.inf

        if t_hit <= 1e-15:
            # Already pinned at a bound the control pushes against.
            x, y, theta, v = _advance(x, y, theta, v, 0.0, w, remaining)
            remaining = 0.0
        elif t_hit >= remaining:
            x, y, theta, v = _advance(x, y, theta, v, a, w, remaining)
            remaining = 0.0
        else:
            x, y, theta, v = _advance(x, y, theta, v, a, w, t_hit)
            v = limits.v_max if a > 0.0 else 0.0  # land exactly on the bound
            remaining -= t_hit

    v = _clamp(v, 0.0, limits.v_max)
    return KinematicState(x=x, y=y, heading=wrap_angle(theta), speed=v, yaw_rate=w, accel=a)
