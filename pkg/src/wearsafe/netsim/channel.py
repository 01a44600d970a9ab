"""Latency/loss channel models and imminence-based channel selection.

Two channel classes are modeled: short-range Bluetooth with low latency and
limited range, and a cellular/wide-area class with higher latency and no
range limit. Selection policy: take the low-latency channel exactly when a
conflict is imminent and the peer is in range, fall back to cellular
otherwise. Absolute numbers are profile defaults; behavior relies only on
the ordering (Bluetooth latency well below cellular).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Any, Optional

import numpy as np

from .events import Event, EventQueue

TAU_IMMINENT_DEFAULT = 3.0  # s, lead time below which low latency is mandated


class ChannelKind(str, Enum):
    BLUETOOTH = "bluetooth"
    CELLULAR = "cellular"


@dataclass(frozen=True)
class Channel:
    kind: ChannelKind
    latency_mean_ms: float
    latency_std_ms: float
    latency_floor_ms: float  # > 0; draws are truncated here to stay causal
    loss_prob: float  # in [0, 1)
    range_m: float  # math.inf = unlimited

    def __post_init__(self):
        if self.latency_floor_ms <= 0.0:
            raise ValueError("latency_floor_ms must be > 0")
        if not (0.0 <= self.loss_prob < 1.0):
            raise ValueError(f"loss_prob must be in [0, 1), got {self.loss_prob}")


@dataclass(frozen=True)
class ChannelPolicy:
    """A named pair of channel models plus the selection knobs."""

    bluetooth: Channel
    cellular: Channel
    tau_imminent_s: float = TAU_IMMINENT_DEFAULT
    force_cellular: bool = False

    def channel(self, kind: ChannelKind) -> Channel:
        return self.bluetooth if kind is ChannelKind.BLUETOOTH else self.cellular


def _channel_from_json(kind: ChannelKind, row: dict) -> Channel:
    rng_m = row.get("range_m")
    return Channel(
        kind=kind,
        latency_mean_ms=float(row["latency_mean_ms"]),
        latency_std_ms=float(row["latency_std_ms"]),
        latency_floor_ms=float(row["latency_floor_ms"]),
        loss_prob=float(row["loss_prob"]),
        range_m=math.inf if rng_m is None else float(rng_m),
    )


@lru_cache(maxsize=1)
def _profiles_raw() -> dict:
    text = resources.files("wearsafe.data").joinpath("channel_profiles.json").read_text("utf-8")
    return json.loads(text)


def channel_profile(name: str, tau_imminent_s: float = TAU_IMMINENT_DEFAULT) -> ChannelPolicy:
    """Load a named profile from the shipped asset."""
    raw = _profiles_raw()
    if name not in raw or name.startswith("_"):
        known = sorted(k for k in raw if not k.startswith("_"))
        raise KeyError(f"unknown channel profile {name!r}; known: {known}")
    row = raw[name]
    return ChannelPolicy(
        bluetooth=_channel_from_json(ChannelKind.BLUETOOTH, row["bluetooth"]),
        cellular=_channel_from_json(ChannelKind.CELLULAR, row["cellular"]),
        tau_imminent_s=tau_imminent_s,
        force_cellular=bool(row.get("force_cellular", False)),
    )


def select_channel(t_conflict_s: Optional[float], distance_m: float,
                   policy: ChannelPolicy) -> ChannelKind:
    """Pick Bluetooth iff a conflict is imminent and the peer is in range."""
    if distance_m < 0.0:
        raise ValueError(f"distance must be >= 0, got {distance_m}")
    if policy.force_cellular:
        return ChannelKind.CELLULAR
    if (t_conflict_s is not None
            and t_conflict_s <= policy.tau_imminent_s
            and distance_m <= policy.bluetooth.range_m):
        return ChannelKind.BLUETOOTH
    return ChannelKind.CELLULAR


def transmit(queue: EventQueue, payload: Any, channel: Channel, now_ms: float,
             rng: np.random.Generator) -> Optional[Event]:
    """Schedule a delivery over the channel, or drop it.

    Returns the scheduled delivery event, or None when the message is lost.
    Latency is Gaussian truncated at the channel floor; both draws come from
    the caller's stream so scheduling is reproducible.
    """
    if channel.loss_prob > 0.0 and rng.random() < channel.loss_prob:
        return None
    latency = rng.normal(channel.latency_mean_ms, channel.latency_std_ms)
    latency = max(channel.latency_floor_ms, latency)
    return queue.schedule(now_ms + latency, "delivery", payload)
