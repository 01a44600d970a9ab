"""Deterministic wearable-network traffic-safety simulator and library.

Subsystems: ``world`` (modes, motion model), ``sensing`` (sensor simulation
and fusion), ``intent`` (maneuver probabilities from body cues),
``reachset`` (intent-conditioned occupancy prediction and conflict
scanning), ``netsim`` (wire protocol, channels, event queue),
``coordinator`` (centralized detection/resolution with reversals) and
``harness`` (scenarios, the end-to-end loop, metrics, CLI).
"""

__version__ = "0.1.0"

from .world import (  # noqa: F401
    ControlInput,
    KinematicState,
    Maneuver,
    ModeLimits,
    TransportMode,
    default_limits,
    maneuver_to_control,
    step,
)
