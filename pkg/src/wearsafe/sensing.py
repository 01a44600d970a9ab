"""Simulated wearable sensor streams and the state-estimate fusion filter.

GPS fixes, inertial samples and body cues are generated from ground truth
plus configurable noise, each from its own named random stream. Fusion is a
deliberately simple decoupled filter: the mean propagates through the exact
motion model driven by measured controls, positional uncertainty is a single
isotropic standard deviation, and GPS fixes apply a scalar Kalman gain per
axis. That is enough to cancel most of the random GPS error while staying
easy to check against closed forms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources

import numpy as np

from .world import ControlInput, KinematicState, Maneuver, ModeLimits, step

SIGMA_GPS_DEFAULT = 3.0  # m, open-sky single-fix accuracy
# Shared 1-sigma for accel (m/s^2) and yaw rate (rad/s). Heading is never
# corrected by GPS, so gyro noise integrates into an uncorrected heading
# random walk; consumer-MEMS-grade noise keeps the resulting lateral
# prediction error small against the disc inflation.
SIGMA_IMU_DEFAULT = 0.01
# Cue-channel noise is kept well below the cue amplitudes (0.3 / 0.8) so a
# neutral window cannot score a turn anywhere near the conflict-probability
# floor; larger values make idle agents look like occasional turners.
SIGMA_CUE_DEFAULT = 0.005
Q_POS_DEFAULT = 0.5  # m^2/s, positional process-noise intensity
Q_SPEED_DEFAULT = 0.1  # (m/s)^2/s, speed process-noise intensity

# Posterior floor keeping pos_std/speed_std strictly positive even for
# perfect measurements.
_STD_FLOOR = 1e-6


@dataclass(frozen=True)
class GpsFix:
    time: float  # s
    x: float  # m, measured
    y: float  # m, measured


@dataclass(frozen=True)
class ImuSample:
    time: float  # s
    accel_meas: float  # m/s^2, along heading
    yaw_rate_meas: float  # rad/s


@dataclass(frozen=True)
class CueSample:
    time: float  # s
    head_yaw_delta: float  # rad, + = left
    wrist_flexion: float  # in [-1, 1], + = left
    decel_cue: bool
    gaze_covers_conflict: bool = False

    def __post_init__(self):
        if not (-1.0 <= self.wrist_flexion <= 1.0):
            raise ValueError(f"wrist_flexion out of [-1, 1]: {self.wrist_flexion}")


@dataclass(frozen=True)
class FusedEstimate:
    time: float  # s
    mean: KinematicState
    pos_std: float  # m, isotropic, > 0
    speed_std: float  # m/s, > 0

    def __post_init__(self):
        if self.pos_std <= 0.0 or self.speed_std <= 0.0:
            raise ValueError("pos_std and speed_std must be > 0")


def sample_gps(time: float, truth: KinematicState, sigma_gps: float,
               rng: np.random.Generator) -> GpsFix:
    """Measure the true position with independent per-axis Gaussian noise."""
    if sigma_gps < 0.0:
        raise ValueError(f"sigma_gps must be >= 0, got {sigma_gps}")
    nx = rng.normal(0.0, sigma_gps)
    ny = rng.normal(0.0, sigma_gps)
    return GpsFix(time=time, x=truth.x + nx, y=truth.y + ny)


def sample_imu(time: float, accel_true: float, yaw_rate_true: float,
               sigma_imu: float, rng: np.random.Generator,
               accel_bias: float = 0.0, yaw_rate_bias: float = 0.0) -> ImuSample:
    """Measure the applied controls with constant bias plus Gaussian noise."""
    if sigma_imu < 0.0:
        raise ValueError(f"sigma_imu must be >= 0, got {sigma_imu}")
    a = accel_true + accel_bias + rng.normal(0.0, sigma_imu)
    w = yaw_rate_true + yaw_rate_bias + rng.normal(0.0, sigma_imu)
    return ImuSample(time=time, accel_meas=a, yaw_rate_meas=w)


@lru_cache(maxsize=1)
def cue_profile_table() -> tuple[float, dict]:
    """Return (cue_lead_s, per-maneuver cue profile) from the shipped asset."""
    text = resources.files("wearsafe.data").joinpath("cue_profiles.json").read_text("utf-8")
    raw = json.loads(text)
    profiles = {
        Maneuver.from_name(name): (
            float(row["head_yaw_delta"]),
            float(row["wrist_flexion"]),
            bool(row["decel_cue"]),
        )
        for name, row in raw["profiles"].items()
    }
    return float(raw["cue_lead_s"]), profiles


def sample_cues(time: float, scripted_intent: Maneuver, lead_time: float,
                rng: np.random.Generator, sigma_cue: float = SIGMA_CUE_DEFAULT,
                gaze_covers_conflict: bool = False) -> CueSample:
    """Emit the body cues preceding a scripted maneuver.

    ``lead_time`` is the time until the maneuver starts (0 while it is
    active). Outside the cue-lead window the output is neutral noise. Two
    noise draws happen on every call so the stream stays aligned regardless
    of what is scripted.
    """
    if lead_time < 0.0:
        raise ValueError(f"lead_time must be >= 0, got {lead_time}")
    cue_lead, profiles = cue_profile_table()
    if lead_time <= cue_lead:
        head, wrist, decel = profiles[scripted_intent]
    else:
        head, wrist, decel = 0.0, 0.0, False
    head += rng.normal(0.0, sigma_cue)
    wrist += rng.normal(0.0, sigma_cue)
    wrist = max(-1.0, min(1.0, wrist))
    return CueSample(time=time, head_yaw_delta=head, wrist_flexion=wrist,
                     decel_cue=decel, gaze_covers_conflict=gaze_covers_conflict)


def fuse_predict(est: FusedEstimate, imu: ImuSample, dt: float, limits: ModeLimits,
                 q_pos: float = Q_POS_DEFAULT, q_speed: float = Q_SPEED_DEFAULT) -> FusedEstimate:
    """Propagate the estimate through the motion model using measured controls.

    Positional variance grows by q_pos * dt and speed variance by
    q_speed * dt, the usual random-walk inflation for unmodeled disturbance.
    """
    if dt <= 0.0 or not math.isfinite(dt):
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")
    mean = step(est.mean, ControlInput(imu.accel_meas, imu.yaw_rate_meas), limits, dt)
    return FusedEstimate(
        time=est.time + dt,
        mean=mean,
        pos_std=math.sqrt(est.pos_std ** 2 + q_pos * dt),
        speed_std=math.sqrt(est.speed_std ** 2 + q_speed * dt),
    )


def fuse_update(est: FusedEstimate, fix: GpsFix, sigma_gps: float) -> FusedEstimate:
    """Correct the position with one GPS fix via a scalar Kalman gain per axis.

    The posterior spread never exceeds the prior or the measurement:
    pos_std' = pos_std * sigma / sqrt(pos_std^2 + sigma^2).
    """
    if not (math.isfinite(fix.x) and math.isfinite(fix.y) and math.isfinite(fix.time)):
        raise ValueError("GPS fix must be finite")
    # Tolerance absorbs float drift when the estimate time is accumulated
    # tick by tick while fixes carry exact wall-clock stamps.
    if fix.time < est.time - 1e-6:
        raise ValueError(f"fix.time {fix.time} precedes estimate time {est.time}")
    if sigma_gps < 0.0:
        raise ValueError(f"sigma_gps must be >= 0, got {sigma_gps}")

    p2 = est.pos_std ** 2
    gain = p2 / (p2 + sigma_gps ** 2) if sigma_gps > 0.0 else 1.0
    mean = replace(
        est.mean,
        x=est.mean.x + gain * (fix.x - est.mean.x),
        y=est.mean.y + gain * (fix.y - est.mean.y),
    )
    pos_std = max(_STD_FLOOR, est.pos_std * math.sqrt(max(0.0, 1.0 - gain)))
    return FusedEstimate(time=max(fix.time, est.time), mean=mean,
                         pos_std=pos_std, speed_std=est.speed_std)
