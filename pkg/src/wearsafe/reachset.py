"""Intent-conditioned reachable sets, pairwise conflict scanning and TTC.

A reachable set is a time-indexed family of weighted discs: one disc per
maneuver per lookahead step, centered on the forward-simulated trajectory
of that maneuver and carrying its intent probability. Radii inflate with
estimate uncertainty and a linear dispersion term, so the representation is
a probabilistic over-approximation with O(1) pairwise intersection tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .intent import IntentDistribution
from .sensing import FusedEstimate
from .world import MANEUVERS, KinematicState, Maneuver, ModeLimits, maneuver_to_control, step

HORIZON_DEFAULT = 6.0  # s
DT_REACH_DEFAULT = 0.2  # s
BETA_DEFAULT = 0.3  # m/s, within-maneuver dispersion growth
D_SAFE_DEFAULT = 0.5  # m, extra clearance demanded between discs
P_MIN_DEFAULT = 0.05  # joint-probability threshold for reporting a conflict

_GRID_EPS = 1e-9


@dataclass(frozen=True)
class WeightedDisc:
    """One maneuver's predicted occupancy at one lookahead step."""

    x: float  # m
    y: float  # m
    radius: float  # m, > 0
    prob: float  # mass of the generating maneuver, in (0, 1]
    maneuver: Maneuver = Maneuver.MAINTAIN_COURSE

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"radius must be > 0, got {self.radius}")
        if not (0.0 < self.prob <= 1.0):
            raise ValueError(f"prob must be in (0, 1], got {self.prob}")


@dataclass(frozen=True)
class ReachableSet:
    """Discs indexed by lookahead step k at absolute times t0 + k * dt_reach."""

    agent: int
    t0: float  # s, absolute
    dt_reach: float  # s
    steps: tuple[tuple[WeightedDisc, ...], ...]

    def __post_init__(self):
        if self.dt_reach <= 0.0:
            raise ValueError("dt_reach must be > 0")
        if not self.steps:
            raise ValueError("reachable set needs at least one step")
        object.__setattr__(self, "steps", tuple(tuple(s) for s in self.steps))
        for k, discs in enumerate(self.steps):
            if not discs:
                raise ValueError(f"step {k} has no discs")

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def time_of(self, k: int) -> float:
        return self.t0 + k * self.dt_reach

    def max_extent(self) -> float:
        """Radius of a circle around the step-0 center covering every disc."""
        c0 = self.steps[0][0]
        return max(math.hypot(d.x - c0.x, d.y - c0.y) + d.radius
                   for discs in self.steps for d in discs)


@dataclass(frozen=True)
class Conflict:
    """Earliest predicted intersection of two agents' reachable sets."""

    agent_a: int
    agent_b: int
    t_first: float  # s, absolute
    prob: float  # joint probability of the reported disc pair
    separation_at_t: float  # m, center distance of that pair

    def __post_init__(self):
        if self.agent_a >= self.agent_b:
            raise ValueError("agents must be canonically ordered (agent_a < agent_b)")
        if not (0.0 < self.prob <= 1.0):
            raise ValueError(f"prob must be in (0, 1], got {self.prob}")

    @property
    def pair(self) -> tuple[int, int]:
        return (self.agent_a, self.agent_b)


def compute_reachable_set(agent: int, est: FusedEstimate, intent: IntentDistribution,
                          limits: ModeLimits, horizon: float = HORIZON_DEFAULT,
                          dt_reach: float = DT_REACH_DEFAULT,
                          beta: float = BETA_DEFAULT) -> ReachableSet:
    """Forward-simulate every maneuver from the estimate mean.

    Step k holds one disc per maneuver at the simulated center, radius

        footprint + 2 * pos_std + beta * k * dt_reach

    and probability equal to the maneuver's intent mass. Discs are never
    merged; step 0 is the current position.
    """
    if horizon <= 0.0 or not math.isfinite(horizon):
        raise ValueError(f"horizon must be > 0, got {horizon!r}")
    if dt_reach <= 0.0 or not math.isfinite(dt_reach):
        raise ValueError(f"dt_reach must be > 0, got {dt_reach!r}")
    n_steps = math.ceil(horizon / dt_reach - _GRID_EPS)
    base_radius = limits.footprint_radius + 2.0 * est.pos_std

    trajectories: dict[Maneuver, list[KinematicState]] = {}
    for m in MANEUVERS:
        u = maneuver_to_control(m, est.mean, limits)
        states = [est.mean]
        for _ in range(n_steps):
            states.append(step(states[-1], u, limits, dt_reach))
        trajectories[m] = states

    steps = []
    for k in range(n_steps + 1):
        radius = base_radius + beta * k * dt_reach
        steps.append(tuple(
            WeightedDisc(x=trajectories[m][k].x, y=trajectories[m][k].y,
                         radius=radius, prob=intent.p(m), maneuver=m)
            for m in MANEUVERS
        ))
    return ReachableSet(agent=agent, t0=est.time, dt_reach=dt_reach, steps=tuple(steps))


def conflict_scan(a: ReachableSet, b: ReachableSet, p_min: float = P_MIN_DEFAULT,
                  d_safe: float = D_SAFE_DEFAULT) -> Optional[Conflict]:
    """Scan two reachable sets for the earliest sufficiently probable overlap.

    The sets must share dt_reach; a t0 skew up to one step is aligned by
    nearest-step resampling. A disc pair (i, j) collides when the center
    distance is below r_i + r_j + d_safe; a conflict is reported when the
    joint probability p_i * p_j of some colliding pair reaches p_min,
    taking the earliest step and, within it, the most probable pair.
    """
    if abs(a.dt_reach - b.dt_reach) > _GRID_EPS:
        raise ValueError(f"mismatched dt_reach: {a.dt_reach} vs {b.dt_reach}")
    dt = a.dt_reach
    if abs(a.t0 - b.t0) > dt + _GRID_EPS:
        raise ValueError(f"t0 skew {abs(a.t0 - b.t0):.3f}s exceeds one step ({dt}s)")

    first, second = (a, b) if a.agent <= b.agent else (b, a)
    t_start = max(a.t0, b.t0)
    for k in range(max(a.n_steps, b.n_steps)):
        t = t_start + k * dt
        ia = round((t - a.t0) / dt)
        ib = round((t - b.t0) / dt)
        if ia >= a.n_steps or ib >= b.n_steps:
            break
        best: Optional[tuple[float, float]] = None  # (joint prob, separation)
        for da in a.steps[ia]:
            for db in b.steps[ib]:
                joint = da.prob * db.prob
                if joint < p_min:
                    continue
                sep = math.hypot(da.x - db.x, da.y - db.y)
                if sep < da.radius + db.radius + d_safe:
                    if best is None or joint > best[0]:
                        best = (joint, sep)
        if best is not None:
            return Conflict(agent_a=first.agent, agent_b=second.agent,
                            t_first=t, prob=best[0], separation_at_t=best[1])
    return None


def extended_ttc(sa: KinematicState, sb: KinematicState,
                 ra: float, rb: float) -> Optional[float]:
    """Time to collision under straight-line extrapolation, or None if not closing.

    TTC = (center distance - (ra + rb)) / closing speed, floored at zero, so
    touching footprints that are still closing report 0.
    """
    dx, dy = sb.x - sa.x, sb.y - sa.y
    dist = math.hypot(dx, dy)
    if dist < 1e-12:
        return 0.0
    vax, vay = sa.velocity
    vbx, vby = sb.velocity
    # Rate of change of the center distance; negative means closing.
    closing = -((dx * (vbx - vax) + dy * (vby - vay)) / dist)
    if closing <= 0.0:
        return None
    return max(0.0, (dist - (ra + rb)) / closing)


def weighted_area(rs: ReachableSet) -> float:
    """Probability-weighted disc area summed over all steps (m^2)."""
    return math.fsum(d.prob * math.pi * d.radius ** 2
                     for discs in rs.steps for d in discs)


def effective_area(rs: ReachableSet, p_threshold: float = P_MIN_DEFAULT) -> float:
    """Total area of discs whose probability reaches the threshold (m^2).

    This is the footprint the conflict scanner can actually react to: discs
    below the threshold can never contribute a reportable conflict against
    any partner. Concentrating intent shrinks it; spreading intent grows it.
    """
    return math.fsum(math.pi * d.radius ** 2
                     for discs in rs.steps for d in discs if d.prob >= p_threshold)
