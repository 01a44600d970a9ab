"""Maneuver-intent estimation from a short window of body cues.

The estimator is a deterministic scoring rule behind a small interface, so a
learned model taking the same (cue window, fused estimate) inputs can be
dropped in later. Every maneuver keeps at least a floor probability: intent
conditioning is allowed to shrink the predicted motion envelope but never to
prune a maneuver outright.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping, Protocol, Sequence

from .sensing import CueSample, FusedEstimate
from .world import MANEUVERS, Maneuver

W_CUE_DEFAULT = 0.5  # s, cue window span

# Wire quantization leaves per-maneuver slack of ~1/65535; allow a little
# more so decoded distributions validate without renormalizing first.
_SUM_TOL = 2e-3


@dataclass(frozen=True)
class IntentDistribution:
    """Probability over the five maneuvers, summing to one."""

    probs: Mapping[Maneuver, float]

    def __post_init__(self):
        if set(self.probs.keys()) != set(MANEUVERS):
            raise ValueError("distribution must cover exactly the five maneuvers")
        for m, p in self.probs.items():
            if not math.isfinite(p) or p < 0.0 or p > 1.0:
                raise ValueError(f"probability for {m.name} out of [0, 1]: {p!r}")
        total = math.fsum(self.probs[m] for m in MANEUVERS)
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {total}, expected 1")
        object.__setattr__(self, "probs", dict(self.probs))

    def p(self, m: Maneuver) -> float:
        return self.probs[m]

    def argmax(self) -> Maneuver:
        return max(MANEUVERS, key=lambda m: (self.probs[m], -int(m)))

    def as_tuple(self) -> tuple[float, ...]:
        """Probabilities in canonical maneuver order."""
        return tuple(self.probs[m] for m in MANEUVERS)

    @classmethod
    def uniform(cls) -> "IntentDistribution":
        return cls({m: 1.0 / len(MANEUVERS) for m in MANEUVERS})

    @classmethod
    def concentrated(cls, m: Maneuver, floor: float = 0.01) -> "IntentDistribution":
        """All mass on one maneuver except the floor kept on the others."""
        probs = {other: floor for other in MANEUVERS}
        probs[m] = 1.0 - floor * (len(MANEUVERS) - 1)
        return cls(probs)

    @classmethod
    def from_scores(cls, scores: Mapping[Maneuver, float], floor: float = 0.01) -> "IntentDistribution":
        """Normalize nonnegative scores, then floor and renormalize exactly.

        Maneuvers falling below the floor are pinned there and the remaining
        mass is redistributed proportionally among the rest, iterating until
        stable, so the result sums to 1 and every entry is >= floor.
        """
        if any(scores[m] < 0 or not math.isfinite(scores[m]) for m in MANEUVERS):
            raise ValueError("scores must be finite and >= 0")
        total = math.fsum(scores[m] for m in MANEUVERS)
        if total <= 0.0:
            return cls.uniform()
        pinned: set[Maneuver] = set()
        while True:
            free = [m for m in MANEUVERS if m not in pinned]
            if not free:  # unreachable: the top scorer can never fall below the floor
                return cls.uniform()
            free_mass = 1.0 - floor * len(pinned)
            free_total = math.fsum(scores[m] for m in free)
            probs = {m: floor for m in pinned}
            if free_total <= 0.0:
                # All remaining scores are zero; split the leftover mass evenly.
                for m in free:
                    probs[m] = free_mass / len(free)
                return cls(probs)
            newly_pinned = False
            for m in free:
                p = scores[m] * free_mass / free_total
                if p < floor:
                    pinned.add(m)
                    newly_pinned = True
                else:
                    probs[m] = p
            if not newly_pinned:
                return cls(probs)


@dataclass(frozen=True)
class CueWindow:
    """Time-ordered cue samples covering at most the last ``span`` seconds."""

    samples: tuple[CueSample, ...]
    span: float = W_CUE_DEFAULT

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        times = [s.time for s in self.samples]
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValueError("cue timestamps must be strictly increasing")
        if times and times[-1] - times[0] > self.span + 1e-9:
            raise ValueError(f"window covers {times[-1] - times[0]:.3f}s > span {self.span}s")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class IntentWeights:
    head: float = 3.0
    wrist: float = 2.0
    decel: float = 2.5
    baseline: float = 1.0
    floor: float = 0.01

    @classmethod
    @lru_cache(maxsize=1)
    def load_default(cls) -> "IntentWeights":
        text = resources.files("wearsafe.data").joinpath("intent_weights.json").read_text("utf-8")
        raw = json.loads(text)
        return cls(head=float(raw["head"]), wrist=float(raw["wrist"]),
                   decel=float(raw["decel"]), baseline=float(raw["baseline"]),
                   floor=float(raw["floor"]))


def estimate_intent(window: CueWindow, est: FusedEstimate,
                    weights: IntentWeights | None = None) -> IntentDistribution:
    """Score maneuvers from mean cue activity and normalize.

    Left/right turn scores take the positive and negative parts of the mean
    head-yaw and wrist-flexion signals, braking the fraction of decel cues,
    and maintain-course a constant prior, so an all-neutral window yields a
    maintain-dominant distribution. ``est`` is unused by this rule-based
    scorer but part of the estimator interface.
    """
    if len(window) == 0:
        raise ValueError("cue window is empty")
    w = weights or IntentWeights.load_default()
    n = len(window)
    mean_head = math.fsum(s.head_yaw_delta for s in window.samples) / n
    mean_wrist = math.fsum(s.wrist_flexion for s in window.samples) / n
    frac_decel = sum(1 for s in window.samples if s.decel_cue) / n
    scores = {
        Maneuver.MAINTAIN_COURSE: w.baseline,
        Maneuver.TURN_LEFT: w.head * max(mean_head, 0.0) + w.wrist * max(mean_wrist, 0.0),
        Maneuver.TURN_RIGHT: w.head * max(-mean_head, 0.0) + w.wrist * max(-mean_wrist, 0.0),
        Maneuver.BRAKE: w.decel * frac_decel,
        Maneuver.ACCELERATE: 0.0,
    }
    return IntentDistribution.from_scores(scores, floor=w.floor)


class IntentEstimator(Protocol):
    def estimate(self, window: CueWindow, est: FusedEstimate) -> IntentDistribution: ...


@dataclass(frozen=True)
class RuleBasedIntentEstimator:
    """Default estimator: the deterministic scoring rule above."""

    weights: IntentWeights = field(default_factory=IntentWeights.load_default)

    def estimate(self, window: CueWindow, est: FusedEstimate) -> IntentDistribution:
        return estimate_intent(window, est, self.weights)
