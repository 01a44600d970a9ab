"""Deterministic discrete-event queue: the single source of simulated time.

Events pop in (due_time, scheduling order) so simultaneous events replay in
exactly the order they were scheduled, run after run.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any


class EmptyQueueError(Exception):
    """Popped an empty queue; the simulation loop has a bookkeeping bug."""


@dataclass(frozen=True)
class Event:
    due_ms: float
    seq: int  # unique, assigned in scheduling order; breaks time ties
    kind: str  # "tick" | "coord" | "delivery"
    payload: Any = None


class EventQueue:
    def __init__(self):
        self._heap: list[tuple[float, int, Event]] = []
        self._next_seq = 0

    def schedule(self, due_ms: float, kind: str, payload: Any = None) -> Event:
        ev = Event(due_ms=float(due_ms), seq=self._next_seq, kind=kind, payload=payload)
        self._next_seq += 1
        heapq.heappush(self._heap, (ev.due_ms, ev.seq, ev))
        return ev

    def pop(self) -> Event:
        if not self._heap:
            raise EmptyQueueError("pop on empty event queue")
        return heapq.heappop(self._heap)[2]

    def peek_time(self) -> float:
        if not self._heap:
            raise EmptyQueueError("peek on empty event queue")
        return self._heap[0][0]

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)
