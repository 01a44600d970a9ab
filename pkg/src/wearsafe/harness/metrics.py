"""Run metrics, JSONL trace writing, recomputation and reporting.

Every run writes a trace (one JSON object per event) and a summary. The
summary is fully recomputable from the trace alone, which the tests use as
a consistency oracle. Paired enabled/baseline runs feed the false-positive
and lead-time analyses.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean, median
from typing import Iterable, Optional

NEAR_MISS_SEP_M = 2.0
FALSE_POSITIVE_SEP_M = 10.0

TRACE_NAME = "trace.jsonl"
SUMMARY_NAME = "summary.json"


def _pair_key(a: int, b: int) -> str:
    lo, hi = sorted((a, b))
    return f"{lo}-{hi}"


class TraceWriter:
    """Append-only JSONL writer with a running content hash."""

    def __init__(self, path: Path):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")
        self._hash = hashlib.sha256()

    def write(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
        self._fh.write(line)
        self._hash.update(line.encode("utf-8"))

    def close(self) -> str:
        self._fh.close()
        return self._hash.hexdigest()


@dataclass
class ChannelCounters:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    latencies_ms: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "latencies_ms": [round(v, 6) for v in self.latencies_ms],
        }


@dataclass
class RunMetrics:
    seed: int = 0
    scenario: str = ""
    duration_s: float = 0.0
    collisions: int = 0
    collision_events: list[dict] = field(default_factory=list)
    near_misses: int = 0
    pair_min_sep: dict[str, float] = field(default_factory=dict)
    conflict_events: int = 0
    advisories_issued: int = 0  # pair issuance events (original + reversals)
    advisory_frames: int = 0
    reversals: int = 0
    escalations: int = 0
    informational: int = 0
    advisory_pairs: list[dict] = field(default_factory=list)
    bsm_sent: int = 0
    bsm_delivered: int = 0
    bsm_dropped: int = 0
    bsm_rejected: int = 0
    rejected_by_reason: dict[str, int] = field(default_factory=dict)
    bytes_sent: int = 0
    channels: dict[str, ChannelCounters] = field(default_factory=dict)
    advisory_latencies_ms: dict[str, list[float]] = field(default_factory=dict)
    trace_sha256: str = ""

    def channel(self, kind: str) -> ChannelCounters:
        return self.channels.setdefault(kind, ChannelCounters())

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "seed": self.seed,
            "scenario": self.scenario,
            "duration_s": self.duration_s,
            "collisions": self.collisions,
            "collision_events": self.collision_events,
            "near_misses": self.near_misses,
            "pair_min_sep": {k: round(v, 6) for k, v in sorted(self.pair_min_sep.items())},
            "conflict_events": self.conflict_events,
            "advisories_issued": self.advisories_issued,
            "advisory_frames": self.advisory_frames,
            "reversals": self.reversals,
            "escalations": self.escalations,
            "informational": self.informational,
            "advisory_pairs": self.advisory_pairs,
            "bsm": {
                "sent": self.bsm_sent,
                "delivered": self.bsm_delivered,
                "dropped": self.bsm_dropped,
                "rejected": self.bsm_rejected,
                "rejected_by_reason": dict(sorted(self.rejected_by_reason.items())),
            },
            "bytes_sent": self.bytes_sent,
            "channels": {k: c.to_dict() for k, c in sorted(self.channels.items())},
            "advisory_latencies_ms": {
                k: [round(v, 6) for v in vals]
                for k, vals in sorted(self.advisory_latencies_ms.items())
            },
            "trace_sha256": self.trace_sha256,
        }

    def finalize_derived(self) -> None:
        """Fill counters derived from per-pair tracking."""
        collided = {_pair_key(*e["pair"]) for e in self.collision_events}
        self.collisions = len(self.collision_events)
        self.near_misses = sum(
            1 for key, sep in self.pair_min_sep.items()
            if sep < NEAR_MISS_SEP_M and key not in collided
        )


def write_summary(out_dir: Path, metrics: RunMetrics) -> Path:
    path = Path(out_dir) / SUMMARY_NAME
    path.write_text(json.dumps(metrics.to_dict(), sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


def load_summary(run_dir: str | Path) -> dict:
    return json.loads((Path(run_dir) / SUMMARY_NAME).read_text("utf-8"))


def iter_trace(run_dir: str | Path) -> Iterable[dict]:
    path = Path(run_dir) / TRACE_NAME
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: corrupt trace line: {e.msg}") from e


def recompute_metrics(run_dir: str | Path) -> dict:
    """Rebuild the summary dict from the trace alone (minus the trace hash).

    Used as a consistency oracle: the summary written by a run must equal
    what its own trace implies.
    """
    m = RunMetrics()
    positions: dict[float, dict[int, tuple[float, float]]] = {}
    seen_pairs: dict[str, float] = {}

    for rec in iter_trace(run_dir):
        kind = rec["k"]
        if kind == "meta":
            m.seed = rec["seed"]
            m.scenario = rec["scenario"]
            m.duration_s = rec["duration_s"]
        elif kind == "truth":
            positions.setdefault(rec["t"], {})[rec["agent"]] = (rec["x"], rec["y"])
        elif kind == "collision":
            m.collision_events.append({"t_ms": rec["t"], "pair": rec["pair"]})
        elif kind == "conflict":
            m.conflict_events += 1
        elif kind == "bsm_sent":
            m.bsm_sent += 1
            m.bytes_sent += rec["bytes"]
            ch = m.channel(rec["channel"])
            ch.sent += 1
            if rec["dropped"]:
                m.bsm_dropped += 1
                ch.dropped += 1
        elif kind == "bsm_delivered":
            m.bsm_delivered += 1
            ch = m.channel(rec["channel"])
            ch.delivered += 1
            ch.latencies_ms.append(rec["latency_ms"])
            if not rec["accepted"]:
                m.bsm_rejected += 1
                reason = rec["reject_reason"]
                m.rejected_by_reason[reason] = m.rejected_by_reason.get(reason, 0) + 1
        elif kind == "advisory_pair":
            m.advisories_issued += 1
            if rec["reversal"]:
                m.reversals += 1
            if rec["escalated"]:
                m.escalations += 1
            m.advisory_pairs.append({
                "t_ms": rec["t"], "conflict_id": rec["conflict_id"],
                "pair": rec["pair"], "reversal": rec["reversal"],
                "escalated": rec["escalated"],
            })
        elif kind == "advisory_sent":
            m.advisory_frames += 1
            m.bytes_sent += rec["bytes"]
            ch = m.channel(rec["channel"])
            ch.sent += 1
            if rec["dropped"]:
                ch.dropped += 1
        elif kind == "advisory_delivered":
            ch = m.channel(rec["channel"])
            ch.delivered += 1
            ch.latencies_ms.append(rec["latency_ms"])
            m.advisory_latencies_ms.setdefault(rec["channel"], []).append(rec["latency_ms"])
        elif kind == "suppressed":
            m.informational += 1
        elif kind == "alarm":
            m.escalations += 1

    for t in sorted(positions):
        at = positions[t]
        ids = sorted(at)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                a, b = ids[i], ids[j]
                d = math.hypot(at[a][0] - at[b][0], at[a][1] - at[b][1])
                key = _pair_key(a, b)
                if key not in seen_pairs or d < seen_pairs[key]:
                    seen_pairs[key] = d
    m.pair_min_sep = seen_pairs
    m.finalize_derived()
    out = m.to_dict()
    out.pop("trace_sha256")
    return out


def paired_analysis(enabled_dir: str | Path, baseline_dir: str | Path,
                    sep_threshold_m: float = FALSE_POSITIVE_SEP_M) -> dict:
    """Compare an advisories-on run against its advisories-off twin.

    A warning is a false positive when the pair it concerns never comes
    within ``sep_threshold_m`` in the baseline run. Lead time is measured
    from the first advisory for a pair to that pair's baseline collision.
    """
    enabled = load_summary(enabled_dir)
    baseline = load_summary(baseline_dir)
    if enabled["seed"] != baseline["seed"]:
        raise ValueError(
            f"paired runs must share a seed: {enabled['seed']} != {baseline['seed']}")

    base_min_sep = baseline["pair_min_sep"]
    pairs = enabled["advisory_pairs"]
    total = len(pairs)
    false_pos = sum(
        1 for p in pairs
        if base_min_sep.get(_pair_key(*p["pair"]), math.inf) > sep_threshold_m
    )

    base_collisions: dict[str, float] = {}
    for ev in baseline["collision_events"]:
        key = _pair_key(*ev["pair"])
        base_collisions.setdefault(key, ev["t_ms"])

    first_issue: dict[str, float] = {}
    for p in pairs:
        key = _pair_key(*p["pair"])
        first_issue.setdefault(key, p["t_ms"])

    lead_times = sorted(
        (base_collisions[key] - t_issue) / 1000.0
        for key, t_issue in first_issue.items()
        if key in base_collisions
    )
    return {
        "false_positives": false_pos,
        "advisories": total,
        "false_positive_rate": (false_pos / total) if total else 0.0,
        "lead_times_s": lead_times,
    }


def false_positive_rate(enabled_dir: str | Path, baseline_dir: str | Path,
                        sep_threshold_m: float = FALSE_POSITIVE_SEP_M) -> float:
    return paired_analysis(enabled_dir, baseline_dir, sep_threshold_m)["false_positive_rate"]


_REPORT_FIELDS = (
    "collisions", "near_misses", "conflict_events", "advisories_issued",
    "reversals", "escalations", "informational", "bsm_sent", "bsm_delivered",
    "bsm_dropped", "bsm_rejected", "bytes_sent",
)


def _row_from_summary(name: str, s: dict) -> dict:
    row = {"run": name, "seed": s["seed"], "scenario": s["scenario"]}
    for f in _REPORT_FIELDS:
        row[f] = s["bsm"][f.split("_", 1)[1]] if f.startswith("bsm_") else s[f]
    return row


def report(in_dir: str | Path) -> tuple[str, str]:
    """Aggregate all run summaries under a directory.

    Returns (csv_text, human_text); rows are sorted by run directory name
    and an aggregate row holds per-field mean and standard deviation.
    """
    in_dir = Path(in_dir)
    run_dirs = sorted(p for p in in_dir.iterdir()
                      if p.is_dir() and (p / SUMMARY_NAME).exists())
    if (in_dir / SUMMARY_NAME).exists():
        run_dirs.insert(0, in_dir)
    if not run_dirs:
        raise ValueError(f"no run summaries found under {in_dir}")

    rows = [_row_from_summary(p.name or str(p), load_summary(p)) for p in run_dirs]

    csv_buf = io.StringIO()
    header = ["run", "seed", "scenario", *_REPORT_FIELDS]
    csv_buf.write(",".join(header) + "\n")
    for row in rows:
        csv_buf.write(",".join(str(row[h]) for h in header) + "\n")
    means = {f: mean(r[f] for r in rows) for f in _REPORT_FIELDS}
    stds = {
        f: (math.sqrt(mean((r[f] - means[f]) ** 2 for r in rows)) if len(rows) > 1 else 0.0)
        for f in _REPORT_FIELDS
    }
    csv_buf.write(",".join(["mean", "", ""] + [f"{means[f]:.6g}" for f in _REPORT_FIELDS]) + "\n")
    csv_buf.write(",".join(["std", "", ""] + [f"{stds[f]:.6g}" for f in _REPORT_FIELDS]) + "\n")

    text_buf = io.StringIO()
    text_buf.write(f"{len(rows)} run(s) under {in_dir}\n")
    width = max(len(f) for f in _REPORT_FIELDS)
    for f in _REPORT_FIELDS:
        text_buf.write(f"  {f:<{width}}  mean {means[f]:>12.4f}  std {stds[f]:>10.4f}\n")
    collisions_total = sum(r["collisions"] for r in rows)
    text_buf.write(f"  total collisions across runs: {collisions_total}\n")
    return csv_buf.getvalue(), text_buf.getvalue()
