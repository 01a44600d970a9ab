"""Binary wire format for safety messages and advisories.

All frames are little-endian with fixed-point fields and a CRC-32 trailer:

    offset  field
    0       magic        2B   0xB5 0x53
    2       version      u8   1
    3       msg_type     u8   0 = safety message, 1 = advisory

Safety message (msg_type 0) body:

    sender u32, seq u32, timestamp_ms u64,
    pos_x i32 (cm), pos_y i32 (cm), heading u16 (2*pi/65536 rad),
    speed u16 (cm/s), accel i16 (cm/s^2), yaw_rate i16 (mrad/s), mode u8,
    intent 5 x u16 (prob * 65535, canonical maneuver order),
    reach: t0_ms u64, dt_reach_ms u16, n_steps u8,
           per step: n_discs u8, per disc: cx i32 (cm), cy i32 (cm),
                     r u16 (cm), p u16 (prob * 65535)

Advisory (msg_type 1) body:

    conflict_id u64, target u32, action u8, is_reversal u8,
    issued_at_ms u64, expiry_ms u64, t_conflict_ms u32, separation_cm u32

A CRC-32 (u32) over every preceding byte closes each frame. Frame length
is a pure function of the step/disc counts; the decoder never reads past
the declared counts. Decoded values are exact fixed-point numbers, so
re-encoding a decoded frame is byte-identical.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

from ..intent import IntentDistribution
from ..reachset import ReachableSet, WeightedDisc
from ..world import MANEUVERS, KinematicState, Maneuver, TransportMode

MAGIC = b"\xb5\x53"
VERSION = 1
MSG_BSM = 0
MSG_ADVISORY = 1

POS_LIMIT_M = 20_000.0  # quantization range for any encoded coordinate
_TWO_PI = 2.0 * math.pi
_HEADING_UNIT = _TWO_PI / 65536.0

_HEADER = struct.Struct("<2sBB")
_BSM_FIXED = struct.Struct("<IIQiiHHhhB")
_INTENT = struct.Struct("<5H")
_REACH_HEAD = struct.Struct("<QHB")
_DISC = struct.Struct("<iiHH")
_ADVISORY_BODY = struct.Struct("<QIBBQQII")
_CRC = struct.Struct("<I")


class WireError(Exception):
    """Base class for codec failures."""


class TruncatedFrame(WireError):
    """Frame shorter (or longer) than its declared layout."""


class BadMagic(WireError):
    pass


class BadVersion(WireError):
    pass


class BadCrc(WireError):
    pass


class RangeViolation(WireError):
    """A field is outside its representable or legal range."""


@dataclass(frozen=True)
class Bsm:
    """Periodic safety broadcast: state, mode, intent and predicted occupancy."""

    sender: int
    seq: int
    timestamp_ms: int
    state: KinematicState
    mode: TransportMode
    intent: IntentDistribution
    reach: ReachableSet


@dataclass(frozen=True)
class Advisory:
    """One resolution instruction for one agent."""

    conflict_id: int
    target: int
    action: Maneuver
    issued_at_ms: int
    is_reversal: bool
    expiry_ms: int
    t_conflict_ms: int = 0  # lead time to the predicted conflict at issue
    separation_cm: int = 0  # pair separation at issue

    def __post_init__(self):
        if self.expiry_ms <= self.issued_at_ms:
            raise ValueError("expiry must be after issue time")


def _check(cond: bool, what: str) -> None:
    if not cond:
        raise RangeViolation(what)


def _q_cm(value: float, what: str) -> int:
    _check(math.isfinite(value) and abs(value) <= POS_LIMIT_M, f"{what} out of range: {value!r}")
    return round(value * 100.0)


def _q_u16(value: float, scale: float, what: str) -> int:
    _check(math.isfinite(value), f"{what} not finite")
    q = round(value * scale)
    _check(0 <= q <= 0xFFFF, f"{what} out of range: {value!r}")
    return q


def _q_i16(value: float, scale: float, what: str) -> int:
    _check(math.isfinite(value), f"{what} not finite")
    q = round(value * scale)
    _check(-0x8000 <= q <= 0x7FFF, f"{what} out of range: {value!r}")
    return q


def _q_heading(heading: float) -> int:
    _check(math.isfinite(heading), "heading not finite")
    return round((heading % _TWO_PI) / _HEADING_UNIT) % 65536


def _dq_heading(units: int) -> float:
    theta = units * _HEADING_UNIT
    return theta - _TWO_PI if theta >= math.pi else theta


def _q_u32(value: int, what: str) -> int:
    _check(0 <= value <= 0xFFFFFFFF, f"{what} out of range: {value!r}")
    return value


def _q_u64(value: int, what: str) -> int:
    _check(0 <= value <= 0xFFFFFFFFFFFFFFFF, f"{what} out of range: {value!r}")
    return value


def encode_bsm(b: Bsm) -> bytes:
    """Serialize a safety message to its canonical frame."""
    out = bytearray(_HEADER.pack(MAGIC, VERSION, MSG_BSM))
    st = b.state
    out += _BSM_FIXED.pack(
        _q_u32(b.sender, "sender"),
        _q_u32(b.seq, "seq"),
        _q_u64(b.timestamp_ms, "timestamp_ms"),
        _q_cm(st.x, "pos_x"),
        _q_cm(st.y, "pos_y"),
        _q_heading(st.heading),
        _q_u16(st.speed, 100.0, "speed"),
        _q_i16(st.accel, 100.0, "accel"),
        _q_i16(st.yaw_rate, 1000.0, "yaw_rate"),
        int(b.mode),
    )
    out += _INTENT.pack(*(_q_u16(b.intent.p(m), 65535.0, f"intent[{m.name}]")
                          for m in MANEUVERS))

    reach = b.reach
    dt_ms = round(reach.dt_reach * 1000.0)
    _check(1 <= dt_ms <= 0xFFFF, f"dt_reach out of range: {reach.dt_reach!r}")
    _check(1 <= reach.n_steps <= 255, f"n_steps out of range: {reach.n_steps}")
    t0_ms = round(reach.t0 * 1000.0)
    out += _REACH_HEAD.pack(_q_u64(t0_ms, "reach.t0_ms"), dt_ms, reach.n_steps)
    for discs in reach.steps:
        _check(1 <= len(discs) <= 255, f"n_discs out of range: {len(discs)}")
        out.append(len(discs))
        for d in discs:
            r_cm = _q_u16(d.radius, 100.0, "disc radius")
            p_q = _q_u16(d.prob, 65535.0, "disc prob")
            _check(r_cm >= 1, f"disc radius quantizes to zero: {d.radius!r}")
            _check(p_q >= 1, f"disc prob quantizes to zero: {d.prob!r}")
            out += _DISC.pack(_q_cm(d.x, "disc cx"), _q_cm(d.y, "disc cy"), r_cm, p_q)

    out += _CRC.pack(zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, st: struct.Struct):
        end = self.pos + st.size
        if end > len(self.data):
            raise TruncatedFrame(f"need {end} bytes, have {len(self.data)}")
        vals = st.unpack_from(self.data, self.pos)
        self.pos = end
        return vals

    def take_u8(self) -> int:
        if self.pos + 1 > len(self.data):
            raise TruncatedFrame(f"need {self.pos + 1} bytes, have {len(self.data)}")
        v = self.data[self.pos]
        self.pos += 1
        return v


def _decode_header(r: _Reader, expected_type: int) -> None:
    magic, version, msg_type = r.take(_HEADER)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    if msg_type != expected_type:
        raise RangeViolation(f"msg_type {msg_type}, expected {expected_type}")


def _finish_frame(r: _Reader) -> None:
    body = r.data[:r.pos]
    (stored,) = r.take(_CRC)
    if r.pos != len(r.data):
        raise TruncatedFrame(f"frame length {len(r.data)}, declared {r.pos}")
    if zlib.crc32(body) & 0xFFFFFFFF != stored:
        raise BadCrc("checksum mismatch")


def decode_bsm(data: bytes) -> Bsm:
    """Parse and validate one safety-message frame."""
    r = _Reader(data)
    _decode_header(r, MSG_BSM)
    sender, seq, ts, px, py, hu, su, au, yu, mode_raw = r.take(_BSM_FIXED)
    intent_q = r.take(_INTENT)
    t0_ms, dt_ms, n_steps = r.take(_REACH_HEAD)

    steps_raw = []
    for _ in range(n_steps):
        n_discs = r.take_u8()
        if n_discs < 1:
            raise RangeViolation("step with zero discs")
        steps_raw.append([r.take(_DISC) for _ in range(n_discs)])
    _finish_frame(r)

    if mode_raw > 3:
        raise RangeViolation(f"mode {mode_raw}")
    if dt_ms < 1:
        raise RangeViolation("dt_reach_ms must be >= 1")
    if n_steps < 1:
        raise RangeViolation("n_steps must be >= 1")
    if abs(px) > POS_LIMIT_M * 100 or abs(py) > POS_LIMIT_M * 100:
        raise RangeViolation("position out of range")

    state = KinematicState(
        x=px / 100.0, y=py / 100.0, heading=_dq_heading(hu),
        speed=su / 100.0, yaw_rate=yu / 1000.0, accel=au / 100.0,
    )
    intent = IntentDistribution({m: q / 65535.0 for m, q in zip(MANEUVERS, intent_q)})

    steps = []
    for discs_raw in steps_raw:
        discs = []
        for cx, cy, r_cm, p_q in discs_raw:
            if r_cm < 1:
                raise RangeViolation("disc radius must be >= 1 cm")
            if p_q < 1:
                raise RangeViolation("disc prob must be > 0")
            if abs(cx) > POS_LIMIT_M * 100 or abs(cy) > POS_LIMIT_M * 100:
                raise RangeViolation("disc center out of range")
            discs.append(WeightedDisc(x=cx / 100.0, y=cy / 100.0,
                                      radius=r_cm / 100.0, prob=p_q / 65535.0))
        steps.append(tuple(discs))
    reach = ReachableSet(agent=sender, t0=t0_ms / 1000.0,
                         dt_reach=dt_ms / 1000.0, steps=tuple(steps))
    return Bsm(sender=sender, seq=seq, timestamp_ms=ts, state=state,
               mode=TransportMode(mode_raw), intent=intent, reach=reach)


def encode_advisory(a: Advisory) -> bytes:
    out = bytearray(_HEADER.pack(MAGIC, VERSION, MSG_ADVISORY))
    out += _ADVISORY_BODY.pack(
        _q_u64(a.conflict_id, "conflict_id"),
        _q_u32(a.target, "target"),
        int(a.action),
        1 if a.is_reversal else 0,
        _q_u64(a.issued_at_ms, "issued_at_ms"),
        _q_u64(a.expiry_ms, "expiry_ms"),
        _q_u32(a.t_conflict_ms, "t_conflict_ms"),
        _q_u32(a.separation_cm, "separation_cm"),
    )
    out += _CRC.pack(zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


def decode_advisory(data: bytes) -> Advisory:
    r = _Reader(data)
    _decode_header(r, MSG_ADVISORY)
    cid, target, action_raw, rev, issued, expiry, t_conf, sep = r.take(_ADVISORY_BODY)
    _finish_frame(r)
    if action_raw > 4:
        raise RangeViolation(f"action {action_raw}")
    if rev > 1:
        raise RangeViolation(f"is_reversal {rev}")
    if expiry <= issued:
        raise RangeViolation("expiry before issue")
    return Advisory(conflict_id=cid, target=target, action=Maneuver(action_raw),
                    issued_at_ms=issued, is_reversal=bool(rev), expiry_ms=expiry,
                    t_conflict_ms=t_conf, separation_cm=sep)


def frame_msg_type(data: bytes) -> int:
    """Peek the message type of a frame without validating it."""
    if len(data) < _HEADER.size:
        raise TruncatedFrame("frame shorter than header")
    return data[3]
