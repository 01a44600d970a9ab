"""Wire protocol, channel models and the deterministic event queue."""

from .channel import (
    Channel,
    ChannelKind,
    ChannelPolicy,
    channel_profile,
    select_channel,
    transmit,
)
from .events import EmptyQueueError, Event, EventQueue
from .wire import (
    Advisory,
    BadCrc,
    BadMagic,
    BadVersion,
    Bsm,
    RangeViolation,
    TruncatedFrame,
    WireError,
    decode_advisory,
    decode_bsm,
    encode_advisory,
    encode_bsm,
    frame_msg_type,
)

__all__ = [
    "Advisory", "BadCrc", "BadMagic", "BadVersion", "Bsm", "Channel",
    "ChannelKind", "ChannelPolicy", "EmptyQueueError", "Event", "EventQueue",
    "RangeViolation", "TruncatedFrame", "WireError", "channel_profile",
    "decode_advisory", "decode_bsm", "encode_advisory", "encode_bsm",
    "frame_msg_type", "select_channel", "transmit",
]
