"""Datagram framing, redundant emission and receiver-side deduplication.

Wire layout (20 bytes, network byte order)::

    0      2     3      4          6        10              18      20
    +------+-----+------+----------+--------+---------------+-------+---------
    | 'AV' | ver | flags| stream_id|  seq   | timestamp_us  |  len  | payload
    +------+-----+------+----------+--------+---------------+-------+---------

flags bit0 marks the redundant copy, bit1 is the link tag (0 = Band5,
1 = Band24); bits 2-7 must be zero.

There are no acknowledgements and no retransmission.  Loss is tolerated by
sending drop-sensitive streams over both links and keeping whichever copy
arrives first.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from typing import NamedTuple

from .core import LinkId, StreamRegistry, StreamSpec, TelelinkError

MAGIC = b"AV"
VERSION = 1
HEADER = struct.Struct(">2sBBHIQH")
HEADER_SIZE = HEADER.size  # 20
MAX_PAYLOAD = 0xFFFF

FLAG_COPY = 0x01
FLAG_BAND24 = 0x02
_RESERVED_MASK = 0xFC

SEQ_MOD = 1 << 32
_HALF = 1 << 31
DEDUP_WINDOW = 1024
RESTART_GAP_US = 1_000_000

assert HEADER_SIZE == 20


class PayloadTooLarge(TelelinkError, ValueError):
    pass


class MalformedPacket(TelelinkError, ValueError):
    pass


class SenderSequenceError(TelelinkError):
    pass


@dataclass(frozen=True)
class PacketHeader:
    stream_id: int
    seq: int
    timestamp_us: int
    payload_len: int
    link: LinkId = LinkId.BAND5
    is_copy: bool = False
    version: int = VERSION

    @property
    def flags(self) -> int:
        return (FLAG_COPY if self.is_copy else 0) | (FLAG_BAND24 if self.link is LinkId.BAND24 else 0)

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, self.version, self.flags, self.stream_id, self.seq, self.timestamp_us, self.payload_len)

    @classmethod
    def unpack(cls, data: bytes) -> "PacketHeader":
        if len(data) < HEADER_SIZE:
            raise MalformedPacket(f"short frame: {len(data)} bytes")
        magic, version, flags, stream_id, seq, ts, length = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise MalformedPacket(f"bad magic {magic!r}")
        if version != VERSION:
            raise MalformedPacket(f"unsupported version {version}")
        if flags & _RESERVED_MASK:
            raise MalformedPacket(f"reserved flag bits set: {flags:#04x}")
        link = LinkId.BAND24 if flags & FLAG_BAND24 else LinkId.BAND5
        return cls(stream_id, seq, ts, length, link, bool(flags & FLAG_COPY), version)


def encode_packet(
    spec: StreamSpec, seq: int, now_us: int, payload: bytes, link: LinkId, is_copy: bool = False
) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    if link not in spec.links:
        raise ValueError(f"stream {spec.name!r} is not assigned to {link.label}")
    flags = (FLAG_COPY if is_copy else 0) | (FLAG_BAND24 if link is LinkId.BAND24 else 0)
    return HEADER.pack(MAGIC, VERSION, flags, spec.stream_id, seq, now_us, len(payload)) + payload


def decode_packet(datagram: bytes) -> tuple[PacketHeader, bytes]:
    header = PacketHeader.unpack(datagram)
    if len(datagram) != HEADER_SIZE + header.payload_len:
        raise MalformedPacket(
            f"length field says {header.payload_len} payload bytes, frame carries {len(datagram) - HEADER_SIZE}"
        )
    return header, bytes(datagram[HEADER_SIZE:])


def seq_diff(a: int, b: int) -> int:
    """Signed serial-number distance a - b over the 32-bit space, in [-2**31, 2**31)."""
    return ((a - b + _HALF) % SEQ_MOD) - _HALF


def send(spec: StreamSpec, seq: int, now_us: int, payload: bytes) -> list[tuple[LinkId, bytes]]:
    """Frame one message for the wire.

    Redundant streams produce one datagram per link with the copy flag on the
    Band24 one.  A non-redundant stream on two links alternates by sequence
    parity.  Sequence monotonicity is enforced by :class:`Sender`.
    """
    if spec.redundant:
        return [
            (LinkId.BAND5, encode_packet(spec, seq, now_us, payload, LinkId.BAND5, False)),
            (LinkId.BAND24, encode_packet(spec, seq, now_us, payload, LinkId.BAND24, True)),
        ]
    links = spec.sorted_links
    link = links[seq % len(links)]
    return [(link, encode_packet(spec, seq, now_us, payload, link, False))]


class Sender:
    """Per-endpoint sender enforcing strictly increasing sequence numbers per stream."""

    def __init__(self) -> None:
        self._last_seq: dict[int, int] = {}
        self.messages: dict[int, int] = {}
        self.datagrams: dict[int, int] = {}

    def next_seq(self, spec: StreamSpec) -> int:
        last = self._last_seq.get(spec.stream_id)
        return 0 if last is None else (last + 1) % SEQ_MOD

    def send(self, spec: StreamSpec, seq: int, now_us: int, payload: bytes) -> list[tuple[LinkId, bytes]]:
        last = self._last_seq.get(spec.stream_id)
        if last is not None and seq_diff(seq, last) <= 0:
            raise SenderSequenceError(f"stream {spec.stream_id}: seq {seq} does not follow {last}")
        out = send(spec, seq, now_us, payload)
        self._last_seq[spec.stream_id] = seq
        sid = spec.stream_id
        self.messages[sid] = self.messages.get(sid, 0) + 1
        self.datagrams[sid] = self.datagrams.get(sid, 0) + len(out)
        return out

    def send_next(self, spec: StreamSpec, now_us: int, payload: bytes) -> list[tuple[LinkId, bytes]]:
        return self.send(spec, self.next_seq(spec), now_us, payload)

    def reset(self) -> None:
        """Forget sequence state, as after a process restart."""
        self._last_seq.clear()


class Outcome(enum.Enum):
    DELIVERED = "delivered"
    DUPLICATE = "duplicate"
    STALE = "stale"
    UNKNOWN_STREAM = "unknown_stream"
    MALFORMED = "malformed"


class RxOutcome(NamedTuple):
    kind: Outcome
    stream_id: int | None = None
    seq: int | None = None
    payload: bytes | None = None
    latency_us: int | None = None


@dataclass
class RxRecord:
    """Receive state of one stream.

    ``_mask`` bit i set means seq ``highest - i`` was delivered; only the low
    ``window_size`` bits are kept.
    """

    stream_id: int
    window_size: int = DEDUP_WINDOW
    highest: int | None = None
    last_timestamp_us: int = 0
    _mask: int = 0
    delivered: int = 0
    duplicates: int = 0
    stale: int = 0
    malformed: int = 0
    restarts: int = 0
    latencies_us: list[int] = field(default_factory=list)

    @property
    def highest_seq_delivered(self) -> int | None:
        return self.highest

    @property
    def window(self) -> set[int]:
        if self.highest is None:
            return set()
        mask, out, i = self._mask, set(), 0
        while mask:
            if mask & 1:
                out.add((self.highest - i) % SEQ_MOD)
            mask >>= 1
            i += 1
        return out

    def clear_window(self) -> None:
        self.highest = None
        self._mask = 0

    def classify(self, seq: int, timestamp_us: int) -> Outcome:
        """Update window state for one well-formed arrival and return its class."""
        h = self.highest
        if h is None:
            self.highest, self._mask = seq, 1
            self.last_timestamp_us = timestamp_us
            return Outcome.DELIVERED
        if seq == 0 and timestamp_us - self.last_timestamp_us > RESTART_GAP_US and h != 0:
            # sender restarted from scratch
            self.restarts += 1
            self.highest, self._mask = 0, 1
            self.last_timestamp_us = timestamp_us
            return Outcome.DELIVERED
        d = seq_diff(seq, h)
        if d > 0:
            self._mask = ((self._mask << d) | 1) & ((1 << self.window_size) - 1) if d < self.window_size else 1
            self.highest = seq
            self.last_timestamp_us = max(self.last_timestamp_us, timestamp_us)
            return Outcome.DELIVERED
        back = -d
        if back >= self.window_size:
            return Outcome.STALE
        bit = 1 << back
        if self._mask & bit:
            return Outcome.DUPLICATE
        self._mask |= bit
        self.last_timestamp_us = max(self.last_timestamp_us, timestamp_us)
        return Outcome.DELIVERED


class Receiver:
    """Demultiplexes datagrams into per-stream records."""

    def __init__(self, registry: StreamRegistry, window_size: int = DEDUP_WINDOW) -> None:
        self.registry = registry
        self.window_size = window_size
        self.records: dict[int, RxRecord] = {s.stream_id: RxRecord(s.stream_id, window_size) for s in registry}
        self.unknown = 0
        self.malformed_unattributed = 0

    def receive(self, datagram: bytes, now_us: int) -> RxOutcome:
        try:
            header = PacketHeader.unpack(datagram)
        except MalformedPacket:
            self.malformed_unattributed += 1
            return RxOutcome(Outcome.MALFORMED)
        record = self.records.get(header.stream_id)
        if record is None:
            self.unknown += 1
            return RxOutcome(Outcome.UNKNOWN_STREAM, header.stream_id, header.seq)
        if len(datagram) != HEADER_SIZE + header.payload_len:
            record.malformed += 1
            return RxOutcome(Outcome.MALFORMED, header.stream_id, header.seq)
        return _apply(record, header, datagram, now_us)

    def reset_windows(self) -> None:
        """Drop dedup state but keep counters (endpoint restart)."""
        for record in self.records.values():
            record.clear_window()


def _apply(record: RxRecord, header: PacketHeader, datagram: bytes, now_us: int) -> RxOutcome:
    kind = record.classify(header.seq, header.timestamp_us)
    if kind is Outcome.DELIVERED:
        latency = now_us - header.timestamp_us
        record.delivered += 1
        record.latencies_us.append(latency)
        return RxOutcome(kind, header.stream_id, header.seq, bytes(datagram[HEADER_SIZE:]), latency)
    if kind is Outcome.DUPLICATE:
        record.duplicates += 1
    else:
        record.stale += 1
    return RxOutcome(kind, header.stream_id, header.seq)


def receive(record: RxRecord, datagram: bytes, now_us: int) -> tuple[RxRecord, RxOutcome]:
    """Single-stream receive.  Mutates and returns ``record``."""
    try:
        header, _ = decode_packet(datagram)
    except MalformedPacket:
        record.malformed += 1
        return record, RxOutcome(Outcome.MALFORMED)
    if header.stream_id != record.stream_id:
        return record, RxOutcome(Outcome.UNKNOWN_STREAM, header.stream_id, header.seq)
    return record, _apply(record, header, datagram, now_us)


def nearest_rank(sorted_values: list[int], pct: float) -> int | None:
    if not sorted_values:
        return None
    rank = max(1, math.ceil(pct / 100 * len(sorted_values)))
    return sorted_values[rank - 1]


@dataclass(frozen=True)
class StreamStats:
    delivered: int
    duplicates: int
    stale: int
    malformed: int
    p50_us: int | None
    p95_us: int | None
    p99_us: int | None


def stream_stats(record: RxRecord) -> StreamStats:
    lat = sorted(record.latencies_us)
    return StreamStats(
        record.delivered,
        record.duplicates,
        record.stale,
        record.malformed,
        nearest_rank(lat, 50),
        nearest_rank(lat, 95),
        nearest_rank(lat, 99),
    )
