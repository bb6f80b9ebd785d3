"""Stream registry and static bandwidth admission control.

Every stream declares its bandwidth budget up front.  A registry only ever
holds a set of streams whose summed budgets fit each link's capacity, per
direction, so nothing at runtime can push a link into saturation.

Budgets are kept as :class:`fractions.Fraction` so table totals are exact.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping


class LinkId(enum.IntEnum):
    """The two wireless links.  The value is the wire tag bit."""

    BAND5 = 0
    BAND24 = 1

    @property
    def label(self) -> str:
        return _LINK_LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "LinkId":
        key = text.strip().lower().replace(".", "").replace("_", "").replace(" ", "")
        try:
            return _LINK_ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown link {text!r} (expected Band5 or Band24)") from None


_LINK_LABELS = {LinkId.BAND5: "Band5", LinkId.BAND24: "Band24"}
_LINK_ALIASES = {
    "band5": LinkId.BAND5,
    "5ghz": LinkId.BAND5,
    "5": LinkId.BAND5,
    "band24": LinkId.BAND24,
    "24ghz": LinkId.BAND24,
    "24": LinkId.BAND24,
}

BOTH_LINKS = frozenset(LinkId)


class Direction(enum.Enum):
    DOWNLINK = "downlink"  # avatar -> operator
    UPLINK = "uplink"  # operator -> avatar

    @classmethod
    def parse(cls, text: str) -> "Direction":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown direction {text!r} (expected downlink or uplink)") from None


DEFAULT_CAPACITY_MBPS = {LinkId.BAND5: Fraction(50), LinkId.BAND24: Fraction(20)}


class TelelinkError(Exception):
    """Base class for all errors raised by this package."""


class InvalidStreamSpec(TelelinkError, ValueError):
    pass


class AdmissionError(TelelinkError):
    """A stream could not be admitted to a registry."""


class DuplicateStreamId(AdmissionError):
    def __init__(self, stream_id: int):
        super().__init__(f"stream id {stream_id} is already registered")
        self.stream_id = stream_id


class RedundantNeedsBothLinks(AdmissionError, InvalidStreamSpec):
    def __init__(self, name: str):
        super().__init__(f"stream {name!r} is redundant but not assigned to both links")
        self.name = name


class BudgetExceeded(AdmissionError):
    def __init__(self, link: LinkId, direction: Direction, attempted_total: Fraction, capacity: Fraction):
        super().__init__(
            f"{direction.value} load on {link.label} would be {fmt_mbps(attempted_total)} Mbit/s, "
            f"capacity is {fmt_mbps(capacity)} Mbit/s"
        )
        self.link = link
        self.direction = direction
        self.attempted_total = attempted_total
        self.capacity = capacity


def as_fraction(value: object) -> Fraction:
    """Exact conversion; floats go through their shortest repr so 8.5 stays 17/2 and 0.1 stays 1/10."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def fmt_mbps(value: Fraction) -> str:
    """One decimal place, which is the precision of every budget we deal with."""
    tenths = value * 10
    if tenths.denominator == 1:
        n = tenths.numerator
        sign = "-" if n < 0 else ""
        n = abs(n)
        return f"{sign}{n // 10}.{n % 10}"
    return f"{float(value):.3f}"


@dataclass(frozen=True)
class StreamSpec:
    stream_id: int
    name: str
    direction: Direction
    budget_mbps: Fraction
    links: frozenset[LinkId]
    redundant: bool = False
    nominal_rate_hz: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        object.__setattr__(self, "budget_mbps", as_fraction(self.budget_mbps))
        object.__setattr__(self, "nominal_rate_hz", as_fraction(self.nominal_rate_hz))
        object.__setattr__(self, "links", frozenset(LinkId(link) for link in self.links))
        if not isinstance(self.stream_id, int) or not 0 <= self.stream_id <= 0xFFFF:
            raise InvalidStreamSpec(f"stream_id must be a u16, got {self.stream_id!r}")
        if self.budget_mbps <= 0:
            raise InvalidStreamSpec(f"stream {self.name!r}: budget_mbps must be > 0")
        if self.nominal_rate_hz <= 0:
            raise InvalidStreamSpec(f"stream {self.name!r}: nominal_rate_hz must be > 0")
        if not self.links:
            raise InvalidStreamSpec(f"stream {self.name!r}: needs at least one link")
        if self.redundant and self.links != BOTH_LINKS:
            raise RedundantNeedsBothLinks(self.name)

    @property
    def sorted_links(self) -> tuple[LinkId, ...]:
        return tuple(sorted(self.links))

    def message_bytes(self) -> int:
        """Average message size implied by budget and rate."""
        return int(self.budget_mbps * 1_000_000 / 8 / self.nominal_rate_hz)


@dataclass(frozen=True)
class BudgetRow:
    stream_id: int
    name: str
    direction: Direction
    budget_mbps: Fraction
    links: frozenset[LinkId]
    redundant: bool


@dataclass(frozen=True)
class BudgetTable:
    rows: tuple[BudgetRow, ...]
    totals: Mapping[tuple[Direction, LinkId], Fraction]
    capacities: Mapping[LinkId, Fraction]

    def total(self, direction: Direction, link: LinkId) -> Fraction:
        return self.totals[(direction, link)]

    def violations(self) -> list[tuple[Direction, LinkId, Fraction, Fraction]]:
        return [
            (d, link, total, self.capacities[link])
            for (d, link), total in self.totals.items()
            if total > self.capacities[link]
        ]

    def to_dict(self) -> dict:
        out: dict = {}
        for direction in Direction:
            out[direction.value] = {
                "streams": [
                    {
                        "id": r.stream_id,
                        "name": r.name,
                        "mbps": fmt_mbps(r.budget_mbps),
                        "links": [link.label for link in sorted(r.links)],
                        "redundant": r.redundant,
                    }
                    for r in self.rows
                    if r.direction is direction
                ],
                "totals": {link.label: fmt_mbps(self.totals[(direction, link)]) for link in LinkId},
            }
        out["capacities"] = {link.label: fmt_mbps(cap) for link, cap in sorted(self.capacities.items())}
        return out

    def format_text(self) -> str:
        lines: list[str] = []
        names = [r.name + (" (R)" if r.redundant else "") for r in self.rows]
        width = max([len(n) for n in names] + [len("Total [MBit/s]")])
        header = f"{'Channel':<{width}}  {'MBit/s':>7}  {'5 GHz':>6}  {'2.4 GHz':>7}"
        for direction in Direction:
            title = "Downlink from avatar" if direction is Direction.DOWNLINK else "Uplink to avatar"
            lines.append(title)
            lines.append(header)
            lines.append("-" * len(header))
            for r, name in zip(self.rows, names):
                if r.direction is not direction:
                    continue
                mark5 = "x" if LinkId.BAND5 in r.links else "-"
                mark24 = "x" if LinkId.BAND24 in r.links else "-"
                lines.append(f"{name:<{width}}  {fmt_mbps(r.budget_mbps):>7}  {mark5:>6}  {mark24:>7}")
            lines.append("-" * len(header))
            t5 = fmt_mbps(self.totals[(direction, LinkId.BAND5)])
            t24 = fmt_mbps(self.totals[(direction, LinkId.BAND24)])
            lines.append(f"{'Total [MBit/s]':<{width}}  {'':>7}  {t5:>6}  {t24:>7}")
            lines.append("")
        caps = ", ".join(f"{link.label} {fmt_mbps(c)}" for link, c in sorted(self.capacities.items()))
        lines.append(f"Capacity [MBit/s] per direction: {caps}")
        return "\n".join(lines)


def _totals(streams: Iterable[StreamSpec]) -> dict[tuple[Direction, LinkId], Fraction]:
    totals = {(d, link): Fraction(0) for d in Direction for link in LinkId}
    for s in streams:
        for link in s.links:
            totals[(s.direction, link)] += s.budget_mbps
    return totals


@dataclass(frozen=True)
class StreamRegistry:
    """Immutable set of admitted streams.  ``register`` returns a new registry."""

    streams: tuple[StreamSpec, ...] = ()
    link_capacity_mbps: Mapping[LinkId, Fraction] = field(default_factory=lambda: dict(DEFAULT_CAPACITY_MBPS))

    def __post_init__(self) -> None:
        caps = {LinkId(k): as_fraction(v) for k, v in self.link_capacity_mbps.items()}
        for link in LinkId:
            caps.setdefault(link, DEFAULT_CAPACITY_MBPS[link])
            if caps[link] <= 0:
                raise InvalidStreamSpec(f"capacity of {link.label} must be > 0")
        object.__setattr__(self, "link_capacity_mbps", caps)
        object.__setattr__(self, "_by_id", {s.stream_id: s for s in self.streams})

    def __len__(self) -> int:
        return len(self.streams)

    def __iter__(self):
        return iter(self.streams)

    def __contains__(self, stream_id: object) -> bool:
        return stream_id in self._by_id

    def get(self, stream_id: int) -> StreamSpec | None:
        return self._by_id.get(stream_id)

    def __getitem__(self, stream_id: int) -> StreamSpec:
        return self._by_id[stream_id]

    def by_name(self, name: str) -> StreamSpec:
        for s in self.streams:
            if s.name == name:
                return s
        raise KeyError(name)

    def register(self, spec: StreamSpec) -> "StreamRegistry":
        if spec.stream_id in self._by_id:
            raise DuplicateStreamId(spec.stream_id)
        if spec.redundant and spec.links != BOTH_LINKS:
            raise RedundantNeedsBothLinks(spec.name)
        totals = _totals(self.streams)
        for link in spec.sorted_links:
            attempted = totals[(spec.direction, link)] + spec.budget_mbps
            capacity = self.link_capacity_mbps[link]
            if attempted > capacity:
                raise BudgetExceeded(link, spec.direction, attempted, capacity)
        return StreamRegistry(self.streams + (spec,), self.link_capacity_mbps)


def register_stream(registry: StreamRegistry, spec: StreamSpec) -> StreamRegistry:
    return registry.register(spec)


def build_registry(specs: Iterable[StreamSpec], capacities: Mapping[LinkId, object] | None = None) -> StreamRegistry:
    registry = StreamRegistry(link_capacity_mbps=capacities or DEFAULT_CAPACITY_MBPS)
    for spec in specs:
        registry = registry.register(spec)
    return registry


def budget_table(
    registry_or_streams: StreamRegistry | Iterable[StreamSpec],
    capacities: Mapping[LinkId, Fraction] | None = None,
) -> BudgetTable:
    """Totals per (direction, link).

    Also accepts a bare iterable of specs so an over-budget configuration can
    still be tabulated for diagnostics.
    """
    if isinstance(registry_or_streams, StreamRegistry):
        streams = registry_or_streams.streams
        caps = registry_or_streams.link_capacity_mbps
    else:
        streams = tuple(registry_or_streams)
        caps = {LinkId(k): as_fraction(v) for k, v in (capacities or DEFAULT_CAPACITY_MBPS).items()}
    rows = tuple(
        BudgetRow(s.stream_id, s.name, s.direction, s.budget_mbps, s.links, s.redundant) for s in streams
    )
    return BudgetTable(rows=rows, totals=_totals(streams), capacities=dict(caps))


def _spec(sid, name, direction, mbps, links, redundant, rate):
    return StreamSpec(sid, name, direction, Fraction(mbps), frozenset(links), redundant, Fraction(rate))


_D, _U = Direction.DOWNLINK, Direction.UPLINK
_B5, _B24 = LinkId.BAND5, LinkId.BAND24

# Stream table of the avatar system.  Rates for the cameras (46 Hz), arm
# control (1 kHz) and audio (48 kHz / 512-sample buffers) are the system's
# own; the others are plausible message rates chosen here.
XPRIZE_STREAMS: tuple[StreamSpec, ...] = (
    _spec(1, "Arm feedback", _D, "8.5", {_B5}, False, 1000),
    _spec(2, "Transforms", _D, "4.1", {_B5}, False, 100),
    _spec(3, "Main cameras", _D, "14.7", {_B5}, False, 46),
    _spec(4, "Hand camera", _D, "5.5", {_B24}, False, 30),
    _spec(5, "Diagnostics", _D, "0.4", {_B5, _B24}, False, 10),
    _spec(6, "Audio", _D, "0.4", {_B5, _B24}, True, "375/4"),
    _spec(101, "Arm control", _U, "4.9", {_B5, _B24}, True, 1000),
    _spec(102, "Transforms", _U, "1.4", {_B5}, False, 100),
    _spec(103, "Operator face", _U, "5.7", {_B24}, False, 30),
    _spec(104, "Audio", _U, "0.4", {_B5, _B24}, True, "375/4"),
)
