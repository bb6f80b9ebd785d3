"""Deterministic discrete-event model of the two wireless links.

Each link drops, delays and shapes datagrams independently.  Randomness comes
from one :class:`random.Random` per link, seeded from the master seed and the
link name (``"telelink/<seed>/<link>"``), so a fault on one link never shifts
the other link's draws.  Every injection consumes exactly two draws (loss,
jitter) whatever happens to the datagram, so a blackout does not perturb the
outcome of later packets on the same link either.

Capacity is enforced per link and direction with a token bucket refilled
continuously at ``capacity_mbps`` (depth ``burst_bytes``).  A datagram that
finds the bucket empty waits for tokens; if the backlog would exceed
``queue_limit_bytes`` it is tail-dropped.
"""
from __future__ import annotations

import heapq
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .core import Direction, LinkId, TelelinkError, as_fraction


class ConfigError(TelelinkError, ValueError):
    """Invalid configuration.  ``path`` points at the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class LinkConfig:
    link: LinkId
    capacity_mbps: Fraction = Fraction(50)
    loss_prob: float = 0.0
    base_latency_us: int = 5_000
    jitter_us: int = 0
    queue_limit_bytes: int = 1 << 20
    burst_bytes: int = 1 << 17

    def __post_init__(self) -> None:
        object.__setattr__(self, "link", LinkId(self.link))
        object.__setattr__(self, "capacity_mbps", as_fraction(self.capacity_mbps))
        if self.capacity_mbps <= 0:
            raise ConfigError("capacity_mbps must be > 0", "capacity_mbps")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError("loss_prob must lie in [0, 1]", "loss_prob")
        for name in ("base_latency_us", "jitter_us"):
            if getattr(self, name) < 0:
                raise ConfigError("must be >= 0", name)
        if self.queue_limit_bytes <= 0:
            raise ConfigError("must be > 0", "queue_limit_bytes")
        if self.burst_bytes <= 0:
            raise ConfigError("must be > 0", "burst_bytes")


# Fault events.  Link faults are consumed by the simulator; node and system
# faults are carried through for the scenario runner.

@dataclass(frozen=True)
class Blackout:
    link: LinkId
    duration_us: int


@dataclass(frozen=True)
class LossSpike:
    link: LinkId
    prob: float
    duration_us: int


@dataclass(frozen=True)
class NodeCrash:
    node_id: str


@dataclass(frozen=True)
class NodeHang:
    node_id: str


@dataclass(frozen=True)
class SystemHang:
    pass


@dataclass(frozen=True)
class DeviceStop:
    device_id: str
    hard: bool = False


@dataclass(frozen=True)
class EStop:
    hardware: bool
    engaged: bool


FaultKind = Blackout | LossSpike | NodeCrash | NodeHang | SystemHang | DeviceStop | EStop


@dataclass(frozen=True)
class FaultEvent:
    at_us: int
    kind: FaultKind

    def __post_init__(self) -> None:
        if self.at_us < 0:
            raise ConfigError("at_us must be >= 0", "at_us")
        duration = getattr(self.kind, "duration_us", None)
        if duration is not None and duration <= 0:
            raise ConfigError("duration_us must be > 0", "duration_us")
        prob = getattr(self.kind, "prob", None)
        if prob is not None and not 0.0 <= prob <= 1.0:
            raise ConfigError("prob must lie in [0, 1]", "prob")


class FaultSchedule(tuple):
    """Fault events sorted by time (stable for equal times)."""

    def __new__(cls, events: Iterable[FaultEvent] = ()):
        return super().__new__(cls, sorted(events, key=lambda e: e.at_us))

    def link_events(self, link: LinkId) -> list[FaultEvent]:
        return [e for e in self if isinstance(e.kind, (Blackout, LossSpike)) and e.kind.link is link]

    def other_events(self) -> list[FaultEvent]:
        return [e for e in self if not isinstance(e.kind, (Blackout, LossSpike))]


class Disposition:
    QUEUED = "queued"
    LOSS = "loss"
    BLACKOUT = "blackout"
    SATURATION = "saturation"


class Delivery(NamedTuple):
    arrival_us: int
    link: LinkId
    datagram: bytes
    direction: Direction = Direction.DOWNLINK


@dataclass
class LinkCounters:
    injected: int = 0
    delivered: int = 0
    loss_dropped: int = 0
    blackout_dropped: int = 0
    saturation_dropped: int = 0
    bytes_delivered: int = 0

    @property
    def dropped(self) -> int:
        return self.loss_dropped + self.blackout_dropped + self.saturation_dropped


@dataclass
class _Shaper:
    """Token bucket in virtual-scheduling form.

    ``tat`` is the instant the bucket is full again; before that it is
    ``(tat - now) / us_per_byte`` bytes short.  A datagram of ``size`` bytes
    leaves once that shortfall plus ``size`` fits the bucket depth.
    """

    us_per_byte: float
    tolerance_us: float
    queue_limit: int
    tat: float = 0.0
    backlog: deque = field(default_factory=deque)  # (departure_us, size)
    backlog_bytes: int = 0

    def admit(self, now: int, size: int) -> float | None:
        """Departure time for a datagram arriving at ``now``, or None if tail-dropped."""
        backlog = self.backlog
        while backlog and backlog[0][0] <= now:
            self.backlog_bytes -= backlog.popleft()[1]
        cost = self.us_per_byte * size
        tat = self.tat
        start = tat + cost - self.tolerance_us
        depart = start if start > now else now
        if depart > now and self.backlog_bytes + size > self.queue_limit:
            return None
        self.tat = (tat if tat > now else now) + cost
        if depart > now:
            backlog.append((depart, size))
            self.backlog_bytes += size
        return depart


class _Link:
    def __init__(self, config: LinkConfig, rng: random.Random, faults: Sequence[FaultEvent]) -> None:
        self.config = config
        self.rng = rng
        us_per_byte = float(Fraction(8) / config.capacity_mbps)  # 1 Mbit/s = 1 bit/us
        self.shapers = {
            d: _Shaper(us_per_byte, us_per_byte * config.burst_bytes, config.queue_limit_bytes) for d in Direction
        }
        self.blackouts = [(e.at_us, e.at_us + e.kind.duration_us) for e in faults if isinstance(e.kind, Blackout)]
        self.spikes = [
            (e.at_us, e.at_us + e.kind.duration_us, e.kind.prob) for e in faults if isinstance(e.kind, LossSpike)
        ]
        self.counters = LinkCounters()

    def in_blackout(self, t: int) -> bool:
        return any(start <= t < end for start, end in self.blackouts)

    def loss_prob(self, t: int) -> float:
        p = self.config.loss_prob
        for start, end, prob in self.spikes:
            if start <= t < end and prob > p:
                p = prob
        return p


class LinkSimulator:
    """Two links, one clock, one event queue keyed (time, insertion order)."""

    def __init__(self, configs: Iterable[LinkConfig], seed: int = 0, faults: Iterable[FaultEvent] = ()) -> None:
        configs = list(configs)
        by_link = {c.link: c for c in configs}
        if len(by_link) != len(configs):
            raise ConfigError("duplicate link config", "links")
        missing = [link.label for link in LinkId if link not in by_link]
        if missing:
            raise ConfigError(f"missing config for {', '.join(missing)}", "links")
        self.seed = seed
        self.faults = FaultSchedule(faults)
        self.links = {
            link: _Link(by_link[link], link_rng(seed, link), self.faults.link_events(link)) for link in LinkId
        }
        self.now_us = 0
        self._queue: list[tuple[float, int, Delivery]] = []
        self._counter = 0

    def counters(self, link: LinkId) -> LinkCounters:
        return self.links[link].counters

    @property
    def in_flight(self) -> int:
        return len(self._queue)

    def injected(self) -> int:
        return sum(l.counters.injected for l in self.links.values())

    def inject(self, link: LinkId, datagram: bytes, now_us: int | None = None,
               direction: Direction = Direction.DOWNLINK) -> str:
        """Offer a datagram to a link at the current clock.  Returns its disposition."""
        if now_us is None:
            now_us = self.now_us
        if now_us < self.now_us:
            raise ValueError(f"cannot inject at {now_us} us, clock is at {self.now_us} us")
        lk = self.links[link]
        c = lk.counters
        c.injected += 1
        u_loss = lk.rng.random()
        u_jitter = lk.rng.random()
        if lk.blackouts and lk.in_blackout(now_us):
            c.blackout_dropped += 1
            return Disposition.BLACKOUT
        p = lk.loss_prob(now_us) if lk.spikes else lk.config.loss_prob
        if u_loss < p:
            c.loss_dropped += 1
            return Disposition.LOSS
        depart = lk.shapers[direction].admit(now_us, len(datagram))
        if depart is None:
            c.saturation_dropped += 1
            return Disposition.SATURATION
        jitter = int(u_jitter * (lk.config.jitter_us + 1)) if lk.config.jitter_us else 0
        arrival = depart + lk.config.base_latency_us + jitter
        heapq.heappush(self._queue, (arrival, self._counter, Delivery(0, link, datagram, direction)))
        self._counter += 1
        return Disposition.QUEUED

    def step(self, until_us: int) -> list[Delivery]:
        """Fire every arrival with time <= until_us and advance the clock there."""
        if until_us < self.now_us:
            raise ValueError(f"cannot step back from {self.now_us} to {until_us}")
        out = []
        q = self._queue
        while q and q[0][0] <= until_us:
            arrival, _, d = heapq.heappop(q)
            t = _ceil_us(arrival)
            lk = self.links[d.link].counters
            lk.delivered += 1
            lk.bytes_delivered += len(d.datagram)
            out.append(Delivery(t, d.link, d.datagram, d.direction))
        self.now_us = until_us
        return out

    def next_arrival_us(self) -> int | None:
        return _ceil_us(self._queue[0][0]) if self._queue else None

    def drain(self) -> list[Delivery]:
        if not self._queue:
            return []
        last = max(_ceil_us(a) for a, _, _ in self._queue)
        return self.step(max(last, self.now_us))


def _ceil_us(t: float | int) -> int:
    return t if isinstance(t, int) else math.ceil(t)


def link_rng(seed: int, link: LinkId) -> random.Random:
    """Independent generator stream for one link (string seeds hash via SHA-512, stable across runs)."""
    return random.Random(f"telelink/{seed}/{link.label}")


def seeded(configs: Iterable[LinkConfig], seed: int, faults: Iterable[FaultEvent] = ()) -> LinkSimulator:
    return LinkSimulator(configs, seed, faults)


def default_links(**overrides) -> list[LinkConfig]:
    caps = {LinkId.BAND5: Fraction(50), LinkId.BAND24: Fraction(20)}
    return [LinkConfig(link, capacity_mbps=caps[link], **overrides) for link in LinkId]
