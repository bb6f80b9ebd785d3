"""Periodic health checks over telemetry snapshots.

A check is a pure predicate over a :class:`TelemetrySnapshot`.  The monitor
evaluates every due check on each tick (1 Hz by default), marks checks that
have not been evaluated for ``staleness_limit`` periods as stale, and folds the
results into a single go/no-go verdict.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .core import LinkId, TelelinkError

DEFAULT_PERIOD_US = 1_000_000


class Status(enum.IntEnum):
    """Severity order; Stale (no evidence) ranks between Warn and Fail."""

    OK = 0
    WARN = 1
    STALE = 2
    FAIL = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class Verdict:
    status: Status
    message: str = ""


OK = Verdict(Status.OK)


def warn(message: str) -> Verdict:
    return Verdict(Status.WARN, message)


def fail(message: str) -> Verdict:
    return Verdict(Status.FAIL, message)


class DuplicateCheckId(TelelinkError):
    pass


@dataclass(frozen=True)
class StreamTelemetry:
    sent: int = 0
    delivered: int = 0
    sent_recent: int = 0
    delivered_recent: int = 0
    p99_us: int | None = None

    @property
    def loss_ratio_recent(self) -> float:
        if self.sent_recent <= 0:
            return 0.0
        return max(0.0, 1.0 - self.delivered_recent / self.sent_recent)


@dataclass(frozen=True)
class LinkTelemetry:
    injected: int = 0
    delivered: int = 0
    dropped: int = 0
    injected_recent: int = 0
    dropped_recent: int = 0

    @property
    def loss_ratio_recent(self) -> float:
        return self.dropped_recent / self.injected_recent if self.injected_recent else 0.0


@dataclass(frozen=True)
class NodeTelemetry:
    up: bool
    heartbeat_age_us: int
    restarts: int = 0


@dataclass(frozen=True)
class TelemetrySnapshot:
    """Everything a check may look at.  ``*_recent`` counters cover the last monitor period."""

    now_us: int
    streams: Mapping[str, StreamTelemetry] = field(default_factory=dict)
    links: Mapping[LinkId, LinkTelemetry] = field(default_factory=dict)
    nodes: Mapping[str, NodeTelemetry] = field(default_factory=dict)
    devices: Mapping[str, str] = field(default_factory=dict)
    software_estop: bool = False
    hardware_estop: bool = False


Predicate = Callable[[TelemetrySnapshot], Verdict]


@dataclass(frozen=True)
class CheckDefinition:
    check_id: str
    description: str
    predicate: Predicate
    period_us: int = DEFAULT_PERIOD_US
    staleness_limit: int = 3

    def __post_init__(self) -> None:
        if self.period_us <= 0:
            raise ValueError(f"check {self.check_id!r}: period_us must be > 0")
        if self.staleness_limit <= 0:
            raise ValueError(f"check {self.check_id!r}: staleness_limit must be > 0")


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    status: Status
    message: str
    evaluated_at_us: int | None


@dataclass(frozen=True)
class StatusTable:
    at_us: int
    rows: tuple[CheckResult, ...]

    @property
    def aggregate(self) -> Status:
        return max((r.status for r in self.rows), default=Status.OK)

    def to_dict(self) -> dict:
        return {
            "at_us": self.at_us,
            "aggregate": self.aggregate.label,
            "checks": [
                {
                    "id": r.check_id,
                    "status": r.status.label,
                    "message": r.message,
                    "evaluated_at_us": r.evaluated_at_us,
                }
                for r in self.rows
            ],
        }


def all_green(table: StatusTable) -> bool:
    return table.aggregate is Status.OK


@dataclass
class _Slot:
    definition: CheckDefinition
    last_eval_us: int | None = None
    verdict: Verdict | None = None


class Monitor:
    def __init__(self) -> None:
        self._slots: dict[str, _Slot] = {}
        self.last_tick_us: int | None = None

    def __len__(self) -> int:
        return len(self._slots)

    def register_check(self, definition: CheckDefinition) -> "Monitor":
        if definition.check_id in self._slots:
            raise DuplicateCheckId(f"check {definition.check_id!r} is already registered")
        self._slots[definition.check_id] = _Slot(definition)
        return self

    def tick(self, snapshot: TelemetrySnapshot) -> StatusTable:
        now = snapshot.now_us
        if self.last_tick_us is not None and now < self.last_tick_us:
            raise ValueError(f"tick at {now} us precedes previous tick at {self.last_tick_us} us")
        self.last_tick_us = now
        for slot in self._slots.values():
            if slot.last_eval_us is not None and now < slot.last_eval_us + slot.definition.period_us:
                continue
            try:
                verdict = slot.definition.predicate(snapshot)
                if not isinstance(verdict, Verdict):
                    raise TypeError(f"predicate returned {type(verdict).__name__}, expected Verdict")
            except Exception as exc:  # isolate faulty predicates
                verdict = fail(f"check raised {type(exc).__name__}: {exc}")
            slot.verdict = verdict
            slot.last_eval_us = now
        return self.table(now)

    def table(self, now_us: int) -> StatusTable:
        """Current results as seen at ``now_us`` without new evidence."""
        rows = []
        for check_id, slot in self._slots.items():
            d = slot.definition
            if slot.verdict is None:
                rows.append(CheckResult(check_id, Status.STALE, "not evaluated yet", None))
            elif now_us - slot.last_eval_us >= d.staleness_limit * d.period_us:
                rows.append(CheckResult(check_id, Status.STALE, "no fresh evaluation", slot.last_eval_us))
            else:
                rows.append(CheckResult(check_id, slot.verdict.status, slot.verdict.message, slot.last_eval_us))
        return StatusTable(now_us, tuple(rows))


def register_check(monitor: Monitor, definition: CheckDefinition) -> Monitor:
    return monitor.register_check(definition)


def tick(monitor: Monitor, snapshot: TelemetrySnapshot) -> StatusTable:
    return monitor.tick(snapshot)


# Standard checks ----------------------------------------------------------

def stream_alive(stream: str) -> CheckDefinition:
    def predicate(s: TelemetrySnapshot) -> Verdict:
        st = s.streams[stream]
        if st.delivered_recent > 0:
            return OK
        return fail(f"no data in last period ({st.sent_recent} sent)")

    return CheckDefinition(f"stream.{stream}.alive", f"{stream} produces data", predicate)


def stream_loss_below(stream: str, warn_ratio: float, fail_ratio: float) -> CheckDefinition:
    def predicate(s: TelemetrySnapshot) -> Verdict:
        ratio = s.streams[stream].loss_ratio_recent
        if ratio >= fail_ratio:
            return fail(f"loss {ratio:.1%}")
        if ratio >= warn_ratio:
            return warn(f"loss {ratio:.1%}")
        return OK

    return CheckDefinition(f"stream.{stream}.loss", f"{stream} loss below {fail_ratio:.0%}", predicate)


def stream_latency_below(stream: str, p99_limit_us: int) -> CheckDefinition:
    def predicate(s: TelemetrySnapshot) -> Verdict:
        p99 = s.streams[stream].p99_us
        if p99 is None:
            return warn("no latency samples")
        if p99 > p99_limit_us:
            return fail(f"p99 {p99 / 1000:.1f} ms > {p99_limit_us / 1000:.1f} ms")
        return OK

    return CheckDefinition(f"stream.{stream}.latency", f"{stream} p99 latency bound", predicate)


def link_delivering(link: LinkId, warn_ratio: float = 0.2, fail_ratio: float = 0.5) -> CheckDefinition:
    def predicate(s: TelemetrySnapshot) -> Verdict:
        lt = s.links[link]
        ratio = lt.loss_ratio_recent
        if lt.injected_recent and ratio >= fail_ratio:
            return fail(f"{lt.dropped_recent}/{lt.injected_recent} datagrams dropped")
        if lt.injected_recent and ratio >= warn_ratio:
            return warn(f"{lt.dropped_recent}/{lt.injected_recent} datagrams dropped")
        return OK

    return CheckDefinition(f"link.{link.label.lower()}.delivering", f"{link.label} carries traffic", predicate)


def node_heartbeat(node: str, max_age_us: int) -> CheckDefinition:
    def predicate(s: TelemetrySnapshot) -> Verdict:
        n = s.nodes[node]
        if not n.up:
            return fail("down")
        if n.heartbeat_age_us > max_age_us:
            return fail(f"heartbeat {n.heartbeat_age_us / 1e6:.1f} s old")
        return OK

    return CheckDefinition(f"node.{node}.heartbeat", f"{node} is alive", predicate)


def device_active(device: str) -> CheckDefinition:
    def predicate(s: TelemetrySnapshot) -> Verdict:
        state = s.devices[device]
        if state == "Active":
            return OK
        if state in ("Restarting", "FadingIn"):
            return warn(state)
        return fail(state)

    return CheckDefinition(f"device.{device}.active", f"{device} is connected and active", predicate)


def estop_clear() -> CheckDefinition:
    def predicate(s: TelemetrySnapshot) -> Verdict:
        if s.hardware_estop:
            return fail("hardware E-stop engaged")
        if s.software_estop:
            return fail("software E-stop engaged")
        return OK

    return CheckDefinition("safety.estop", "no E-stop engaged", predicate)
