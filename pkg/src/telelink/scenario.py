"""Scenario files: streams, links, faults, nodes, devices and checks in one JSON document.

See ``docs/scenario-schema.md`` for the format.  Every validation error is a
:class:`ConfigError` whose ``path`` names the offending field, e.g.
``streams[3].budget_mbps``.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .core import (
    AdmissionError,
    Direction,
    InvalidStreamSpec,
    LinkId,
    StreamRegistry,
    StreamSpec,
    as_fraction,
    DEFAULT_CAPACITY_MBPS,
)
from .netsim import (
    Blackout,
    ConfigError,
    DeviceStop,
    EStop,
    FaultEvent,
    FaultSchedule,
    LinkConfig,
    LossSpike,
    NodeCrash,
    NodeHang,
    SystemHang,
)
from .recovery import DeviceSpec, NodeSpec, WatchdogConfig

SCHEMA = "telelink.scenario/1"
SECOND = 1_000_000


def stream_key(spec: StreamSpec) -> str:
    slug = re.sub(r"[^a-z0-9]+", "_", spec.name.lower()).strip("_")
    return f"{spec.direction.value}.{slug}"


@dataclass(frozen=True)
class CheckConfig:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    duration_us: int
    registry: StreamRegistry
    links: tuple[LinkConfig, ...]
    faults: FaultSchedule = FaultSchedule()
    nodes: tuple[NodeSpec, ...] = ()
    devices: tuple[DeviceSpec, ...] = ()
    watchdog: WatchdogConfig | None = None
    feed_period_us: int = SECOND
    stream_nodes: dict = field(default_factory=dict)  # stream_id -> producer node id
    device_drivers: dict = field(default_factory=dict)  # device_id -> driver node id
    checks: tuple[CheckConfig, ...] | None = None  # None: standard set
    sysmon_period_us: int = SECOND
    control_period_us: int = 10_000

    def __post_init__(self) -> None:
        if self.duration_us <= 0:
            raise ConfigError("must be > 0", "duration_us")


class _Reader:
    """Typed field access that remembers where it is in the document."""

    def __init__(self, data: Any, path: str = ""):
        self.data = data
        self.path = path

    def sub(self, key: str | int) -> "_Reader":
        child = f"{self.path}[{key}]" if isinstance(key, int) else (f"{self.path}.{key}" if self.path else key)
        if isinstance(key, int):
            return _Reader(self.data[key], child)
        return _Reader(self.data.get(key), child)

    def at(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def has(self, key: str) -> bool:
        return isinstance(self.data, dict) and key in self.data

    def obj(self) -> dict:
        if not isinstance(self.data, dict):
            raise ConfigError("expected an object", self.path)
        return self.data

    def items(self) -> list["_Reader"]:
        if self.data is None:
            return []
        if not isinstance(self.data, list):
            raise ConfigError("expected a list", self.path)
        return [self.sub(i) for i in range(len(self.data))]

    def get(self, key: str, kind, default=..., check=None):
        data = self.obj()
        if key not in data:
            if default is ...:
                raise ConfigError("required field missing", self.at(key))
            return default
        value = data[key]
        try:
            value = kind(value)
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc) or "invalid value", self.at(key)) from None
        if check is not None and not check(value):
            raise ConfigError(f"invalid value {data[key]!r}", self.at(key))
        return value

    def time_us(self, stem: str, default=...) -> int:
        """Read ``<stem>_us`` (integer microseconds) or ``<stem>_s`` (seconds)."""
        if self.has(f"{stem}_us"):
            return self.get(f"{stem}_us", _int, check=lambda v: v >= 0)
        if self.has(f"{stem}_s"):
            seconds = self.get(f"{stem}_s", as_fraction, check=lambda v: v >= 0)
            return int(seconds * SECOND)
        if default is ...:
            raise ConfigError("required field missing", self.at(f"{stem}_us"))
        return default


def _int(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise TypeError(f"expected an integer, got {value!r}")
    return value


def _bool(value: Any) -> bool:
    if not isinstance(value, bool):
        raise TypeError(f"expected true or false, got {value!r}")
    return value


def _str(value: Any) -> str:
    if not isinstance(value, str) or not value:
        raise TypeError(f"expected a non-empty string, got {value!r}")
    return value


def _links(value: Any) -> frozenset[LinkId]:
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list):
        raise TypeError("expected a list of link names")
    return frozenset(LinkId.parse(v) for v in value)


def _capacities(r: _Reader) -> dict[LinkId, Fraction]:
    caps = dict(DEFAULT_CAPACITY_MBPS)
    if r.data is None:
        return caps
    for key, value in r.obj().items():
        try:
            link = LinkId.parse(key)
        except ValueError as exc:
            raise ConfigError(str(exc), r.at(key)) from None
        caps[link] = r.get(key, as_fraction, check=lambda v: v > 0)
    return caps


def _stream(r: _Reader) -> StreamSpec:
    try:
        return StreamSpec(
            stream_id=r.get("id", _int, check=lambda v: 0 <= v <= 0xFFFF),
            name=r.get("name", _str),
            direction=r.get("direction", Direction.parse),
            budget_mbps=r.get("budget_mbps", as_fraction),
            links=r.get("links", _links),
            redundant=r.get("redundant", _bool, False),
            nominal_rate_hz=r.get("rate_hz", as_fraction, Fraction(1)),
        )
    except InvalidStreamSpec as exc:
        raise ConfigError(str(exc), r.path) from None


def load_registry_config(data: dict, path: str = "") -> tuple[list[StreamSpec], dict[LinkId, Fraction]]:
    """Parse the stream part of a scenario without admission control."""
    root = _Reader(data, path)
    root.obj()
    caps = _capacities(root.sub("capacities_mbps"))
    streams = [_stream(r) for r in root.sub("streams").items()]
    return streams, caps


def admit(streams: list[StreamSpec], caps: dict[LinkId, Fraction]) -> StreamRegistry:
    registry = StreamRegistry(link_capacity_mbps=caps)
    for i, spec in enumerate(streams):
        try:
            registry = registry.register(spec)
        except AdmissionError as exc:
            raise ConfigError(str(exc), f"streams[{i}]") from exc
    return registry


def _fault(r: _Reader) -> FaultEvent:
    kind = r.get("kind", _str)
    at = r.time_us("at")
    if kind == "blackout":
        payload = Blackout(r.get("link", LinkId.parse), r.time_us("duration"))
    elif kind == "loss_spike":
        payload = LossSpike(
            r.get("link", LinkId.parse),
            r.get("prob", float, check=lambda p: 0.0 <= p <= 1.0),
            r.time_us("duration"),
        )
    elif kind == "node_crash":
        payload = NodeCrash(r.get("node", _str))
    elif kind == "node_hang":
        payload = NodeHang(r.get("node", _str))
    elif kind == "system_hang":
        payload = SystemHang()
    elif kind == "device_stop":
        payload = DeviceStop(r.get("device", _str), r.get("hard", _bool, False))
    elif kind == "estop":
        which = r.get("type", _str, check=lambda v: v in ("software", "hardware"))
        payload = EStop(which == "hardware", r.get("engaged", _bool))
    else:
        raise ConfigError(f"unknown fault kind {kind!r}", r.at("kind"))
    try:
        return FaultEvent(at, payload)
    except ConfigError as exc:
        raise ConfigError(str(exc), f"{r.path}.{exc.path}") from None


def _link_config(r: _Reader, caps: dict[LinkId, Fraction]) -> LinkConfig:
    link = r.get("link", LinkId.parse)
    try:
        return LinkConfig(
            link=link,
            capacity_mbps=r.get("capacity_mbps", as_fraction, caps[link]),
            loss_prob=r.get("loss_prob", float, 0.0),
            base_latency_us=r.time_us("base_latency", 5_000),
            jitter_us=r.time_us("jitter", 0),
            queue_limit_bytes=r.get("queue_limit_bytes", _int, 1 << 20),
            burst_bytes=r.get("burst_bytes", _int, 1 << 17),
        )
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], r.at(exc.path)) from None


def _check(r: _Reader) -> CheckConfig:
    data = dict(r.obj())
    kind = r.get("kind", _str)
    data.pop("kind")
    return CheckConfig(kind, data)


def load_scenario(source: str | Path | dict, seed: int | None = None) -> Scenario:
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"no such file: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None
    root = _Reader(data)
    root.obj()
    schema = root.get("schema", str, SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported schema {schema!r} (expected {SCHEMA!r})", "schema")

    streams, caps = load_registry_config(data)
    registry = admit(streams, caps)

    link_configs = {}
    for r in root.sub("links").items():
        cfg = _link_config(r, caps)
        if cfg.link in link_configs:
            raise ConfigError(f"{cfg.link.label} configured twice", r.path)
        link_configs[cfg.link] = cfg
    for link in LinkId:
        link_configs.setdefault(link, LinkConfig(link, capacity_mbps=caps[link]))

    nodes = []
    for r in root.sub("nodes").items():
        try:
            nodes.append(
                NodeSpec(
                    node_id=r.get("node_id", _str),
                    heartbeat_period_us=r.time_us("heartbeat_period", SECOND),
                    stuck_multiplier=r.get("stuck_multiplier", _int, 3),
                    restart_duration_us=r.time_us("restart_duration", SECOND),
                )
            )
        except ValueError as exc:
            raise ConfigError(str(exc), r.path) from None
    node_ids = [n.node_id for n in nodes]
    if len(set(node_ids)) != len(node_ids):
        raise ConfigError("duplicate node_id", "nodes")

    stream_nodes = {}
    for i, r in enumerate(root.sub("streams").items()):
        if r.has("node"):
            node = r.get("node", _str)
            if node not in node_ids:
                raise ConfigError(f"unknown node {node!r}", r.at("node"))
            stream_nodes[streams[i].stream_id] = node

    devices, drivers = [], {}
    for r in root.sub("devices").items():
        try:
            spec = DeviceSpec(
                device_id=r.get("device_id", _str),
                dof=r.get("dof", _int, 7),
                soft_restart_us=r.time_us("soft_restart", 3 * SECOND),
                hard_restart_us=r.time_us("hard_restart", 10 * SECOND),
                fade_us=r.time_us("fade", 2 * SECOND),
            )
        except ValueError as exc:
            raise ConfigError(str(exc), r.path) from None
        if r.has("driver"):
            driver = r.get("driver", _str)
            if driver not in node_ids:
                raise ConfigError(f"unknown node {driver!r}", r.at("driver"))
            drivers[spec.device_id] = driver
        devices.append(spec)
    device_ids = [d.device_id for d in devices]
    if len(set(device_ids)) != len(device_ids):
        raise ConfigError("duplicate device_id", "devices")

    faults = []
    for r in root.sub("faults").items():
        event = _fault(r)
        ref = getattr(event.kind, "node_id", None)
        if ref is not None and ref not in node_ids:
            raise ConfigError(f"unknown node {ref!r}", r.at("node"))
        ref = getattr(event.kind, "device_id", None)
        if ref is not None and ref not in device_ids:
            raise ConfigError(f"unknown device {ref!r}", r.at("device"))
        faults.append(event)

    watchdog = None
    feed_period = SECOND
    wd = root.sub("watchdog")
    if wd.data is not None:
        wd.obj()
        try:
            watchdog = WatchdogConfig(wd.time_us("timeout", 5 * SECOND), wd.time_us("reboot_duration", 30 * SECOND))
        except ValueError as exc:
            raise ConfigError(str(exc), "watchdog") from None
        feed_period = wd.time_us("feed_period", SECOND)
        if not 0 < feed_period < watchdog.timeout_us:
            raise ConfigError("feed period must be positive and shorter than the timeout", "watchdog.feed_period_us")

    checks = None
    raw_checks = root.sub("checks")
    if isinstance(raw_checks.data, list):
        checks = tuple(_check(r) for r in raw_checks.items())
    elif raw_checks.data not in (None, "standard"):
        raise ConfigError('expected "standard" or a list of checks', "checks")

    sysmon = root.sub("sysmon")
    sysmon_period = sysmon.time_us("period", SECOND) if sysmon.data is not None else SECOND
    if sysmon_period <= 0:
        raise ConfigError("must be > 0", "sysmon.period_us")
    control_period = root.time_us("control_period", 10_000)
    if control_period <= 0:
        raise ConfigError("must be > 0", "control_period_us")

    return Scenario(
        name=root.get("name", str, "scenario"),
        seed=seed if seed is not None else root.get("seed", _int, 0),
        duration_us=root.time_us("duration"),
        registry=registry,
        links=tuple(link_configs[link] for link in LinkId),
        faults=FaultSchedule(faults),
        nodes=tuple(nodes),
        devices=tuple(devices),
        watchdog=watchdog,
        feed_period_us=feed_period,
        stream_nodes=stream_nodes,
        device_drivers=drivers,
        checks=checks,
        sysmon_period_us=sysmon_period,
        control_period_us=control_period,
    )
