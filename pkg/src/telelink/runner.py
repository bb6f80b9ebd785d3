"""Drive a scenario through the simulated links and the recovery stack.

Two endpoints share one clock: the avatar (downlink senders, uplink
receiver, supervised nodes, arms, watchdog) and the operator station
(uplink senders, downlink receiver, the health monitor).  Within one
microsecond, work happens in this order: arrivals, control tick,
heartbeats and watchdog feeds, monitor tick, stream emissions, scheduled
faults, watchdog expiry.  That order is part of the contract: a feed at
the deadline instant still counts, and a monitor tick at t sees emissions
from [t - period, t).
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Callable

from . import sysmon
from .core import Direction, LinkId, StreamSpec
from .netsim import (
    Blackout,
    ConfigError,
    DeviceStop,
    Disposition,
    EStop,
    LinkSimulator,
    LossSpike,
    NodeCrash,
    NodeHang,
    SystemHang,
)
from .recovery import (
    STOPPED,
    DeviceState,
    EStopState,
    HardStop,
    KillStuck,
    Mode,
    PowerRestored,
    RecoverRequested,
    Respawn,
    SoftStop,
    Supervisor,
    SystemReset,
    Tick,
    Watchdog,
    device_event,
)
from .scenario import CheckConfig, Scenario, stream_key
from .transport import HEADER, Receiver, Sender, nearest_rank

REPORT_SCHEMA = "telelink.report/1"

# event priorities within one microsecond
_CONTROL, _HEARTBEAT, _FEED, _SYSMON, _EMIT, _FAULT, _BOOT, _WATCHDOG = range(8)


class SystemMode:
    UP = "up"
    HUNG = "hung"
    REBOOTING = "rebooting"
    POWER_OFF = "power_off"


@dataclass
class _StreamAccount:
    spec: StreamSpec
    key: str
    period_num: int  # emission k happens at floor(k * num / den) us
    period_den: int
    payload: bytes
    sent: int = 0
    copies: int = 0
    dropped: dict = field(default_factory=lambda: {
        Disposition.LOSS: 0, Disposition.BLACKOUT: 0, Disposition.SATURATION: 0, "endpoint": 0})
    # snapshot bookkeeping
    sent_mark: int = 0
    delivered_mark: int = 0
    latency_mark: int = 0


def operator_pose(dof: int, t_us: int, phase: float = 0.0) -> tuple[float, ...]:
    """Deterministic, slowly moving operator arm pose (radians)."""
    t = t_us / 1e6
    return tuple(0.3 * math.sin(2 * math.pi * 0.2 * t + phase + 0.5 * j) for j in range(dof))


class Run:
    def __init__(self, scenario: Scenario) -> None:
        self.sc = scenario
        registry = scenario.registry
        self.sim = LinkSimulator(scenario.links, scenario.seed, scenario.faults)
        self.tx = {Direction.DOWNLINK: Sender(), Direction.UPLINK: Sender()}
        self.rx = {Direction.DOWNLINK: Receiver(registry), Direction.UPLINK: Receiver(registry)}
        self.accounts: dict[int, _StreamAccount] = {}
        for spec in registry:
            rate = spec.nominal_rate_hz
            period = 1_000_000 / rate
            size = max(0, min(0xFFFF, spec.message_bytes() - HEADER.size))
            self.accounts[spec.stream_id] = _StreamAccount(
                spec, stream_key(spec), period.numerator, period.denominator, bytes(size))
        self.supervisor = Supervisor(scenario.nodes)
        self.hung_nodes: set[str] = set()
        self.devices = {
            d.device_id: DeviceState.initial(operator_pose(d.dof, 0, i)) for i, d in enumerate(scenario.devices)
        }
        self.device_specs = {d.device_id: d for d in scenario.devices}
        self.estop = EStopState()
        self.mode = SystemMode.UP
        self.watchdog = Watchdog(scenario.watchdog) if scenario.watchdog else None
        self.monitor = sysmon.Monitor()
        for definition in build_checks(scenario):
            self.monitor.register_check(definition)
        self.uptime: dict[str, list[int]] = {}
        self.tables: list[sysmon.StatusTable] = []
        self.timeline: list[tuple[int, int, str, str, str]] = []
        self.resets: list[dict] = []
        self.device_recoveries = 0
        self.link_marks = {link: (0, 0) for link in LinkId}
        self._queue: list = []
        self._n = 0
        self._timeline_n = 0

    # scheduling ------------------------------------------------------------

    def at(self, t: int, prio: int, fn: Callable[[int], None]) -> None:
        heapq.heappush(self._queue, (t, prio, self._n, fn))
        self._n += 1

    def log(self, t: int, kind: str, subject: str = "", detail: str = "") -> None:
        self.timeline.append((t, self._timeline_n, kind, subject, detail))
        self._timeline_n += 1

    # traffic ---------------------------------------------------------------

    def _avatar_side(self, direction: Direction) -> bool:
        return direction is Direction.DOWNLINK

    def _emitter(self, acct: _StreamAccount) -> Callable[[int], None]:
        spec = acct.spec
        direction = spec.direction
        sender = self.tx[direction]
        inject = self.sim.inject
        producer = self.sc.stream_nodes.get(spec.stream_id)
        k = 0

        def emit(t: int) -> None:
            nonlocal k
            if self._can_send(direction, producer):
                acct.sent += 1
                for link, datagram in sender.send_next(spec, t, acct.payload):
                    acct.copies += 1
                    disposition = inject(link, datagram, t, direction)
                    if disposition is not Disposition.QUEUED:
                        acct.dropped[disposition] += 1
            k += 1
            nxt = k * acct.period_num // acct.period_den
            if nxt < self.sc.duration_us:
                self.at(nxt, _EMIT, emit)

        return emit

    def _can_send(self, direction: Direction, producer: str | None) -> bool:
        if self._avatar_side(direction):
            if self.mode != SystemMode.UP:
                return False
            if producer is not None and (not self.supervisor.is_up(producer) or producer in self.hung_nodes):
                return False
        return True

    def _deliver(self, t: int) -> None:
        for arrival, _link, datagram, direction in self.sim.step(t):
            self._receive(arrival, datagram, direction)

    def _receive(self, arrival: int, datagram: bytes, direction: Direction) -> None:
        # the uplink lands on the avatar, which may be down
        if direction is Direction.UPLINK and self.mode != SystemMode.UP:
            sid = HEADER.unpack_from(datagram)[3]
            self.accounts[sid].dropped["endpoint"] += 1
            return
        self.rx[direction].receive(datagram, arrival)

    # avatar housekeeping ---------------------------------------------------

    def _control(self, t: int) -> None:
        period = self.sc.control_period_us
        if self.mode == SystemMode.UP:
            for action in self.supervisor.tick(t):
                self._on_supervisor_action(action)
            for device_id, spec in self.device_specs.items():
                driver = self.sc.device_drivers.get(device_id)
                if driver is not None and not self.supervisor.is_up(driver):
                    continue
                state = self.devices[device_id]
                # autonomous observer: recover stopped arms unless an E-stop is engaged
                if state.mode in (Mode.SOFT_STOPPED, Mode.HARD_STOPPED) and not self.estop.engaged:
                    self._device(t, device_id, RecoverRequested())
                self._device(t, device_id, Tick(period))
        nxt = t + period
        if nxt <= self.sc.duration_us:
            self.at(nxt, _CONTROL, self._control)

    def _device(self, t: int, device_id: str, event) -> None:
        spec = self.device_specs[device_id]
        before = self.devices[device_id]
        pose = operator_pose(spec.dof, t, list(self.device_specs).index(device_id))
        after = device_event(before, self.estop, event, pose, spec)
        self.devices[device_id] = after
        if after.mode is not before.mode:
            self.log(t, f"device.{after.mode.value}", device_id, f"from {before.mode.value}")
            if after.mode is Mode.RESTARTING:
                self.device_recoveries += 1
            elif after.mode is Mode.FADING_IN:
                self.log(t, "device.fade_start", device_id)
            elif after.mode is Mode.ACTIVE and before.mode in (Mode.FADING_IN, Mode.RESTARTING):
                self.log(t, "device.fade_end", device_id)

    def _on_supervisor_action(self, action) -> None:
        if isinstance(action, KillStuck):
            self.log(action.t_us, "node.kill_stuck", action.node_id)
        elif isinstance(action, Respawn):
            self.hung_nodes.discard(action.node_id)
            self.log(action.t_us, "node.respawn", action.node_id)
            self._driver_lost(action.t_us, action.node_id)

    def _driver_lost(self, t: int, node_id: str) -> None:
        for device_id, driver in self.sc.device_drivers.items():
            if driver == node_id and self.devices[device_id].mode not in STOPPED:
                self._device(t, device_id, SoftStop())

    def _heartbeat(self, node_id: str) -> Callable[[int], None]:
        period = self.supervisor.nodes[node_id].spec.heartbeat_period_us

        def beat(t: int) -> None:
            if self.mode == SystemMode.UP and node_id not in self.hung_nodes:
                self.supervisor.on_heartbeat(node_id, t)
            if t + period <= self.sc.duration_us:
                self.at(t + period, _HEARTBEAT, beat)

        return beat

    def _feed(self, t: int) -> None:
        if self.watchdog is not None and self.mode == SystemMode.UP:
            self.watchdog.feed(t)
            self.at(self.watchdog.deadline_us, _WATCHDOG, self._watchdog_check)
        nxt = t + self.sc.feed_period_us
        if nxt <= self.sc.duration_us:
            self.at(nxt, _FEED, self._feed)

    def _watchdog_check(self, t: int) -> None:
        wd = self.watchdog
        if self.mode not in (SystemMode.UP, SystemMode.HUNG) or t < wd.deadline_us:
            return
        # every event at t with higher priority (feeds included) has run
        boot = max((n.restart_duration_us for n in self.sc.nodes), default=0)
        reset = SystemReset(t, t + wd.config.reboot_duration_us + boot)
        wd.resets.append(reset)
        self.log(t, "watchdog.reset", "", f"operational again by {reset.operational_again_at_us} us")
        self.resets.append({"at_us": reset.at_us, "operational_again_at_us": reset.operational_again_at_us,
                            "all_green_at_us": None})
        self._power_down(t)
        self.mode = SystemMode.REBOOTING
        self.at(t + wd.config.reboot_duration_us, _BOOT, self._boot)

    def _power_down(self, t: int) -> None:
        self.supervisor.power_off()
        self.hung_nodes.clear()
        for device_id, state in self.devices.items():
            if state.mode not in STOPPED:
                self._device(t, device_id, SoftStop())

    def _boot(self, t: int) -> None:
        if self.mode != SystemMode.REBOOTING:
            return
        self.mode = SystemMode.UP
        self.log(t, "system.boot")
        self.supervisor.boot(t)
        self.tx[Direction.DOWNLINK].reset()
        self.rx[Direction.UPLINK].reset_windows()
        if self.watchdog is not None:
            self.watchdog.rearm(t)
            self.at(self.watchdog.deadline_us, _WATCHDOG, self._watchdog_check)

    # faults ----------------------------------------------------------------

    def _fault(self, event) -> Callable[[int], None]:
        kind = event.kind

        def fire(t: int) -> None:
            if isinstance(kind, Blackout):
                self.log(t, "fault.blackout", kind.link.label, f"{kind.duration_us} us")
            elif isinstance(kind, LossSpike):
                self.log(t, "fault.loss_spike", kind.link.label, f"p={kind.prob} for {kind.duration_us} us")
            elif isinstance(kind, NodeCrash):
                self.log(t, "fault.node_crash", kind.node_id)
                if self.mode == SystemMode.UP:
                    for action in self.supervisor.on_exit(kind.node_id, t):
                        self._on_supervisor_action(action)
            elif isinstance(kind, NodeHang):
                self.log(t, "fault.node_hang", kind.node_id)
                if self.mode == SystemMode.UP and self.supervisor.is_up(kind.node_id):
                    self.hung_nodes.add(kind.node_id)
            elif isinstance(kind, SystemHang):
                self.log(t, "fault.system_hang")
                if self.mode == SystemMode.UP:
                    self.mode = SystemMode.HUNG
                    # arms lose their controller and stop
                    for device_id, state in self.devices.items():
                        if state.mode not in STOPPED:
                            self._device(t, device_id, SoftStop())
            elif isinstance(kind, DeviceStop):
                self.log(t, "fault.device_stop", kind.device_id, "hard" if kind.hard else "soft")
                self._device(t, kind.device_id, HardStop() if kind.hard else SoftStop())
            elif isinstance(kind, EStop):
                self._estop(t, kind)

        return fire

    def _estop(self, t: int, kind: EStop) -> None:
        which = "hardware" if kind.hardware else "software"
        self.log(t, f"estop.{which}", "", "engaged" if kind.engaged else "released")
        was_hw = self.estop.hardware_estop
        if kind.hardware:
            self.estop = EStopState(self.estop.software_estop, kind.engaged)
        else:
            self.estop = EStopState(kind.engaged, self.estop.hardware_estop)
        for device_id in self.devices:
            self._device(t, device_id, Tick(0))
        if kind.hardware and kind.engaged and not was_hw:
            # battery cut: everything including the control PC goes dark
            self._power_down(t)
            self.mode = SystemMode.POWER_OFF
        elif kind.hardware and not kind.engaged and was_hw:
            for device_id in self.devices:
                self._device(t, device_id, PowerRestored())
            if self.mode == SystemMode.POWER_OFF:
                self.mode = SystemMode.REBOOTING
                reboot = self.watchdog.config.reboot_duration_us if self.watchdog else 0
                self.at(t + reboot, _BOOT, self._boot)

    # monitoring ------------------------------------------------------------

    def _snapshot(self, t: int) -> sysmon.TelemetrySnapshot:
        streams = {}
        for sid, acct in self.accounts.items():
            rec = self.rx[acct.spec.direction].records[sid]
            recent = rec.latencies_us[acct.latency_mark:]
            streams[acct.key] = sysmon.StreamTelemetry(
                sent=acct.sent,
                delivered=rec.delivered,
                sent_recent=acct.sent - acct.sent_mark,
                delivered_recent=rec.delivered - acct.delivered_mark,
                p99_us=nearest_rank(sorted(recent), 99),
            )
            acct.sent_mark, acct.delivered_mark, acct.latency_mark = acct.sent, rec.delivered, len(rec.latencies_us)
        links = {}
        for link in LinkId:
            c = self.sim.counters(link)
            inj0, drop0 = self.link_marks[link]
            links[link] = sysmon.LinkTelemetry(c.injected, c.delivered, c.dropped, c.injected - inj0, c.dropped - drop0)
            self.link_marks[link] = (c.injected, c.dropped)
        up = self.mode == SystemMode.UP
        nodes = {
            node_id: sysmon.NodeTelemetry(
                up=up and self.supervisor.is_up(node_id),
                heartbeat_age_us=self.supervisor.heartbeat_age(node_id, t),
                restarts=state.restarts,
            )
            for node_id, state in self.supervisor.nodes.items()
        }
        return sysmon.TelemetrySnapshot(
            now_us=t,
            streams=streams,
            links=links,
            nodes=nodes,
            devices={d: s.mode.value for d, s in self.devices.items()},
            software_estop=self.estop.software_estop,
            hardware_estop=self.estop.hardware_estop,
        )

    def _sysmon(self, t: int) -> None:
        table = self.monitor.tick(self._snapshot(t))
        self.tables.append(table)
        for row in table.rows:
            self.uptime.setdefault(row.check_id, []).append(1 if row.status <= sysmon.Status.WARN else 0)
        green = sysmon.all_green(table)
        for reset in self.resets:
            if reset["all_green_at_us"] is None and green and t > reset["at_us"]:
                reset["all_green_at_us"] = t
                self.log(t, "system.all_green", "", f"{t - reset['at_us']} us after reset")
        nxt = t + self.sc.sysmon_period_us
        if nxt <= self.sc.duration_us:
            self.at(nxt, _SYSMON, self._sysmon)

    # main loop -------------------------------------------------------------

    def execute(self) -> "RunReport":
        sc = self.sc
        for acct in self.accounts.values():
            self.at(0, _EMIT, self._emitter(acct))
        self.at(0, _CONTROL, self._control)
        for node_id, state in self.supervisor.nodes.items():
            self.at(state.spec.heartbeat_period_us, _HEARTBEAT, self._heartbeat(node_id))
        if self.watchdog is not None:
            self.at(0, _FEED, self._feed)
        if sc.sysmon_period_us <= sc.duration_us:
            self.at(sc.sysmon_period_us, _SYSMON, self._sysmon)
        for event in sc.faults:
            if event.at_us <= sc.duration_us:
                self.at(event.at_us, _FAULT, self._fault(event))

        q = self._queue
        sim = self.sim
        while q:
            t, _, _, fn = heapq.heappop(q)
            if t > sc.duration_us:
                break
            self._deliver(t)
            fn(t)
        self._deliver(sc.duration_us)
        for arrival, _link, datagram, direction in sim.drain():
            self._receive(arrival, datagram, direction)
        return build_report(self)


def build_checks(scenario: Scenario) -> list[sysmon.CheckDefinition]:
    keys = {stream_key(s) for s in scenario.registry}
    nodes = {n.node_id: n for n in scenario.nodes}
    devices = [d.device_id for d in scenario.devices]
    period = scenario.sysmon_period_us
    if scenario.checks is None:
        configs = [CheckConfig("link_delivering", {"link": link.label}) for link in LinkId]
        configs += [CheckConfig("stream_alive", {"stream": stream_key(s)}) for s in scenario.registry]
        configs += [CheckConfig("node_heartbeat", {"node": n}) for n in nodes]
        configs += [CheckConfig("device_active", {"device": d}) for d in devices]
        if devices:
            configs.append(CheckConfig("estop_clear"))
    else:
        configs = list(scenario.checks)
    out = []
    for i, cfg in enumerate(configs):
        p = cfg.params
        path = f"checks[{i}]"
        try:
            if cfg.kind == "stream_alive":
                _known(p["stream"], keys, f"{path}.stream")
                d = sysmon.stream_alive(p["stream"])
            elif cfg.kind == "stream_loss":
                _known(p["stream"], keys, f"{path}.stream")
                d = sysmon.stream_loss_below(p["stream"], float(p.get("warn", 0.05)), float(p.get("fail", 0.5)))
            elif cfg.kind == "stream_latency":
                _known(p["stream"], keys, f"{path}.stream")
                d = sysmon.stream_latency_below(p["stream"], int(p["p99_limit_us"]))
            elif cfg.kind == "link_delivering":
                d = sysmon.link_delivering(LinkId.parse(p["link"]), float(p.get("warn", 0.2)), float(p.get("fail", 0.5)))
            elif cfg.kind == "node_heartbeat":
                _known(p["node"], nodes, f"{path}.node")
                default_age = nodes[p["node"]].stuck_after_us
                d = sysmon.node_heartbeat(p["node"], int(p.get("max_age_us", default_age)))
            elif cfg.kind == "device_active":
                _known(p["device"], devices, f"{path}.device")
                d = sysmon.device_active(p["device"])
            elif cfg.kind == "estop_clear":
                d = sysmon.estop_clear()
            else:
                raise ConfigError(f"unknown check kind {cfg.kind!r}", f"{path}.kind")
        except KeyError as exc:
            raise ConfigError("required field missing", f"{path}.{exc.args[0]}") from None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), path) from None
        out.append(sysmon.CheckDefinition(d.check_id, d.description, d.predicate, period_us=period))
    return out


def _known(name: str, pool, path: str) -> None:
    if name not in pool:
        raise ConfigError(f"unknown reference {name!r}", path)


# report --------------------------------------------------------------------

def _ratio(x: float) -> float:
    return round(min(1.0, max(0.0, x)), 6)


@dataclass
class RunReport:
    data: dict

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    @property
    def all_green(self) -> bool:
        return self.data["all_green"]

    def stream(self, key_or_id) -> dict:
        for s in self.data["streams"]:
            if s["key"] == key_or_id or s["id"] == key_or_id:
                return s
        raise KeyError(key_or_id)

    def check(self, check_id: str) -> dict:
        for c in self.data["checks"]:
            if c["id"] == check_id:
                return c
        raise KeyError(check_id)


def build_report(run: Run) -> RunReport:
    sc = run.sc
    streams = []
    balanced = True
    for sid, acct in run.accounts.items():
        spec = acct.spec
        rx = run.rx[spec.direction]
        rec = rx.records[sid]
        lat = sorted(rec.latencies_us)
        network = sum(acct.dropped[k] for k in (Disposition.LOSS, Disposition.BLACKOUT, Disposition.SATURATION))
        accounted = rec.delivered + rec.duplicates + rec.stale + rec.malformed + network + acct.dropped["endpoint"]
        ok = accounted == acct.copies
        balanced &= ok
        streams.append({
            "id": sid,
            "key": acct.key,
            "name": spec.name,
            "direction": spec.direction.value,
            "links": [link.label for link in spec.sorted_links],
            "redundant": spec.redundant,
            "sent": acct.sent,
            "copies": acct.copies,
            "delivered": rec.delivered,
            "duplicates": rec.duplicates,
            "stale": rec.stale,
            "malformed": rec.malformed,
            "restarts": rec.restarts,
            "loss_ratio": _ratio(1 - rec.delivered / acct.sent) if acct.sent else 0.0,
            "latency_us": {
                "p50": nearest_rank(lat, 50),
                "p95": nearest_rank(lat, 95),
                "p99": nearest_rank(lat, 99),
            },
            "dropped": {
                "loss": acct.dropped[Disposition.LOSS],
                "blackout": acct.dropped[Disposition.BLACKOUT],
                "saturation": acct.dropped[Disposition.SATURATION],
                "endpoint": acct.dropped["endpoint"],
            },
            "balanced": ok,
        })

    links = {}
    for link in LinkId:
        c = run.sim.counters(link)
        links[link.label] = {
            "injected": c.injected,
            "delivered": c.delivered,
            "loss_dropped": c.loss_dropped,
            "blackout_dropped": c.blackout_dropped,
            "saturation_dropped": c.saturation_dropped,
        }
    total_copies = sum(s["copies"] for s in streams)
    total_injected = sum(v["injected"] for v in links.values())
    net_by_kind = {
        kind: sum(s["dropped"][kind] for s in streams) for kind in ("loss", "blackout", "saturation")
    }
    link_by_kind = {kind: sum(v[f"{kind}_dropped"] for v in links.values()) for kind in ("loss", "blackout", "saturation")}
    delivered_link = sum(v["delivered"] for v in links.values())
    endpoint = sum(s["dropped"]["endpoint"] for s in streams)
    rx_total = sum(s["delivered"] + s["duplicates"] + s["stale"] + s["malformed"] for s in streams)
    unattributed = sum(r.unknown + r.malformed_unattributed for r in run.rx.values())
    cross_ok = (
        total_copies == total_injected
        and net_by_kind == link_by_kind
        and delivered_link == rx_total + endpoint + unattributed
        and run.sim.in_flight == 0
    )

    final = run.tables[-1] if run.tables else run.monitor.table(sc.duration_us)
    checks = []
    for row in final.rows:
        samples = run.uptime.get(row.check_id, [])
        checks.append({
            "id": row.check_id,
            "uptime": _ratio(sum(samples) / len(samples)) if samples else 0.0,
            "final_status": row.status.label,
            "message": row.message,
        })
    timeline = [
        {"t_us": t, "event": kind, "subject": subject, "detail": detail}
        for t, _, kind, subject, detail in sorted(run.timeline)
    ]
    resets = []
    for r in run.resets:
        green = r["all_green_at_us"]
        resets.append({**r, "recovery_us": None if green is None else green - r["at_us"]})
    respawns = sum(n.restarts for n in run.supervisor.nodes.values())
    data = {
        "schema": REPORT_SCHEMA,
        "scenario": sc.name,
        "seed": sc.seed,
        "duration_us": sc.duration_us,
        "streams": streams,
        "links": links,
        "checks": checks,
        "status": final.to_dict(),
        "status_history": [
            {"at_us": tb.at_us, "aggregate": tb.aggregate.label} for tb in run.tables
        ],
        "timeline": timeline,
        "watchdog": resets,
        "layers": {
            "device_recoveries": run.device_recoveries,
            "node_respawns": respawns,
            "node_kills": sum(n.kills for n in run.supervisor.nodes.values()),
            "watchdog_resets": len(run.resets),
        },
        "conservation": {
            "balanced": balanced and cross_ok,
            "copies_emitted": total_copies,
            "link_injected": total_injected,
            "network_dropped": net_by_kind,
            "endpoint_dropped": endpoint,
            "receiver_outcomes": rx_total,
            "unattributed": unattributed,
            "in_flight": run.sim.in_flight,
        },
        "all_green": sysmon.all_green(final),
        "verdict": "GO" if sysmon.all_green(final) else "NO-GO",
    }
    return RunReport(data)


def run(scenario: Scenario) -> RunReport:
    return Run(scenario).execute()
