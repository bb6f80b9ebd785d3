"""Auto-recovery on three layers.

1. Devices (the arms): a stop is followed by a gated restart and a fade from
   the held pose to the live operator pose.  Recovery never starts while
   either E-stop is engaged.
2. Nodes: a supervisor respawns nodes that exit and kills and respawns nodes
   whose heartbeat has gone silent.
3. The whole computer: an external watchdog that is not fed in time forces a
   reset, after which everything boots and respawns on its own.

All state machines advance only through explicit events from the caller, so
they behave identically in simulation and in tests.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple, Sequence

from .core import TelelinkError

SECOND = 1_000_000
RECOVERY_BOUND_US = 60 * SECOND


class DimensionMismatch(TelelinkError, ValueError):
    pass


# Device recovery ----------------------------------------------------------

class Mode(enum.Enum):
    ACTIVE = "Active"
    SOFT_STOPPED = "SoftStopped"
    HARD_STOPPED = "HardStopped"
    RESTARTING = "Restarting"
    FADING_IN = "FadingIn"
    OFFLINE = "Offline"


RUNNING = frozenset({Mode.ACTIVE, Mode.RESTARTING, Mode.FADING_IN})
STOPPED = frozenset({Mode.SOFT_STOPPED, Mode.HARD_STOPPED, Mode.OFFLINE})

Pose = tuple[float, ...]


@dataclass(frozen=True)
class EStopState:
    software_estop: bool = False
    hardware_estop: bool = False

    @property
    def engaged(self) -> bool:
        return self.software_estop or self.hardware_estop


CLEAR = EStopState()


class SoftStop(NamedTuple):
    pass


class HardStop(NamedTuple):
    pass


class RecoverRequested(NamedTuple):
    pass


class PowerRestored(NamedTuple):
    """Battery power is back after a hardware E-stop; the device comes up braked."""


class Tick(NamedTuple):
    dt_us: int


DeviceEvent = SoftStop | HardStop | RecoverRequested | PowerRestored | Tick


@dataclass(frozen=True)
class DeviceSpec:
    device_id: str
    dof: int = 7
    soft_restart_us: int = 3 * SECOND
    hard_restart_us: int = 10 * SECOND
    fade_us: int = 2 * SECOND

    def __post_init__(self) -> None:
        if self.dof <= 0:
            raise ValueError("dof must be positive")
        if min(self.soft_restart_us, self.hard_restart_us) < 0 or self.fade_us <= 0:
            raise ValueError("restart durations must be >= 0 and fade_us > 0")


@dataclass(frozen=True)
class DeviceState:
    """Value-type FSM position.

    ``pose`` is what the device is commanded to hold after the event;
    ``fade_from`` is the pose captured when the fade began.
    """

    mode: Mode
    pose: Pose
    elapsed_us: int = 0
    restart_us: int = 0
    fade_from: Pose = ()
    illegal_events: int = 0

    @classmethod
    def initial(cls, pose: Sequence[float], mode: Mode = Mode.ACTIVE) -> "DeviceState":
        return cls(mode, tuple(float(x) for x in pose))

    @property
    def name(self) -> str:
        return self.mode.value


def fade_pose(q_start: Sequence[float], q_target: Sequence[float], t_us: int, T_us: int) -> Pose:
    """Linear blend from ``q_start`` to the (possibly moving) ``q_target``.

    Endpoints are returned verbatim so t=0 and t>=T are exact.  Each joint is
    clamped to the interval its two inputs span.
    """
    if len(q_start) != len(q_target):
        raise DimensionMismatch(f"pose dimensions differ: {len(q_start)} vs {len(q_target)}")
    if T_us <= 0:
        raise ValueError("fade duration must be > 0")
    if t_us <= 0:
        return tuple(q_start)
    if t_us >= T_us:
        return tuple(q_target)
    alpha = t_us / T_us
    out = []
    for a, b in zip(q_start, q_target):
        x = a + alpha * (b - a)
        lo, hi = (a, b) if a <= b else (b, a)
        out.append(min(max(x, lo), hi))
    return tuple(out)


def device_event(
    state: DeviceState,
    estop: EStopState,
    event: DeviceEvent,
    operator_pose: Sequence[float],
    spec: DeviceSpec | None = None,
) -> DeviceState:
    """Apply one event.  Illegal events leave the state unchanged and are counted."""
    spec = spec or DeviceSpec("device", dof=len(state.pose))
    if len(operator_pose) != len(state.pose):
        raise DimensionMismatch(f"operator pose has {len(operator_pose)} joints, device has {len(state.pose)}")
    operator_pose = tuple(operator_pose)
    mode = state.mode

    def illegal() -> DeviceState:
        return replace(state, illegal_events=state.illegal_events + 1)

    def stopped(m: Mode) -> DeviceState:
        return DeviceState(m, state.pose, illegal_events=state.illegal_events)

    # Latches override everything: power cut, then software stop.
    if estop.hardware_estop:
        if mode is Mode.OFFLINE:
            return state if isinstance(event, Tick) else illegal()
        return stopped(Mode.OFFLINE)
    if estop.software_estop and mode in RUNNING:
        return stopped(Mode.SOFT_STOPPED)

    if isinstance(event, SoftStop):
        return stopped(Mode.SOFT_STOPPED) if mode in RUNNING else illegal()
    if isinstance(event, HardStop):
        if mode in RUNNING or mode is Mode.SOFT_STOPPED:
            return stopped(Mode.HARD_STOPPED)
        return illegal()
    if isinstance(event, PowerRestored):
        return stopped(Mode.HARD_STOPPED) if mode is Mode.OFFLINE else illegal()
    if isinstance(event, RecoverRequested):
        if mode not in (Mode.SOFT_STOPPED, Mode.HARD_STOPPED):
            return illegal()
        if estop.engaged:
            return state
        duration = spec.soft_restart_us if mode is Mode.SOFT_STOPPED else spec.hard_restart_us
        return DeviceState(Mode.RESTARTING, state.pose, 0, duration, illegal_events=state.illegal_events)
    if isinstance(event, Tick):
        if event.dt_us < 0:
            raise ValueError("negative tick")
        if mode is Mode.ACTIVE:
            return replace(state, pose=operator_pose)
        if mode is Mode.RESTARTING:
            elapsed = state.elapsed_us + event.dt_us
            if elapsed < state.restart_us:
                return replace(state, elapsed_us=elapsed)
            # carry the remainder into the fade
            state = DeviceState(Mode.FADING_IN, state.pose, 0, state.restart_us, state.pose, state.illegal_events)
            return _fade_step(state, elapsed - state.restart_us, operator_pose, spec)
        if mode is Mode.FADING_IN:
            return _fade_step(state, event.dt_us, operator_pose, spec)
        return state
    raise TypeError(f"unknown event {event!r}")


def _fade_step(state: DeviceState, dt_us: int, operator_pose: Pose, spec: DeviceSpec) -> DeviceState:
    elapsed = state.elapsed_us + dt_us
    if elapsed >= spec.fade_us:
        return DeviceState(Mode.ACTIVE, operator_pose, illegal_events=state.illegal_events)
    pose = fade_pose(state.fade_from, operator_pose, elapsed, spec.fade_us)
    return replace(state, elapsed_us=elapsed, pose=pose)


# Node supervision ---------------------------------------------------------

@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    heartbeat_period_us: int = SECOND
    stuck_multiplier: int = 3
    restart_duration_us: int = SECOND

    def __post_init__(self) -> None:
        if self.heartbeat_period_us <= 0:
            raise ValueError(f"node {self.node_id!r}: heartbeat_period_us must be > 0")
        if self.stuck_multiplier <= 0:
            raise ValueError(f"node {self.node_id!r}: stuck_multiplier must be > 0")
        if self.restart_duration_us < 0:
            raise ValueError(f"node {self.node_id!r}: restart_duration_us must be >= 0")

    @property
    def stuck_after_us(self) -> int:
        return self.stuck_multiplier * self.heartbeat_period_us


class NodeMode(enum.Enum):
    UP = "Up"
    RESTARTING = "Restarting"
    DOWN = "Down"


@dataclass
class NodeState:
    spec: NodeSpec
    mode: NodeMode = NodeMode.UP
    last_heartbeat_us: int = 0
    up_at_us: int = 0
    restarts: int = 0
    kills: int = 0


class Exit(NamedTuple):
    node_id: str
    t_us: int


class HeartbeatSeen(NamedTuple):
    node_id: str
    t_us: int


class SupervisorTick(NamedTuple):
    t_us: int


class Respawn(NamedTuple):
    node_id: str
    t_us: int


class KillStuck(NamedTuple):
    node_id: str
    t_us: int


class Supervisor:
    """Respawn-on-exit plus heartbeat-based stuck detection."""

    def __init__(self, nodes: Iterable[NodeSpec], now_us: int = 0) -> None:
        self.nodes: dict[str, NodeState] = {}
        for spec in nodes:
            if spec.node_id in self.nodes:
                raise ValueError(f"duplicate node {spec.node_id!r}")
            self.nodes[spec.node_id] = NodeState(spec, last_heartbeat_us=now_us, up_at_us=now_us)
        self.actions: list[Respawn | KillStuck] = []

    def _respawn(self, node: NodeState, t: int) -> Respawn:
        node.mode = NodeMode.RESTARTING
        node.up_at_us = t + node.spec.restart_duration_us
        node.restarts += 1
        action = Respawn(node.spec.node_id, t)
        self.actions.append(action)
        return action

    def on_exit(self, node_id: str, t_us: int) -> list:
        node = self.nodes[node_id]
        if node.mode is not NodeMode.UP:
            return []
        return [self._respawn(node, t_us)]

    def on_heartbeat(self, node_id: str, t_us: int) -> list:
        node = self.nodes[node_id]
        if node.mode is NodeMode.UP:
            node.last_heartbeat_us = max(node.last_heartbeat_us, t_us)
        return []

    def tick(self, t_us: int) -> list:
        out: list = []
        for node in self.nodes.values():
            if node.mode is NodeMode.RESTARTING and t_us >= node.up_at_us:
                node.mode = NodeMode.UP
                node.last_heartbeat_us = node.up_at_us
            if node.mode is NodeMode.UP and t_us - node.last_heartbeat_us > node.spec.stuck_after_us:
                node.kills += 1
                kill = KillStuck(node.spec.node_id, t_us)
                self.actions.append(kill)
                out.append(kill)
                out.append(self._respawn(node, t_us))
        return out

    def handle(self, event: Exit | HeartbeatSeen | SupervisorTick) -> list:
        if isinstance(event, Exit):
            return self.on_exit(event.node_id, event.t_us)
        if isinstance(event, HeartbeatSeen):
            return self.on_heartbeat(event.node_id, event.t_us)
        if isinstance(event, SupervisorTick):
            return self.tick(event.t_us)
        raise TypeError(f"unknown supervisor event {event!r}")

    def power_off(self) -> None:
        """Everything goes down at once (reset or power cut)."""
        for node in self.nodes.values():
            node.mode = NodeMode.DOWN

    def boot(self, t_us: int) -> list:
        """Launch all nodes after a reboot.  Boot launches are not counted as restarts."""
        for node in self.nodes.values():
            node.mode = NodeMode.RESTARTING
            node.up_at_us = t_us + node.spec.restart_duration_us
        return []

    def is_up(self, node_id: str) -> bool:
        return self.nodes[node_id].mode is NodeMode.UP

    def heartbeat_age(self, node_id: str, t_us: int) -> int:
        return max(0, t_us - self.nodes[node_id].last_heartbeat_us)


def supervise(nodes: Iterable[NodeSpec], events: Iterable[Exit | HeartbeatSeen | SupervisorTick]):
    """Replay an event trace.  Returns (actions, final node states)."""
    sup = Supervisor(nodes)
    actions = []
    for event in events:
        actions.extend(sup.handle(event))
    return actions, sup.nodes


# External watchdog --------------------------------------------------------

@dataclass(frozen=True)
class WatchdogConfig:
    timeout_us: int = 5 * SECOND
    reboot_duration_us: int = 30 * SECOND

    def __post_init__(self) -> None:
        if self.timeout_us <= 0:
            raise ValueError("watchdog timeout_us must be > 0")
        if not 0 <= self.reboot_duration_us < RECOVERY_BOUND_US:
            raise ValueError("reboot_duration_us must lie in [0, 60 s)")


class Armed(NamedTuple):
    deadline_us: int


class SystemReset(NamedTuple):
    at_us: int
    operational_again_at_us: int


class Expired(NamedTuple):
    reset: SystemReset


def watchdog(config: WatchdogConfig, feeds: Sequence[int], now_us: int, boot_us: int = 0) -> Armed | Expired:
    """Evaluate a feed history.

    The watchdog expires ``timeout_us`` after the last feed unless fed again
    no later than that instant.  ``boot_us`` is the time the slowest node
    needs after the reboot to be back up.
    """
    last = None
    for t in feeds:
        if last is not None and t < last:
            raise ValueError("feed times must be nondecreasing")
        if last is not None and t - last > config.timeout_us:
            break
        last = t
    if last is None:
        last = 0
    deadline = last + config.timeout_us
    if now_us > deadline:
        return Expired(SystemReset(deadline, deadline + config.reboot_duration_us + boot_us))
    return Armed(deadline)


class Watchdog:
    """Incremental form of :func:`watchdog` for a running system."""

    def __init__(self, config: WatchdogConfig, now_us: int = 0) -> None:
        self.config = config
        self.last_feed_us = now_us
        self.resets: list[SystemReset] = []

    @property
    def deadline_us(self) -> int:
        return self.last_feed_us + self.config.timeout_us

    def feed(self, t_us: int) -> None:
        if t_us < self.last_feed_us:
            raise ValueError("feed times must be nondecreasing")
        if t_us > self.deadline_us:
            return  # too late; poll() will report the expiry
        self.last_feed_us = t_us

    def poll(self, now_us: int, boot_us: int = 0) -> Armed | Expired:
        if now_us > self.deadline_us:
            reset = SystemReset(self.deadline_us, self.deadline_us + self.config.reboot_duration_us + boot_us)
            return Expired(reset)
        return Armed(self.deadline_us)

    def rearm(self, t_us: int) -> None:
        self.last_feed_us = t_us
