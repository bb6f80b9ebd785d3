"""Dual-link teleoperation transport with health monitoring and auto-recovery."""
from .core import (
    AdmissionError,
    BudgetExceeded,
    BudgetTable,
    Direction,
    DuplicateStreamId,
    LinkId,
    RedundantNeedsBothLinks,
    StreamRegistry,
    StreamSpec,
    XPRIZE_STREAMS,
    budget_table,
    build_registry,
    register_stream,
)
from .netsim import ConfigError, FaultEvent, LinkConfig, LinkSimulator, seeded
from .runner import RunReport, run
from .scenario import Scenario, load_scenario
from .transport import Receiver, Sender, decode_packet, encode_packet, receive, send, stream_stats

__all__ = [
    "AdmissionError",
    "budget_table",
    "BudgetExceeded",
    "BudgetTable",
    "build_registry",
    "ConfigError",
    "decode_packet",
    "Direction",
    "DuplicateStreamId",
    "encode_packet",
    "FaultEvent",
    "LinkConfig",
    "LinkId",
    "LinkSimulator",
    "load_scenario",
    "receive",
    "Receiver",
    "RedundantNeedsBothLinks",
    "register_stream",
    "run",
    "RunReport",
    "Scenario",
    "seeded",
    "send",
    "Sender",
    "stream_stats",
    "StreamRegistry",
    "StreamSpec",
    "XPRIZE_STREAMS",
]

__version__ = "0.1.0"
