"""Real-socket shim: one UDP socket per link, same framing as the simulator.

Meant for loopback demos.  Each link gets its own local port on both ends,
standing in for the two WiFi adapters.
"""
from __future__ import annotations

import selectors
import socket
import time

from .core import LinkId, StreamRegistry, StreamSpec
from .transport import Receiver, RxOutcome, Sender


class UdpEndpoint:
    def __init__(self, registry: StreamRegistry, bind_host: str = "127.0.0.1",
                 ports: dict[LinkId, int] | None = None) -> None:
        self.sender = Sender()
        self.receiver = Receiver(registry)
        self.socks: dict[LinkId, socket.socket] = {}
        self.peers: dict[LinkId, tuple[str, int]] = {}
        self._sel = selectors.DefaultSelector()
        for link in LinkId:
            s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            s.bind((bind_host, (ports or {}).get(link, 0)))
            s.setblocking(False)
            self.socks[link] = s
            self._sel.register(s, selectors.EVENT_READ, link)

    def address(self, link: LinkId) -> tuple[str, int]:
        return self.socks[link].getsockname()

    def connect(self, other: "UdpEndpoint") -> None:
        for link in LinkId:
            self.peers[link] = other.address(link)

    def send(self, spec: StreamSpec, payload: bytes, now_us: int | None = None,
             drop: frozenset[LinkId] = frozenset()) -> int:
        """Send one message; ``drop`` lets a demo suppress a link.  Returns datagrams written."""
        now_us = time.monotonic_ns() // 1000 if now_us is None else now_us
        n = 0
        for link, datagram in self.sender.send_next(spec, now_us, payload):
            if link in drop:
                continue
            self.socks[link].sendto(datagram, self.peers[link])
            n += 1
        return n

    def poll(self, timeout: float = 0.1, now_us: int | None = None) -> list[tuple[LinkId, RxOutcome]]:
        out = []
        for key, _ in self._sel.select(timeout):
            link = key.data
            while True:
                try:
                    datagram = key.fileobj.recv(65_535 + 64)
                except BlockingIOError:
                    break
                t = time.monotonic_ns() // 1000 if now_us is None else now_us
                out.append((link, self.receiver.receive(datagram, t)))
        return out

    def close(self) -> None:
        self._sel.close()
        for s in self.socks.values():
            s.close()

    def __enter__(self) -> "UdpEndpoint":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
