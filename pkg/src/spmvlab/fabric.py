"""In-process message transport between rank workers with injected latency.

Ranks here are threads inside one process, not separate machines; this
module is the desk-scale stand-in for a real interconnect. Payloads move
through per-(src, dst, tag) FIFO mailboxes, so delivery between a fixed
pair is always in post order, and a configurable affine latency model
charges ``per_message_s + per_element_s * len`` for each message.

The key semantic is the progress mode. In ``"active"`` mode (the
default), a message's latency elapses inside the *receiver's*
``wait_all`` call and is serialized across that rank's pending receives;
nothing progresses unless somebody is actively waiting, which mirrors
transports that lack truly asynchronous progression. In ``"background"``
mode latency elapses in real time from the moment of posting, so a late
enough ``wait_all`` returns without contributing any progress time.

Deadlock detection is out of scope: a receive with no matching send
blocks forever.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = ["LatencyModel", "MessageHandle", "Fabric", "create_fabric"]

PROGRESS_MODES = ("active", "background")


@dataclass(frozen=True)
class LatencyModel:
    """Affine per-message cost and the progress mode that charges it."""

    per_message_s: float = 0.0
    per_element_s: float = 0.0
    progress: str = "active"

    def __post_init__(self):
        if self.per_message_s < 0 or self.per_element_s < 0:
            raise ValueError("latency delays must be >= 0")
        if self.progress not in PROGRESS_MODES:
            raise ValueError(
                f"progress must be one of {PROGRESS_MODES}, got {self.progress!r}")

    def delay(self, nelems: int) -> float:
        return self.per_message_s + self.per_element_s * nelems


class MessageHandle:
    """Opaque token for one posted send or receive; completes at most once."""

    __slots__ = ("fabric", "kind", "src", "dst", "tag", "expected_len",
                 "completed", "payload")

    def __init__(self, fabric, kind, src, dst, tag, expected_len):
        self.fabric = fabric
        self.kind = kind
        self.src = src
        self.dst = dst
        self.tag = tag
        self.expected_len = expected_len
        self.completed = kind == "send"
        self.payload = None

    def __repr__(self):
        state = "done" if self.completed else "pending"
        return (f"MessageHandle({self.kind} {self.src}->{self.dst} "
                f"tag={self.tag}, {state})")


class Fabric:
    """Mailbox endpoints for ``nranks`` ranks sharing one process."""

    def __init__(self, nranks: int, model: LatencyModel | None = None):
        if nranks < 1:
            raise ValueError(f"rank count must be >= 1, got {nranks}")
        self.nranks = nranks
        self.model = model if model is not None else LatencyModel()
        self._lock = threading.Lock()
        self._arrived = threading.Condition(self._lock)
        self._queues: dict[tuple[int, int, int], deque] = {}

    def _check_rank(self, rank: int, what: str) -> None:
        if not 0 <= rank < self.nranks:
            raise ValueError(f"{what} rank {rank} outside [0, {self.nranks})")

    def post_send(self, src: int, dst: int, payload, tag: int = 0) -> MessageHandle:
        """Buffer a message for delivery; returns an already-complete handle.

        The payload is copied at post time, so the caller may reuse its
        buffer immediately.
        """
        self._check_rank(src, "source")
        self._check_rank(dst, "destination")
        data = np.array(payload, dtype=np.float64, copy=True)
        data.flags.writeable = False
        with self._arrived:
            q = self._queues.setdefault((src, dst, tag), deque())
            q.append((data, time.perf_counter()))
            self._arrived.notify_all()
        return MessageHandle(self, "send", src, dst, tag, len(data))

    def post_recv(self, dst: int, src: int, expected_len: int, tag: int = 0) -> MessageHandle:
        """Register interest in the next message on (src, dst, tag)."""
        self._check_rank(src, "source")
        self._check_rank(dst, "destination")
        return MessageHandle(self, "recv", src, dst, tag, expected_len)

    def wait_all(self, handles) -> list[np.ndarray]:
        """Complete the given handles, returning receive payloads in order.

        In ``"active"`` progress mode this call is where transfer time is
        spent: each receive blocks until its message is posted, then pays
        the message's modeled latency, one message after another. In
        ``"background"`` mode each message is ready ``delay`` after its
        post time and only the remaining real time, if any, is waited.
        """
        payloads = []
        for h in handles:
            if h.fabric is not self:
                raise ValueError("handle belongs to a different fabric")
            if h.kind == "send":
                continue
            if h.completed:
                raise ValueError(f"handle already completed: {h!r}")
            key = (h.src, h.dst, h.tag)
            with self._arrived:
                while not self._queues.get(key):
                    self._arrived.wait()
                data, posted = self._queues[key].popleft()
            if len(data) != h.expected_len:
                raise ValueError(
                    f"message {h.src}->{h.dst} tag={h.tag} has {len(data)} "
                    f"elements, receiver expected {h.expected_len}")
            cost = self.model.delay(len(data))
            if self.model.progress == "active":
                if cost > 0:
                    time.sleep(cost)
            else:
                remaining = posted + cost - time.perf_counter()
                if remaining > 0:
                    time.sleep(remaining)
            h.payload = data
            h.completed = True
            payloads.append(data)
        return payloads


def create_fabric(nranks: int, model: LatencyModel | None = None) -> Fabric:
    """Fabric with ``nranks`` endpoints and the given latency model."""
    return Fabric(nranks, model)
