"""Frame fan-out with bounded per-subscriber buffering.

The pipeline calls publish() and never waits. Each subscriber owns a
FIFO of pending frames; a subscriber that lets its FIFO exceed the
buffer limit is disconnected (its subscription is marked dropped and
emptied) so one stalled reader cannot hold frames, or memory, hostage.
"""
from __future__ import annotations

from collections import deque
from typing import Iterable

DEFAULT_BUFFER_FRAMES = 1024


class Subscription:
    def __init__(self, broadcaster: "Broadcaster"):
        self._broadcaster = broadcaster
        self._pending: deque = deque()
        self.closed = False
        self.dropped = False

    def drain(self) -> list:
        """All frames received since the last drain, in publish order."""
        out = list(self._pending)
        self._pending.clear()
        return out

    @property
    def pending(self) -> int:
        return len(self._pending)

    def close(self) -> None:
        self.closed = True
        self._pending.clear()
        self._broadcaster._forget(self)


class Broadcaster:
    def __init__(self, buffer_frames: int = DEFAULT_BUFFER_FRAMES):
        if buffer_frames < 1:
            raise ValueError("buffer_frames must be >= 1")
        self.buffer_frames = buffer_frames
        self._subscribers: list[Subscription] = []

    @property
    def subscriber_count(self) -> int:
        return len(self._subscribers)

    def subscribe(self) -> Subscription:
        sub = Subscription(self)
        self._subscribers.append(sub)
        return sub

    def _forget(self, sub: Subscription) -> None:
        if sub in self._subscribers:
            self._subscribers.remove(sub)

    def publish(self, frames: Iterable) -> None:
        """Append frames to every live subscriber; drop the ones that overflow."""
        frames = list(frames)
        if not frames:
            return
        for sub in list(self._subscribers):
            if sub.closed:
                self._forget(sub)
                continue
            if len(sub._pending) + len(frames) > self.buffer_frames:
                sub.dropped = True
                sub.close()
                continue
            sub._pending.extend(frames)
