"""Ordered single-producer/single-consumer channel.

Backed by a deque whose append/popleft are atomic under the GIL, so the
simulated pipeline and the threaded live service share one implementation.
Values are owned by the consumer once drained; producers must not mutate
items after putting them.
"""

from __future__ import annotations

from collections import deque


class SpscChannel:
    def __init__(self, maxlen: int | None = None):
        self._items: deque = deque()
        self.maxlen = maxlen
        self.dropped = 0

    def put(self, item) -> None:
        if self.maxlen is not None and len(self._items) >= self.maxlen:
            self._items.popleft()
            self.dropped += 1
        self._items.append(item)

    def drain(self) -> list:
        """Remove and return all currently queued items, oldest first."""
        out = []
        while True:
            try:
                out.append(self._items.popleft())
            except IndexError:
                return out

    def __len__(self) -> int:
        return len(self._items)
