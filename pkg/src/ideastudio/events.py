"""In-process event bus for card and cycle state transitions.

Events are state-carrying: each one includes the full current summary of
its subject, so late or reconnecting subscribers can be brought up to date
with a snapshot and any duplicates applied idempotently. Subscribers get
their own bounded queue; a subscriber that stops draining loses the oldest
events rather than stalling publishers.
"""

from __future__ import annotations

import asyncio
import threading
from collections.abc import AsyncIterator
from contextlib import asynccontextmanager
from datetime import datetime

from pydantic import BaseModel, ConfigDict

from .model import utcnow

QUEUE_LIMIT = 256


class Event(BaseModel):
    model_config = ConfigDict(frozen=True)

    seq: int
    type: str
    session_id: str
    cycle_id: str | None = None
    card_id: str | None = None
    at: datetime
    payload: dict = {}


class EventBus:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._seq = 0
        self._subscribers: dict[tuple[str, str], list[asyncio.Queue]] = {}

    def _topics_of(self, event: Event) -> list[tuple[str, str]]:
        topics = [("session", event.session_id)]
        if event.cycle_id:
            topics.append(("cycle", event.cycle_id))
        if event.card_id:
            topics.append(("card", event.card_id))
        return topics

    def publish(
        self,
        type: str,
        session_id: str,
        *,
        cycle_id: str | None = None,
        card_id: str | None = None,
        payload: dict | None = None,
    ) -> Event:
        with self._lock:
            self._seq += 1
            event = Event(
                seq=self._seq,
                type=type,
                session_id=session_id,
                cycle_id=cycle_id,
                card_id=card_id,
                at=utcnow(),
                payload=payload or {},
            )
            queues = [
                queue
                for topic in self._topics_of(event)
                for queue in self._subscribers.get(topic, ())
            ]
        for queue in queues:
            try:
                queue.put_nowait(event)
            except asyncio.QueueFull:
                # Slow consumer: evict the oldest event. Events carry full
                # state, so the latest one is the one worth keeping.
                try:
                    queue.get_nowait()
                    queue.put_nowait(event)
                except (asyncio.QueueEmpty, asyncio.QueueFull):  # pragma: no cover
                    pass
        return event

    @asynccontextmanager
    async def subscribe(self, kind: str, key: str) -> AsyncIterator[asyncio.Queue]:
        queue: asyncio.Queue = asyncio.Queue(maxsize=QUEUE_LIMIT)
        topic = (kind, key)
        with self._lock:
            self._subscribers.setdefault(topic, []).append(queue)
        try:
            yield queue
        finally:
            with self._lock:
                self._subscribers[topic].remove(queue)
                if not self._subscribers[topic]:
                    del self._subscribers[topic]
