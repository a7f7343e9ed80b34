"""Durable persistence for sessions, cards, image blobs, and search history.

On-disk layout under one root directory::

    <root>/store.json                 schema marker {"schema_version": 1}
    <root>/sessions/<sid>/log.jsonl   append-only record log, one JSON per line
    <root>/blobs/<aa>/<sha256>        content-addressed image blobs

Each session is an append-only log of records replayed into memory on
open. A write is acknowledged only after the line has been flushed and
fsynced, so acknowledged records survive a crash; a torn trailing line
(no newline, or undecodable) is discarded on recovery. Blobs are written
before any record that references them, which keeps referential integrity
at every observable point.

All writes to one session are serialized behind a per-session lock; reads
see only fully committed records; distinct sessions are fully parallel.
"""

from __future__ import annotations

import hashlib
import json
import os
import tarfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .model import (
    Cycle,
    CycleInput,
    CycleKind,
    IdeaCard,
    ImageRef,
    KeywordSet,
    LineageEdge,
    SearchQuery,
    Session,
    SessionCounters,
    new_id,
    utcnow,
)

SCHEMA_VERSION = 1


class StorageFailure(Exception):
    """An IO-level failure; the in-memory state was not changed."""


class UnknownSession(LookupError):
    pass


class UnknownCycle(LookupError):
    pass


class UnknownCard(LookupError):
    pass


class UnknownReference(LookupError):
    pass


class UnknownBlob(LookupError):
    pass


class DanglingParent(ValueError):
    pass


class IllegalTransition(ValueError):
    """keywords/image transition pending -> present exactly once."""


@dataclass
class SlotState:
    """One fan-out slot of a cycle: a card once generation parsed, or the
    recorded failure if it never did."""

    index: int
    score: float
    card_id: str | None = None
    error: str | None = None


@dataclass(frozen=True)
class LineageStep:
    card_id: str
    title: str
    image: ImageRef | None
    edge: LineageEdge


@dataclass
class Reference:
    """A stored combine reference: either a search result or an upload."""

    id: str
    title: str = ""
    image_url: str = ""
    thumbnail_url: str = ""
    source_page_url: str = ""
    blob_id: str = ""


@dataclass
class _CycleState:
    cycle: Cycle
    slots: list[SlotState] = field(default_factory=list)


@dataclass
class _SessionState:
    session_id: str
    name: str
    created_at: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    cycle_order: list[str] = field(default_factory=list)
    cycles: dict[str, _CycleState] = field(default_factory=dict)
    cards: dict[str, IdeaCard] = field(default_factory=dict)
    card_order: list[str] = field(default_factory=list)
    used: set[str] = field(default_factory=set)
    searches: list[SearchQuery] = field(default_factory=list)
    references: dict[str, Reference] = field(default_factory=dict)


def _json_line(record: dict) -> bytes:
    return (json.dumps(record, separators=(",", ":"), ensure_ascii=False) + "\n").encode("utf-8")


class SessionStore:
    """The single serialization point for session mutation."""

    def __init__(self, root: str | Path, fsync: bool = True):
        self.root = Path(root)
        self.fsync = fsync
        self._registry_lock = threading.Lock()
        self._sessions: dict[str, _SessionState] = {}
        self._card_index: dict[str, str] = {}  # card id -> session id
        self._cycle_index: dict[str, str] = {}  # cycle id -> session id
        self._open_root()
        self._load_all()

    # -- filesystem plumbing -------------------------------------------------

    def _open_root(self) -> None:
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            marker = self.root / "store.json"
            if marker.exists():
                meta = json.loads(marker.read_text())
                version = int(meta.get("schema_version", 0))
                if version != SCHEMA_VERSION:
                    raise StorageFailure(
                        f"store schema version {version} is not supported (expected {SCHEMA_VERSION})"
                    )
            else:
                marker.write_text(json.dumps({"schema_version": SCHEMA_VERSION}) + "\n")
            (self.root / "sessions").mkdir(exist_ok=True)
            (self.root / "blobs").mkdir(exist_ok=True)
        except OSError as err:
            raise StorageFailure(f"cannot open store root {self.root}: {err}") from err

    def _log_path(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id / "log.jsonl"

    def _append(self, session_id: str, record: dict) -> None:
        path = self._log_path(session_id)
        try:
            with open(path, "ab") as fh:
                fh.write(_json_line(record))
                fh.flush()
                if self.fsync:
                    os.fsync(fh.fileno())
        except OSError as err:
            raise StorageFailure(f"cannot append to session log {path}: {err}") from err

    # -- recovery ------------------------------------------------------------

    def _load_all(self) -> None:
        sessions_dir = self.root / "sessions"
        for entry in sorted(sessions_dir.iterdir()) if sessions_dir.exists() else []:
            log = entry / "log.jsonl"
            if entry.is_dir() and log.exists():
                self._load_session(entry.name, log)

    def _load_session(self, session_id: str, log: Path) -> None:
        try:
            raw = log.read_bytes()
        except OSError as err:
            raise StorageFailure(f"cannot read session log {log}: {err}") from err
        lines = raw.split(b"\n")
        # A crash can tear the final record; everything acknowledged ends in
        # a newline, so a nonempty last element is discarded.
        complete, torn = lines[:-1], lines[-1]
        state: _SessionState | None = None
        for lineno, line in enumerate(complete, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line.decode("utf-8"))
            except (ValueError, UnicodeDecodeError) as err:
                if lineno == len(complete) and not torn:
                    break  # torn write that still got its newline out
                raise StorageFailure(f"corrupt record at {log}:{lineno}: {err}") from err
            state = self._apply(session_id, state, record)
        if state is not None:
            with self._registry_lock:
                self._sessions[session_id] = state
                for card_id in state.cards:
                    self._card_index[card_id] = session_id
                for cycle_id in state.cycles:
                    self._cycle_index[cycle_id] = session_id

    def _apply(self, session_id: str, state: _SessionState | None, record: dict) -> _SessionState:
        op = record.get("op")
        if op == "session":
            return _SessionState(
                session_id=session_id, name=record["name"], created_at=record["at"]
            )
        if state is None:
            raise StorageFailure(f"session log for {session_id} does not start with a session record")
        if op == "cycle":
            cycle = Cycle(
                id=record["id"],
                session_id=session_id,
                kind=CycleKind(record["kind"]),
                input=CycleInput(**record["input"]),
            )
            state.cycles[cycle.id] = _CycleState(cycle=cycle)
            state.cycle_order.append(cycle.id)
        elif op == "slot":
            cs = state.cycles[record["cycle"]]
            cs.slots.append(SlotState(index=record["index"], score=record["score"]))
        elif op == "slot_failed":
            cs = state.cycles[record["cycle"]]
            cs.slots[record["index"]].error = record["error"]
        elif op == "card":
            card = IdeaCard.model_validate(record["card"])
            cycle_id = record["cycle"]
            state.cards[card.id] = card
            state.card_order.append(card.id)
            cs = state.cycles[cycle_id]
            cs.cycle = cs.cycle.model_copy(update={"card_ids": cs.cycle.card_ids + (card.id,)})
            slot = record.get("slot")
            if slot is not None:
                cs.slots[slot].card_id = card.id
        elif op == "keywords":
            card = state.cards[record["card"]]
            state.cards[card.id] = card.model_copy(
                update={
                    "keywords": KeywordSet.model_validate(record["keywords"]),
                    "keyword_warnings": tuple(record.get("warnings", ())),
                }
            )
        elif op == "image":
            card = state.cards[record["card"]]
            state.cards[card.id] = card.model_copy(
                update={"image": ImageRef.model_validate(record["image"])}
            )
        elif op == "card_failed":
            card = state.cards[record["card"]]
            state.cards[card.id] = card.model_copy(update={"failure": record["message"]})
        elif op == "used":
            if record["used"]:
                state.used.add(record["card"])
            else:
                state.used.discard(record["card"])
        elif op == "search":
            state.searches.append(
                SearchQuery(keyword=record["keyword"], page=record["page"], at=record["at"])
            )
        elif op == "reference":
            ref = Reference(**{k: v for k, v in record.items() if k not in ("op", "at")})
            state.references[ref.id] = ref
        else:
            raise StorageFailure(f"unknown record op {op!r} in session {session_id}")
        return state

    # -- session lookup ------------------------------------------------------

    def _state(self, session_id: str) -> _SessionState:
        with self._registry_lock:
            state = self._sessions.get(session_id)
        if state is None:
            raise UnknownSession(session_id)
        return state

    def _state_for_card(self, card_id: str) -> _SessionState:
        with self._registry_lock:
            session_id = self._card_index.get(card_id)
        if session_id is None:
            raise UnknownCard(card_id)
        return self._state(session_id)

    def session_id_of_card(self, card_id: str) -> str:
        with self._registry_lock:
            session_id = self._card_index.get(card_id)
        if session_id is None:
            raise UnknownCard(card_id)
        return session_id

    def session_id_of_cycle(self, cycle_id: str) -> str:
        with self._registry_lock:
            session_id = self._cycle_index.get(cycle_id)
        if session_id is None:
            raise UnknownCycle(cycle_id)
        return session_id

    # -- operations ----------------------------------------------------------

    def create_session(self, name: str) -> Session:
        session_id = new_id("ses-")
        created_at = utcnow()
        directory = self.root / "sessions" / session_id
        try:
            directory.mkdir(parents=True)
        except OSError as err:
            raise StorageFailure(f"cannot create session directory: {err}") from err
        state = _SessionState(
            session_id=session_id, name=name, created_at=created_at.isoformat()
        )
        self._append(
            session_id, {"op": "session", "name": name, "at": created_at.isoformat()}
        )
        with self._registry_lock:
            self._sessions[session_id] = state
        return self.get_session(session_id)

    def list_sessions(self) -> list[Session]:
        with self._registry_lock:
            ids = sorted(self._sessions)
        return [self.get_session(session_id) for session_id in ids]

    def get_session(self, session_id: str) -> Session:
        state = self._state(session_id)
        with state.lock:
            return Session(
                id=state.session_id,
                name=state.name,
                created_at=state.created_at,
                cycles=tuple(state.cycles[cid].cycle for cid in state.cycle_order),
                cards=dict(state.cards),
                used_card_ids=frozenset(state.used),
                search_history=tuple(state.searches),
                counters=SessionCounters(
                    cycles=len(state.cycle_order),
                    ideas_generated=len(state.cards),
                    ideas_used=len(state.used),
                ),
            )

    def create_cycle(self, session_id: str, kind: CycleKind, input: CycleInput) -> Cycle:
        state = self._state(session_id)
        cycle = Cycle(id=new_id("cyc-"), session_id=session_id, kind=kind, input=input)
        with state.lock:
            if input.source_card_id and input.source_card_id not in state.cards:
                raise UnknownCard(input.source_card_id)
            self._append(
                session_id,
                {
                    "op": "cycle",
                    "id": cycle.id,
                    "kind": kind.value,
                    "input": input.model_dump(exclude_none=True),
                },
            )
            state.cycles[cycle.id] = _CycleState(cycle=cycle)
            state.cycle_order.append(cycle.id)
        with self._registry_lock:
            self._cycle_index[cycle.id] = session_id
        return cycle

    def add_slot(self, session_id: str, cycle_id: str, score: float) -> int:
        """Reserve the next fan-out slot on a cycle; returns its index."""
        state = self._state(session_id)
        with state.lock:
            cs = state.cycles.get(cycle_id)
            if cs is None:
                raise UnknownCycle(cycle_id)
            index = len(cs.slots)
            self._append(
                session_id, {"op": "slot", "cycle": cycle_id, "index": index, "score": score}
            )
            cs.slots.append(SlotState(index=index, score=score))
            return index

    def fail_slot(self, session_id: str, cycle_id: str, index: int, error: str) -> None:
        state = self._state(session_id)
        with state.lock:
            cs = state.cycles.get(cycle_id)
            if cs is None:
                raise UnknownCycle(cycle_id)
            self._append(
                session_id,
                {"op": "slot_failed", "cycle": cycle_id, "index": index, "error": error},
            )
            cs.slots[index].error = error

    def get_cycle(self, session_id: str, cycle_id: str) -> tuple[Cycle, list[SlotState]]:
        state = self._state(session_id)
        with state.lock:
            cs = state.cycles.get(cycle_id)
            if cs is None:
                raise UnknownCycle(cycle_id)
            return cs.cycle, [SlotState(**vars(slot)) for slot in cs.slots]

    def find_cycle_of_card(self, card_id: str) -> Cycle:
        state = self._state_for_card(card_id)
        with state.lock:
            for cs in state.cycles.values():
                if card_id in cs.cycle.card_ids:
                    return cs.cycle
        raise UnknownCycle(f"no cycle owns card {card_id}")

    def append_card(
        self, session_id: str, cycle_id: str, card: IdeaCard, slot: int | None = None
    ) -> SessionCounters:
        """Persist a new card; the card is durable before this returns."""
        state = self._state(session_id)
        with state.lock:
            cs = state.cycles.get(cycle_id)
            if cs is None:
                raise UnknownCycle(cycle_id)
            if card.id in state.cards:
                raise IllegalTransition(f"card {card.id} already exists")
            parent = card.lineage.parent_card_id
            if parent is not None and parent not in state.cards:
                raise DanglingParent(parent)
            record = {"op": "card", "cycle": cycle_id, "card": card.model_dump(mode="json")}
            if slot is not None:
                record["slot"] = slot
            self._append(session_id, record)
            state.cards[card.id] = card
            state.card_order.append(card.id)
            cs.cycle = cs.cycle.model_copy(update={"card_ids": cs.cycle.card_ids + (card.id,)})
            if slot is not None:
                cs.slots[slot].card_id = card.id
            counters = SessionCounters(
                cycles=len(state.cycle_order),
                ideas_generated=len(state.cards),
                ideas_used=len(state.used),
            )
        with self._registry_lock:
            self._card_index[card.id] = session_id
        return counters

    def get_card(self, card_id: str) -> IdeaCard:
        state = self._state_for_card(card_id)
        with state.lock:
            return state.cards[card_id]

    def set_card_keywords(
        self, card_id: str, keywords: KeywordSet, warnings: tuple[str, ...] = ()
    ) -> IdeaCard:
        state = self._state_for_card(card_id)
        with state.lock:
            card = state.cards[card_id]
            if card.keywords is not None:
                raise IllegalTransition(f"card {card_id} already has keywords")
            self._append(
                state.session_id,
                {
                    "op": "keywords",
                    "card": card_id,
                    "keywords": keywords.model_dump(mode="json"),
                    "warnings": list(warnings),
                },
            )
            card = card.model_copy(update={"keywords": keywords, "keyword_warnings": warnings})
            state.cards[card_id] = card
            return card

    def set_card_image(self, card_id: str, image: ImageRef) -> IdeaCard:
        state = self._state_for_card(card_id)
        if not self.blob_path(image.blob_id).exists():
            raise StorageFailure(f"image blob {image.blob_id} was never stored")
        with state.lock:
            card = state.cards[card_id]
            if card.image is not None:
                raise IllegalTransition(f"card {card_id} already has an image")
            updated = card.model_copy(update={"image": image})  # validates dimensions
            self._append(
                state.session_id,
                {"op": "image", "card": card_id, "image": image.model_dump(mode="json")},
            )
            state.cards[card_id] = updated
            return updated

    def set_card_failure(self, card_id: str, message: str) -> IdeaCard:
        state = self._state_for_card(card_id)
        with state.lock:
            card = state.cards[card_id]
            combined = f"{card.failure}; {message}" if card.failure else message
            self._append(
                state.session_id, {"op": "card_failed", "card": card_id, "message": combined}
            )
            card = card.model_copy(update={"failure": combined})
            state.cards[card_id] = card
            return card

    def mark_used(self, session_id: str, card_id: str, used: bool) -> SessionCounters:
        state = self._state(session_id)
        with state.lock:
            if card_id not in state.cards:
                raise UnknownCard(card_id)
            if used != (card_id in state.used):
                self._append(
                    session_id,
                    {"op": "used", "card": card_id, "used": used, "at": utcnow().isoformat()},
                )
                if used:
                    state.used.add(card_id)
                else:
                    state.used.discard(card_id)
            return SessionCounters(
                cycles=len(state.cycle_order),
                ideas_generated=len(state.cards),
                ideas_used=len(state.used),
            )

    def lineage_chain(self, card_id: str) -> list[LineageStep]:
        """Ancestry from the root ancestor down to the card itself."""
        state = self._state_for_card(card_id)
        with state.lock:
            chain: list[LineageStep] = []
            current: str | None = card_id
            while current is not None:
                card = state.cards.get(current)
                if card is None:
                    raise DanglingParent(current)
                chain.append(
                    LineageStep(
                        card_id=card.id, title=card.title, image=card.image, edge=card.lineage
                    )
                )
                current = card.lineage.parent_card_id
            chain.reverse()
            return chain

    def session_stats(self, session_id: str) -> SessionCounters:
        """Counters recomputed from the raw in-memory records."""
        state = self._state(session_id)
        with state.lock:
            return SessionCounters(
                cycles=len(state.cycle_order),
                ideas_generated=len(state.cards),
                ideas_used=len(state.used),
            )

    def record_search(self, session_id: str, keyword: str, page: int) -> None:
        state = self._state(session_id)
        at = utcnow()
        with state.lock:
            self._append(
                session_id,
                {"op": "search", "keyword": keyword, "page": page, "at": at.isoformat()},
            )
            state.searches.append(SearchQuery(keyword=keyword, page=page, at=at))

    def save_reference(self, session_id: str, reference: Reference) -> Reference:
        state = self._state(session_id)
        with state.lock:
            record = {"op": "reference", **vars(reference)}
            self._append(session_id, record)
            state.references[reference.id] = reference
            return reference

    def get_reference(self, session_id: str, reference_id: str) -> Reference:
        state = self._state(session_id)
        with state.lock:
            ref = state.references.get(reference_id)
            if ref is None:
                raise UnknownReference(reference_id)
            return ref

    # -- blobs ---------------------------------------------------------------

    def blob_path(self, blob_id: str) -> Path:
        digest = blob_id.removeprefix("b-")
        return self.root / "blobs" / digest[:2] / digest

    def save_blob(self, data: bytes) -> str:
        """Content-addressed write; returns the blob id."""
        digest = hashlib.sha256(data).hexdigest()
        blob_id = f"b-{digest}"
        path = self.blob_path(blob_id)
        if path.exists():
            return blob_id
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(f".{digest}.{os.getpid()}.{threading.get_ident()}.tmp")
            with open(tmp, "wb") as fh:
                fh.write(data)
                fh.flush()
                if self.fsync:
                    os.fsync(fh.fileno())
            os.replace(tmp, path)
        except OSError as err:
            raise StorageFailure(f"cannot store blob: {err}") from err
        return blob_id

    def open_blob(self, blob_id: str) -> bytes:
        path = self.blob_path(blob_id)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise UnknownBlob(blob_id) from None
        except OSError as err:
            raise StorageFailure(f"cannot read blob {blob_id}: {err}") from err

    # -- export --------------------------------------------------------------

    def export_session(self, session_id: str, out_path: str | Path) -> Path:
        """Write one self-contained archive: the session log, the store
        marker, and every blob the session references. The archive unpacks
        into a valid store root."""
        session = self.get_session(session_id)
        blob_ids = {card.image.blob_id for card in session.cards.values() if card.image}
        state = self._state(session_id)
        with state.lock:
            for ref in state.references.values():
                if ref.blob_id:
                    blob_ids.add(ref.blob_id)
            for cs in state.cycles.values():
                if cs.cycle.input.source_image:
                    blob_ids.add(cs.cycle.input.source_image)
        out = Path(out_path)
        try:
            with tarfile.open(out, "w:gz") as tar:
                tar.add(self.root / "store.json", arcname="store.json")
                tar.add(
                    self._log_path(session_id), arcname=f"sessions/{session_id}/log.jsonl"
                )
                for blob_id in sorted(blob_ids):
                    path = self.blob_path(blob_id)
                    tar.add(path, arcname=str(path.relative_to(self.root)))
        except OSError as err:
            raise StorageFailure(f"cannot export session: {err}") from err
        return out
