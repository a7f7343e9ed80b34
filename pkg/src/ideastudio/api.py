"""HTTP facade over the orchestrator and store, plus UI static assets.

Request handlers never block on model latency beyond enqueueing: brainstorm
and explore return 202 with a cycle id and run in background tasks, while
card states are retrievable by GET and streamable as server-sent events.
Combine and refine respond once the new card ids exist (idea stage done);
keyword extraction and image generation continue in the background and
stream in.

Event streams open with a full state snapshot, then deltas; events carry
complete summaries, so reconnecting (Last-Event-ID or not) is always safe.

Authentication is one optional shared bearer token. Endpoints that
browsers hit without headers (blobs, thumbnails, event streams) also
accept it as a ``token`` query parameter.
"""

from __future__ import annotations

import asyncio
import json
import logging
import urllib.parse
from contextlib import asynccontextmanager
from datetime import datetime

import httpx
from fastapi import Depends, FastAPI, Query, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import prompts
from .config import ServiceConfig, build_providers
from .events import EventBus
from .model import DesignIdea, KeywordSet, SessionCounters
from .orchestrator import (
    AllIdeasFailed,
    Orchestrator,
    ReferenceInput,
    StructuredOutputFailure,
    card_state,
    cycle_is_complete,
)
from .providers import AuthFailure, ProviderError, SearchResult
from .store import (
    DanglingParent,
    IllegalTransition,
    SessionStore,
    StorageFailure,
    UnknownBlob,
    UnknownCard,
    UnknownCycle,
    UnknownReference,
    UnknownSession,
)

SSE_KEEPALIVE_SECONDS = 15.0

logger = logging.getLogger("ideastudio.api")


# -- request bodies ----------------------------------------------------------


class CreateSessionBody(BaseModel):
    name: str = "untitled"


class BrainstormBody(BaseModel):
    instruction: str | None = None
    image_ref: str | None = None


class ReferenceBody(BaseModel):
    image_ref: str | None = None
    image_url: str | None = None
    thumbnail_url: str | None = None
    source_page_url: str | None = None
    title: str | None = None
    width: int = 0
    height: int = 0


class CombineBody(BaseModel):
    keyword: str
    reference: ReferenceBody


class RefineBody(BaseModel):
    instruction: str


class ExploreBody(BaseModel):
    instruction: str | None = None


class UsedBody(BaseModel):
    used: bool


# -- response views ----------------------------------------------------------


class CycleSummaryView(BaseModel):
    id: str
    kind: str
    instruction: str | None
    source_image: str | None
    source_card_id: str | None
    card_count: int
    complete: bool


class SessionView(BaseModel):
    id: str
    name: str
    created_at: datetime
    counters: SessionCounters
    cycles: list[CycleSummaryView]


class SlotView(BaseModel):
    index: int
    score: float
    state: str  # pending | ready | failed
    card_id: str | None = None
    error: str | None = None


class CardSummaryView(BaseModel):
    id: str
    title: str
    state: str
    image_url: str | None = None
    failure: str | None = None
    created_at: datetime
    used: bool = False


class CycleView(BaseModel):
    id: str
    session_id: str
    kind: str
    instruction: str | None
    source_image: str | None
    source_card_id: str | None
    slots: list[SlotView]
    cards: list[CardSummaryView]
    complete: bool


class LineageStepView(BaseModel):
    card_id: str
    title: str
    image_url: str | None
    origin_kind: str
    keyword: str | None = None
    instruction: str | None = None
    creative_score: float
    reference_title: str | None = None
    reference_thumbnail_url: str | None = None


class CardView(BaseModel):
    id: str
    session_id: str
    cycle_id: str
    title: str
    state: str
    used: bool
    idea: DesignIdea
    keywords: KeywordSet | None
    keyword_warnings: list[str]
    image_url: str | None
    image_width: int | None
    image_height: int | None
    failure: str | None
    created_at: datetime
    lineage: list[LineageStepView]


class SearchView(BaseModel):
    keyword: str
    page: int
    results: list[SearchResult]


class CardIdsView(BaseModel):
    card_ids: list[str]


class CycleStartedView(BaseModel):
    cycle_id: str


class UploadView(BaseModel):
    image_ref: str


class ErrorView(BaseModel):
    error: str
    detail: str


def _blob_url(blob_id: str | None) -> str | None:
    return f"/api/blobs/{blob_id}" if blob_id else None


def create_app(config: ServiceConfig) -> FastAPI:
    store = SessionStore(config.store_root)
    providers = build_providers(config)
    bus = EventBus()
    orchestrator = Orchestrator(
        providers,
        store,
        policy=config.fan_out,
        bus=bus,
        template_dir=config.prompt_template_dir,
    )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        for task in list(app.state.tasks):
            task.cancel()
        orchestrator.cancel_background()
        if app.state.thumb_client is not None:
            await app.state.thumb_client.aclose()
        await providers.aclose()

    app = FastAPI(
        title="ideastudio",
        docs_url="/api/docs",
        openapi_url="/api/openapi.json",
        lifespan=lifespan,
    )
    app.state.store = store
    app.state.orchestrator = orchestrator
    app.state.bus = bus
    app.state.config = config
    app.state.tasks = set()
    app.state.thumb_client = None

    def spawn(coro) -> asyncio.Task:
        task = asyncio.get_running_loop().create_task(coro)
        app.state.tasks.add(task)
        task.add_done_callback(app.state.tasks.discard)
        return task

    async def _run_fanout(coro) -> None:
        # Per-slot failures already landed in the store and on the event
        # stream; the wrapper only keeps the task from dying loudly.
        try:
            await coro
        except (AllIdeasFailed, ProviderError, StorageFailure) as err:
            logger.warning("background fan-out failed: %s", err)

    # -- auth ------------------------------------------------------------------

    async def require_token(request: Request, token: str | None = Query(default=None)) -> None:
        expected = config.bearer_token
        if not expected:
            return
        header = request.headers.get("Authorization", "")
        if header == f"Bearer {expected}" or token == expected:
            return
        raise AuthTokenRejected()

    class AuthTokenRejected(Exception):
        pass

    guarded = Depends(require_token)

    # -- error mapping ----------------------------------------------------------

    def _error(status: int, error: str, detail: str) -> JSONResponse:
        return JSONResponse(
            status_code=status, content=ErrorView(error=error, detail=detail).model_dump()
        )

    @app.exception_handler(RequestValidationError)
    async def _on_schema(request: Request, exc: RequestValidationError):
        return _error(400, "schema", str(exc.errors()[:3]))

    @app.exception_handler(AuthTokenRejected)
    async def _on_auth(request: Request, exc: AuthTokenRejected):
        return _error(401, "unauthorized", "missing or invalid bearer token")

    for unknown in (UnknownSession, UnknownCycle, UnknownCard, UnknownBlob, UnknownReference):

        @app.exception_handler(unknown)
        async def _on_unknown(request: Request, exc: LookupError):
            return _error(404, "not_found", str(exc))

    @app.exception_handler(prompts.EmptyInputError)
    @app.exception_handler(prompts.EmptyFieldError)
    async def _on_empty(request: Request, exc: ValueError):
        return _error(422, "empty_input", str(exc))

    @app.exception_handler(ValueError)
    async def _on_value(request: Request, exc: ValueError):
        return _error(422, "invalid", str(exc))

    @app.exception_handler(IllegalTransition)
    @app.exception_handler(DanglingParent)
    async def _on_conflict(request: Request, exc: Exception):
        return _error(409, "conflict", str(exc))

    @app.exception_handler(ProviderError)
    async def _on_provider(request: Request, exc: ProviderError):
        if isinstance(exc, AuthFailure):
            return _error(502, "provider_auth", str(exc))
        return _error(502, "provider", str(exc))

    @app.exception_handler(StructuredOutputFailure)
    @app.exception_handler(AllIdeasFailed)
    async def _on_generation(request: Request, exc: Exception):
        return _error(502, "generation_failed", str(exc))

    @app.exception_handler(StorageFailure)
    async def _on_storage(request: Request, exc: StorageFailure):
        return _error(500, "storage", str(exc))

    # -- view assembly -----------------------------------------------------------

    def session_view(session_id: str) -> SessionView:
        session = store.get_session(session_id)
        cycles = []
        for cycle in session.cycles:
            _, slots = store.get_cycle(session_id, cycle.id)
            cycles.append(
                CycleSummaryView(
                    id=cycle.id,
                    kind=cycle.kind.value,
                    instruction=cycle.input.instruction,
                    source_image=cycle.input.source_image,
                    source_card_id=cycle.input.source_card_id,
                    card_count=len(cycle.card_ids),
                    complete=cycle_is_complete(slots, session.cards),
                )
            )
        return SessionView(
            id=session.id,
            name=session.name,
            created_at=session.created_at,
            counters=session.counters,
            cycles=cycles,
        )

    def card_summary(card, used: bool) -> CardSummaryView:
        return CardSummaryView(
            id=card.id,
            title=card.title,
            state=card_state(card),
            image_url=_blob_url(card.image.blob_id if card.image else None),
            failure=card.failure,
            created_at=card.created_at,
            used=used,
        )

    def cycle_view(cycle_id: str) -> CycleView:
        session_id = store.session_id_of_cycle(cycle_id)
        cycle, slots = store.get_cycle(session_id, cycle_id)
        session = store.get_session(session_id)
        return CycleView(
            id=cycle.id,
            session_id=session_id,
            kind=cycle.kind.value,
            instruction=cycle.input.instruction,
            source_image=cycle.input.source_image,
            source_card_id=cycle.input.source_card_id,
            slots=[
                SlotView(
                    index=slot.index,
                    score=slot.score,
                    state="failed" if slot.error else ("ready" if slot.card_id else "pending"),
                    card_id=slot.card_id,
                    error=slot.error,
                )
                for slot in slots
            ],
            cards=[
                card_summary(session.cards[cid], cid in session.used_card_ids)
                for cid in cycle.card_ids
            ],
            complete=cycle_is_complete(slots, session.cards),
        )

    def card_view(card_id: str) -> CardView:
        session_id = store.session_id_of_card(card_id)
        card = store.get_card(card_id)
        session = store.get_session(session_id)
        cycle = store.find_cycle_of_card(card_id)
        steps = []
        for step in store.lineage_chain(card_id):
            ref_title = ref_thumb = None
            if step.edge.reference_image_id:
                ref = store.get_reference(session_id, step.edge.reference_image_id)
                ref_title = ref.title
                ref_thumb = ref.thumbnail_url or _blob_url(ref.blob_id or None)
            steps.append(
                LineageStepView(
                    card_id=step.card_id,
                    title=step.title,
                    image_url=_blob_url(step.image.blob_id if step.image else None),
                    origin_kind=step.edge.origin_kind.value,
                    keyword=step.edge.keyword,
                    instruction=step.edge.instruction,
                    creative_score=step.edge.creative_score,
                    reference_title=ref_title,
                    reference_thumbnail_url=ref_thumb,
                )
            )
        return CardView(
            id=card.id,
            session_id=session_id,
            cycle_id=cycle.id,
            title=card.title,
            state=card_state(card),
            used=card.id in session.used_card_ids,
            idea=card.idea,
            keywords=card.keywords,
            keyword_warnings=list(card.keyword_warnings),
            image_url=_blob_url(card.image.blob_id if card.image else None),
            image_width=card.image.width if card.image else None,
            image_height=card.image.height if card.image else None,
            failure=card.failure,
            created_at=card.created_at,
            lineage=steps,
        )

    # -- SSE --------------------------------------------------------------------

    def _frame(seq: int, type_: str, payload: dict) -> str:
        return f"id: {seq}\nevent: {type_}\ndata: {json.dumps(payload)}\n\n"

    async def _stream(topic_kind: str, key: str, snapshot, is_terminal=None):
        """Snapshot first, then live events. With no terminal predicate the
        stream stays open until the client disconnects — a cycle keeps
        receiving refinement children long after its own fan-out settled."""
        async with bus.subscribe(topic_kind, key) as queue:
            yield "retry: 2000\n\n"
            for type_, payload in snapshot():
                yield _frame(0, type_, payload)
                if is_terminal is not None and is_terminal(type_, payload):
                    return
            while True:
                try:
                    event = await asyncio.wait_for(queue.get(), timeout=SSE_KEEPALIVE_SECONDS)
                except asyncio.TimeoutError:
                    yield ": keepalive\n\n"
                    continue
                yield _frame(event.seq, event.type, event.payload)
                if is_terminal is not None and is_terminal(event.type, event.payload):
                    return

    def _sse(generator) -> StreamingResponse:
        return StreamingResponse(
            generator,
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    # -- endpoints ----------------------------------------------------------------

    @app.get("/api/health")
    async def health() -> dict:
        return {"status": "ok"}

    @app.post("/api/sessions", response_model=SessionView, status_code=201, dependencies=[guarded])
    async def create_session(body: CreateSessionBody) -> SessionView:
        session = store.create_session(body.name)
        return session_view(session.id)

    @app.get("/api/sessions", response_model=list[SessionView], dependencies=[guarded])
    async def list_sessions() -> list[SessionView]:
        return [session_view(s.id) for s in store.list_sessions()]

    @app.get("/api/sessions/{session_id}", response_model=SessionView, dependencies=[guarded])
    async def get_session(session_id: str) -> SessionView:
        return session_view(session_id)

    @app.get(
        "/api/sessions/{session_id}/stats",
        response_model=SessionCounters,
        dependencies=[guarded],
    )
    async def get_stats(session_id: str) -> SessionCounters:
        return store.session_stats(session_id)

    @app.post(
        "/api/sessions/{session_id}/brainstorm",
        response_model=CycleStartedView,
        status_code=202,
        dependencies=[guarded],
    )
    async def start_brainstorm(session_id: str, body: BrainstormBody) -> CycleStartedView:
        store.get_session(session_id)  # 404 before accepting
        cycle = await orchestrator.start_brainstorm_cycle(
            session_id, body.instruction, body.image_ref
        )
        spawn(_run_fanout(orchestrator.run_brainstorm_fanout(session_id, cycle.id)))
        return CycleStartedView(cycle_id=cycle.id)

    @app.get("/api/cycles/{cycle_id}", response_model=CycleView, dependencies=[guarded])
    async def get_cycle(cycle_id: str) -> CycleView:
        return cycle_view(cycle_id)

    @app.get("/api/cycles/{cycle_id}/events", dependencies=[guarded])
    async def cycle_events(
        cycle_id: str, until_complete: bool = Query(default=False)
    ) -> StreamingResponse:
        """Live cycle stream. Stays open by default, since refinements keep
        appending children to a cycle; ``until_complete=1`` gives scripted
        clients a bounded read that ends once the cycle settles."""
        cycle_view(cycle_id)  # 404 before streaming

        def snapshot():
            current = cycle_view(cycle_id)
            yield "cycle-state", json.loads(current.model_dump_json())

        is_terminal = None
        if until_complete:

            def is_terminal(type_: str, payload: dict) -> bool:
                if type_ == "cycle-complete":
                    return True
                return type_ == "cycle-state" and payload.get("complete", False)

        return _sse(_stream("cycle", cycle_id, snapshot, is_terminal))

    @app.get("/api/cards/{card_id}", response_model=CardView, dependencies=[guarded])
    async def get_card(card_id: str) -> CardView:
        return card_view(card_id)

    @app.get("/api/cards/{card_id}/events", dependencies=[guarded])
    async def card_events(card_id: str) -> StreamingResponse:
        card_view(card_id)  # 404 before streaming

        def snapshot():
            current = card_view(card_id)
            yield "card-state", json.loads(current.model_dump_json())

        def is_terminal(type_: str, payload: dict) -> bool:
            if type_ in ("card-ready", "card-failed"):
                return True
            return type_ == "card-state" and payload.get("state") in ("ready", "failed")

        return _sse(_stream("card", card_id, snapshot, is_terminal))

    @app.get("/api/search", response_model=SearchView, dependencies=[guarded])
    async def search(
        keyword: str = Query(default=""),
        page: int = Query(default=0, ge=0),
        session_id: str | None = Query(default=None),
    ) -> SearchView:
        if not keyword.strip():
            raise prompts.EmptyFieldError("keyword")
        if session_id is not None:
            results = await orchestrator.search_for_keyword(session_id, keyword, page)
        else:
            results = await providers.search.search_images(keyword, page)
        return SearchView(keyword=keyword, page=page, results=results)

    @app.post(
        "/api/cards/{card_id}/combine", response_model=CardIdsView, dependencies=[guarded]
    )
    async def combine(card_id: str, body: CombineBody) -> CardIdsView:
        ref = body.reference
        if ref.image_ref:
            reference = ReferenceInput(blob_id=ref.image_ref)
        elif ref.image_url:
            reference = ReferenceInput(
                search_result=SearchResult(
                    image_url=ref.image_url,
                    thumbnail_url=ref.thumbnail_url or ref.image_url,
                    source_page_url=ref.source_page_url or ref.image_url,
                    title=ref.title or "",
                    width=ref.width,
                    height=ref.height,
                )
            )
        else:
            raise prompts.EmptyFieldError("reference")
        cards = await orchestrator.combine_with_reference(card_id, body.keyword, reference)
        return CardIdsView(card_ids=[card.id for card in cards])

    @app.post("/api/cards/{card_id}/refine", response_model=CardIdsView, dependencies=[guarded])
    async def refine(card_id: str, body: RefineBody) -> CardIdsView:
        cards = await orchestrator.refine_by_instruction(card_id, body.instruction)
        return CardIdsView(card_ids=[card.id for card in cards])

    @app.post(
        "/api/cards/{card_id}/explore",
        response_model=CycleStartedView,
        status_code=202,
        dependencies=[guarded],
    )
    async def explore(card_id: str, body: ExploreBody) -> CycleStartedView:
        cycle = await orchestrator.start_explore_cycle(card_id, body.instruction)
        spawn(_run_fanout(orchestrator.run_explore_fanout(cycle.session_id, cycle.id)))
        return CycleStartedView(cycle_id=cycle.id)

    @app.post(
        "/api/cards/{card_id}/used", response_model=SessionCounters, dependencies=[guarded]
    )
    async def set_used(card_id: str, body: UsedBody) -> SessionCounters:
        session_id = store.session_id_of_card(card_id)
        return store.mark_used(session_id, card_id, body.used)

    @app.get("/api/lineage/{card_id}", response_model=CardView, dependencies=[guarded])
    async def lineage(card_id: str) -> CardView:
        return card_view(card_id)

    @app.post("/api/images", response_model=UploadView, status_code=201, dependencies=[guarded])
    async def upload_image(file: UploadFile) -> UploadView:
        data = await file.read()
        if not data:
            raise prompts.EmptyFieldError("file")
        return UploadView(image_ref=store.save_blob(data))

    @app.get("/api/blobs/{blob_id}", dependencies=[guarded])
    async def get_blob(blob_id: str) -> Response:
        data = store.open_blob(blob_id)
        media = "image/png"
        if data.startswith(b"\xff\xd8\xff"):
            media = "image/jpeg"
        elif data[:4] == b"RIFF" and data[8:12] == b"WEBP":
            media = "image/webp"
        return Response(
            content=data,
            media_type=media,
            headers={"Cache-Control": "public, max-age=31536000, immutable"},
        )

    @app.get("/api/thumb", dependencies=[guarded])
    async def thumbnail(url: str = Query(default="")) -> Response:
        """Proxy search-result thumbnails so the UI stays same-origin."""
        parsed = urllib.parse.urlparse(url)
        if parsed.scheme not in ("http", "https"):
            raise ValueError("thumbnail url must be http(s)")
        local = await providers.search.resolve_thumbnail(url)
        if local is not None:
            return Response(content=local, media_type="image/png")
        if app.state.thumb_client is None:
            app.state.thumb_client = httpx.AsyncClient(timeout=10.0, follow_redirects=True)
        try:
            upstream = await app.state.thumb_client.get(url)
        except httpx.HTTPError as err:
            return _error(502, "thumbnail", str(err))
        if upstream.status_code >= 400:
            return _error(502, "thumbnail", f"upstream status {upstream.status_code}")
        media = upstream.headers.get("Content-Type", "image/jpeg")
        return Response(content=upstream.content, media_type=media)

    if config.static_dir is not None:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app
