"""HTTP service: the wire API the sidebar client drives, including the
push channel for state diffs."""

from __future__ import annotations

import asyncio
import json
import threading
import time
import uuid
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, StreamingResponse
from pydantic import BaseModel, Field

from .config import EngineConfig
from .errors import (
    CorruptLog,
    EmptyDocument,
    EmptySelection,
    EngineError,
    InvalidCount,
    InvalidPartition,
    MalformedUrl,
    SchemaViolation,
    UnknownGroup,
    UnknownSession,
    UnknownSnippet,
    UnknownTarget,
)
from .session import SCHEMA_VERSION, Session, SessionStore

_NOT_FOUND = (UnknownSession, UnknownGroup, UnknownSnippet, UnknownTarget)
_UNPROCESSABLE = (
    SchemaViolation,
    InvalidCount,
    InvalidPartition,
    EmptySelection,
    EmptyDocument,
    MalformedUrl,
)


class LayoutEntry(BaseModel):
    block_index: int
    scroll_offset: int


class SessionCreate(BaseModel):
    schema_version: int = SCHEMA_VERSION
    session_id: Optional[str] = None


class PageIngest(BaseModel):
    schema_version: int = SCHEMA_VERSION
    page_id: Optional[str] = None
    url: str
    title: Optional[str] = None
    html: str
    captured_at: int
    layout: Optional[list[LayoutEntry]] = None


class EventPayload(BaseModel):
    kind: str
    page_id: str
    block_id: str
    timestamp: int
    duration_s: Optional[float] = None
    text_len: Optional[int] = None
    highlight_linked: bool = False


class EventBatch(BaseModel):
    schema_version: int = SCHEMA_VERSION
    events: list[EventPayload]


class ActionRequest(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: str
    payload: dict = Field(default_factory=dict)
    timestamp: int = 0


class SessionManager:
    """Owns sessions and the single-writer lock per session."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.store = SessionStore(config.store_dir) if config.store_dir else None
        self.sessions: dict[str, Session] = {}
        self.locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def create(self, session_id: Optional[str] = None) -> Session:
        with self._registry_lock:
            sid = session_id or f"s-{uuid.uuid4().hex[:12]}"
            if sid in self.sessions:
                return self.sessions[sid]
            session = Session(sid, self.config, store=self.store)
            self.sessions[sid] = session
            self.locks[sid] = threading.Lock()
            return session

    def get(self, session_id: str) -> tuple[Session, threading.Lock]:
        with self._registry_lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise UnknownSession(session_id)
            return session, self.locks[session_id]


class PushHub:
    """Fan-out of state diffs to subscribers. Ranking-only updates are
    debounced so rapid signal streams push at most once per window;
    structural changes push immediately."""

    def __init__(self, manager: SessionManager, debounce_s: float):
        self.manager = manager
        self.debounce_s = debounce_s
        self.queues: dict[str, list[asyncio.Queue]] = {}
        self.last_sent_revision: dict[str, int] = {}
        self.last_push_at: dict[str, float] = {}
        self.pending: dict[str, asyncio.Task] = {}

    def subscribe(self, session_id: str) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue()
        self.queues.setdefault(session_id, []).append(queue)
        return queue

    def unsubscribe(self, session_id: str, queue: asyncio.Queue) -> None:
        subscribers = self.queues.get(session_id, [])
        if queue in subscribers:
            subscribers.remove(queue)

    def _flush(self, session_id: str) -> None:
        session, lock = self.manager.get(session_id)
        with lock:
            since = self.last_sent_revision.get(session_id, 0)
            if session.revision <= since:
                return
            diff = session.diff_since(since)
        self.last_sent_revision[session_id] = diff["revision"]
        self.last_push_at[session_id] = time.monotonic()
        for queue in self.queues.get(session_id, []):
            queue.put_nowait(diff)

    async def _flush_later(self, session_id: str, delay: float) -> None:
        try:
            await asyncio.sleep(delay)
            self._flush(session_id)
        finally:
            self.pending.pop(session_id, None)

    def notify(self, session_id: str, structural: bool) -> None:
        if not self.queues.get(session_id):
            return
        now = time.monotonic()
        last = self.last_push_at.get(session_id)
        if structural or last is None or now - last >= self.debounce_s:
            task = self.pending.pop(session_id, None)
            if task is not None:
                task.cancel()
            self._flush(session_id)
            return
        if session_id not in self.pending:
            delay = self.debounce_s - (now - last)
            self.pending[session_id] = asyncio.get_event_loop().create_task(
                self._flush_later(session_id, delay)
            )


def create_app(config: Optional[EngineConfig] = None) -> FastAPI:
    config = (config or EngineConfig()).with_env()
    manager = SessionManager(config)
    app = FastAPI(title="sensetable engine", version="0.1.0")
    # the sidebar calls the engine from arbitrary page origins
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    hub = PushHub(manager, config.push_debounce_s)
    app.state.manager = manager
    app.state.hub = hub

    def _http_error(exc: EngineError) -> HTTPException:
        if isinstance(exc, _NOT_FOUND):
            return HTTPException(status_code=404, detail={"error": type(exc).__name__, "message": str(exc)})
        if isinstance(exc, _UNPROCESSABLE):
            return HTTPException(status_code=422, detail={"error": type(exc).__name__, "message": str(exc)})
        return HTTPException(status_code=400, detail={"error": type(exc).__name__, "message": str(exc)})

    @app.post("/sessions")
    async def create_session(body: SessionCreate):
        session = manager.create(body.session_id)
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": session.session_id,
            "revision": session.revision,
        }

    @app.post("/sessions/{session_id}/pages")
    async def ingest_page(session_id: str, body: PageIngest):
        try:
            session, lock = manager.get(session_id)
            with lock:
                revision = session.ingest_page(body.model_dump(exclude_none=True))
                page = list(session._pages.values())[-1]
                blocks = [
                    {
                        "block_id": b.block_id,
                        "order_index": b.order_index,
                        "kind": b.kind.value,
                        "scroll_offset": b.scroll_offset,
                    }
                    for b in page.blocks
                ]
        except EngineError as exc:
            raise _http_error(exc)
        hub.notify(session_id, structural=True)
        return {
            "schema_version": SCHEMA_VERSION,
            "revision": revision,
            "page_id": page.page_id,
            "blocks": blocks,
        }

    @app.post("/sessions/{session_id}/events")
    async def ingest_events(session_id: str, body: EventBatch):
        try:
            session, lock = manager.get(session_id)
            with lock:
                before = session.structural_fingerprint()
                revision, rejected = session.ingest_events(
                    [e.model_dump(exclude_none=True) for e in body.events]
                )
                structural = session.structural_fingerprint() != before
        except EngineError as exc:
            raise _http_error(exc)
        hub.notify(session_id, structural=structural)
        return {
            "schema_version": SCHEMA_VERSION,
            "revision": revision,
            "accepted": len(body.events) - len(rejected),
            "rejected": rejected,
        }

    @app.post("/sessions/{session_id}/actions")
    async def apply_action(session_id: str, body: ActionRequest):
        try:
            session, lock = manager.get(session_id)
            with lock:
                revision = session.apply_action(body.model_dump())
        except EngineError as exc:
            raise _http_error(exc)
        hub.notify(session_id, structural=True)
        return {"schema_version": SCHEMA_VERSION, "revision": revision}

    @app.get("/sessions/{session_id}/state")
    async def get_state(session_id: str, since: Optional[int] = Query(default=None)):
        try:
            session, lock = manager.get(session_id)
            with lock:
                if since is None:
                    return session.state_snapshot()
                return session.diff_since(since)
        except EngineError as exc:
            raise _http_error(exc)

    @app.get("/sessions/{session_id}/detail")
    async def get_detail(session_id: str, kind: str, target_id: str):
        try:
            session, lock = manager.get(session_id)
            with lock:
                return session.detail_view(kind, target_id)
        except EngineError as exc:
            raise _http_error(exc)

    @app.get("/sessions/{session_id}/export")
    async def export(session_id: str, format: str = Query(default="json")):
        try:
            session, lock = manager.get(session_id)
            with lock:
                body = session.export(format)
        except EngineError as exc:
            raise _http_error(exc)
        media = {
            "json": "application/json",
            "csv": "text/csv",
            "md": "text/markdown",
            "markdown": "text/markdown",
        }[format]
        return PlainTextResponse(body, media_type=media)

    @app.get("/sessions/{session_id}/subscribe")
    async def subscribe(session_id: str, request: Request):
        try:
            session, lock = manager.get(session_id)
        except EngineError as exc:
            raise _http_error(exc)
        queue = hub.subscribe(session_id)
        with lock:
            initial = session.diff_since(0)
        hub.last_sent_revision[session_id] = initial["revision"]
        hub.last_push_at[session_id] = time.monotonic()

        async def stream():
            try:
                yield f"data: {json.dumps(initial, sort_keys=True)}\n\n"
                while True:
                    if await request.is_disconnected():
                        break
                    try:
                        diff = await asyncio.wait_for(queue.get(), timeout=1.0)
                    except asyncio.TimeoutError:
                        yield ": keep-alive\n\n"
                        continue
                    yield f"data: {json.dumps(diff, sort_keys=True)}\n\n"
            finally:
                hub.unsubscribe(session_id, queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
