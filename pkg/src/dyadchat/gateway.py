"""Network face of the service: HTTP endpoints plus a websocket stream.

Every frame is an envelope {event, request_id, payload, server_ts}.
Each client request gets exactly one ack or error carrying its
request_id; per-conversation broadcast order equals durable append
order, enforced by holding the conversation lock across append and
enqueue.
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import time
from typing import Any

from fastapi import Depends, FastAPI, Header, Query, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .actions import LibraryError, UnknownActionError
from .recommend import ScoreBreakdown
from .service import AuthenticationError, DyadChatService
from .store import (
    EphemeralRecordError,
    ExchangeRecord,
    InvariantError,
    NotAMemberError,
    ReplayError,
    UnknownRecordError,
    record_to_dict,
)

EVENTS = (
    "auth",
    "chat-message",
    "puppet-action",
    "emn-update",
    "recommend-request",
    "recommend-response",
    "exchange-status",
    "error",
    "ack",
)

CLIENT_EVENTS = ("auth", "chat-message", "puppet-action", "emn-update", "recommend-request")

_IDEMPOTENCE_CAP = 1024


def make_envelope(event: str, request_id: str, payload: dict[str, Any]) -> dict[str, Any]:
    return {
        "event": event,
        "request_id": request_id,
        "payload": payload,
        "server_ts": time.time(),
    }


def breakdown_to_dict(breakdown: ScoreBreakdown) -> dict[str, Any]:
    return dataclasses.asdict(breakdown)


def _record_event(record: ExchangeRecord) -> str:
    return "chat-message" if record.kind == "text" else "puppet-action"


class _Session:
    def __init__(self, websocket: WebSocket, user_id: str, conversation_id: str):
        self.websocket = websocket
        self.user_id = user_id
        self.conversation_id = conversation_id
        self.queue: asyncio.Queue[dict[str, Any] | None] = asyncio.Queue()

    def push(self, frame: dict[str, Any]) -> None:
        self.queue.put_nowait(frame)


class Gateway:
    def __init__(self, service: DyadChatService):
        self.service = service
        self._by_conversation: dict[str, set[_Session]] = {}
        self._by_user: dict[str, set[_Session]] = {}
        self._conv_locks: dict[str, asyncio.Lock] = {}
        self._replies: dict[tuple[str, str], list[dict[str, Any]]] = {}

    def _lock_for(self, conversation_id: str) -> asyncio.Lock:
        lock = self._conv_locks.get(conversation_id)
        if lock is None:
            lock = self._conv_locks.setdefault(conversation_id, asyncio.Lock())
        return lock

    def _register(self, session: _Session) -> None:
        self._by_conversation.setdefault(session.conversation_id, set()).add(session)
        self._by_user.setdefault(session.user_id, set()).add(session)

    def _unregister(self, session: _Session) -> None:
        self._by_conversation.get(session.conversation_id, set()).discard(session)
        self._by_user.get(session.user_id, set()).discard(session)

    def _broadcast(self, conversation_id: str, frame: dict[str, Any]) -> None:
        for session in self._by_conversation.get(conversation_id, ()):
            session.push(frame)

    def _sync_user(self, user_id: str, frame: dict[str, Any], skip: _Session | None) -> None:
        for session in self._by_user.get(user_id, ()):
            if session is not skip:
                session.push(frame)

    def _remember(self, session: _Session, request_id: str, frames: list[dict[str, Any]]) -> None:
        key = (session.user_id, request_id)
        if len(self._replies) >= _IDEMPOTENCE_CAP:
            self._replies.pop(next(iter(self._replies)))
        self._replies[key] = frames

    def _replayed(self, session: _Session, request_id: str) -> bool:
        frames = self._replies.get((session.user_id, request_id))
        if frames is None:
            return False
        for frame in frames:
            session.push(frame)
        return True

    # -- websocket lifecycle --------------------------------------------

    async def run_session(self, websocket: WebSocket) -> None:
        await websocket.accept()
        session = await self._authenticate(websocket)
        if session is None:
            await websocket.close(code=4401)
            return

        writer = asyncio.create_task(self._drain(session))
        try:
            while True:
                raw = await websocket.receive_text()
                await self._handle_frame(session, raw)
        except WebSocketDisconnect:
            pass
        finally:
            self._unregister(session)
            self._broadcast(
                session.conversation_id,
                make_envelope(
                    "exchange-status",
                    "",
                    {"user_id": session.user_id, "status": "disconnected"},
                ),
            )
            session.queue.put_nowait(None)
            await asyncio.gather(writer, return_exceptions=True)

    async def _drain(self, session: _Session) -> None:
        while True:
            frame = await session.queue.get()
            if frame is None:
                return
            try:
                await session.websocket.send_text(json.dumps(frame))
            except Exception:
                return

    async def _authenticate(self, websocket: WebSocket) -> _Session | None:
        try:
            frame = json.loads(await websocket.receive_text())
        except (WebSocketDisconnect, json.JSONDecodeError):
            return None
        if not isinstance(frame, dict) or frame.get("event") != "auth":
            await websocket.send_text(
                json.dumps(
                    make_envelope(
                        "error",
                        str(frame.get("request_id", "")) if isinstance(frame, dict) else "",
                        {"code": "auth-required", "message": "first frame must be an auth envelope"},
                    )
                )
            )
            return None
        request_id = str(frame.get("request_id", ""))
        payload = frame.get("payload") or {}
        token = payload.get("token", "")
        conversation_id = payload.get("conversation_id", "")
        last_seen = payload.get("last_seen")
        try:
            user_id = self.service.authenticate(token)
            if not self.service.store.is_member(conversation_id, user_id):
                raise NotAMemberError(f"{user_id!r} is not a member of {conversation_id!r}")
            backlog = self.service.history_after(user_id, conversation_id, last_seen)
        except (AuthenticationError, NotAMemberError, UnknownRecordError) as exc:
            await websocket.send_text(
                json.dumps(
                    make_envelope(
                        "error", request_id, {"code": "unauthorized", "message": str(exc)}
                    )
                )
            )
            return None

        session = _Session(websocket, user_id, conversation_id)
        async with self._lock_for(conversation_id):
            self._register(session)
            session.push(
                make_envelope(
                    "ack",
                    request_id,
                    {
                        "user_id": user_id,
                        "conversation_id": conversation_id,
                        "resumed": len(backlog),
                    },
                )
            )
            for record in backlog:
                session.push(
                    make_envelope(_record_event(record), "", {"record": record_to_dict(record)})
                )
            self._broadcast(
                conversation_id,
                make_envelope(
                    "exchange-status", "", {"user_id": user_id, "status": "connected"}
                ),
            )
        return session

    # -- frame handling ---------------------------------------------------

    async def _handle_frame(self, session: _Session, raw: str) -> None:
        try:
            frame = json.loads(raw)
        except json.JSONDecodeError:
            session.push(
                make_envelope("error", "", {"code": "bad-frame", "message": "frame is not JSON"})
            )
            return
        if not isinstance(frame, dict):
            session.push(
                make_envelope("error", "", {"code": "bad-frame", "message": "frame must be an object"})
            )
            return
        event = frame.get("event")
        request_id = frame.get("request_id")
        payload = frame.get("payload")
        if not isinstance(request_id, str) or not request_id:
            session.push(
                make_envelope(
                    "error", "", {"code": "bad-frame", "message": "request_id must be a nonempty string"}
                )
            )
            return
        if event not in EVENTS:
            session.push(
                make_envelope(
                    "error", request_id, {"code": "bad-frame", "message": f"unknown event {event!r}"}
                )
            )
            return
        if event not in CLIENT_EVENTS:
            session.push(
                make_envelope(
                    "error",
                    request_id,
                    {"code": "bad-frame", "message": f"{event} is a server-sent event"},
                )
            )
            return
        if event == "auth":
            session.push(
                make_envelope(
                    "error", request_id, {"code": "bad-frame", "message": "session already authenticated"}
                )
            )
            return
        if not isinstance(payload, dict):
            session.push(
                make_envelope(
                    "error", request_id, {"code": "bad-frame", "message": "payload must be an object"}
                )
            )
            return
        if self._replayed(session, request_id):
            return

        try:
            if event == "chat-message":
                await self._on_chat(session, request_id, payload)
            elif event == "puppet-action":
                await self._on_action(session, request_id, payload)
            elif event == "recommend-request":
                await self._on_recommend(session, request_id, payload)
            elif event == "emn-update":
                await self._on_emn_update(session, request_id, payload)
        except (
            InvariantError,
            ReplayError,
            LibraryError,
            UnknownActionError,
            UnknownRecordError,
            NotAMemberError,
            ValueError,
        ) as exc:
            session.push(
                make_envelope("error", request_id, {"code": "rejected", "message": str(exc)})
            )

    def _check_conversation(self, session: _Session, payload: dict[str, Any]) -> None:
        target = payload.get("conversation_id")
        if target is not None and target != session.conversation_id:
            raise NotAMemberError("session is bound to a different conversation")

    async def _on_chat(self, session: _Session, request_id: str, payload: dict[str, Any]) -> None:
        self._check_conversation(session, payload)
        text = payload.get("text")
        if not isinstance(text, str) or not text:
            raise InvariantError("chat-message requires nonempty text")
        async with self._lock_for(session.conversation_id):
            record = self.service.post_text(session.user_id, session.conversation_id, text)
            self._broadcast(
                session.conversation_id,
                make_envelope("chat-message", "", {"record": record_to_dict(record)}),
            )
            ack = make_envelope("ack", request_id, {"record_id": record.record_id})
            session.push(ack)
        self._remember(session, request_id, [ack])

    async def _on_action(self, session: _Session, request_id: str, payload: dict[str, Any]) -> None:
        self._check_conversation(session, payload)
        action_id = payload.get("action_id")
        if not isinstance(action_id, str) or not action_id:
            raise InvariantError("puppet-action requires action_id")
        persist = payload.get("persist")
        if not isinstance(persist, bool):
            raise InvariantError("puppet-action requires a boolean persist flag")
        micronarrative = payload.get("micronarrative")
        if micronarrative is not None and not isinstance(micronarrative, dict):
            raise InvariantError("micronarrative must be an object")
        async with self._lock_for(session.conversation_id):
            record = self.service.post_action(
                session.user_id,
                session.conversation_id,
                action_id,
                micronarrative,
                persist,
                payload.get("paired_with"),
                payload.get("recommendation_ref"),
            )
            self._broadcast(
                session.conversation_id,
                make_envelope("puppet-action", "", {"record": record_to_dict(record)}),
            )
            ack = make_envelope(
                "ack", request_id, {"record_id": record.record_id, "kind": record.kind}
            )
            session.push(ack)
        self._remember(session, request_id, [ack])

    async def _on_recommend(
        self, session: _Session, request_id: str, payload: dict[str, Any]
    ) -> None:
        self._check_conversation(session, payload)
        seed = payload.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise InvariantError("seed must be an integer")
        results, degraded = self.service.recommend_for(
            session.user_id,
            session.conversation_id,
            payload.get("draft_text"),
            seed,
            bool(payload.get("no_noise", False)),
        )
        response = make_envelope(
            "recommend-response",
            request_id,
            {"actions": [breakdown_to_dict(b) for b in results], "degraded": degraded},
        )
        ack = make_envelope("ack", request_id, {"count": len(results)})
        session.push(response)
        session.push(ack)
        self._remember(session, request_id, [response, ack])

    async def _on_emn_update(
        self, session: _Session, request_id: str, payload: dict[str, Any]
    ) -> None:
        if "story" in payload:
            story_text = payload.get("story")
            if not isinstance(story_text, str):
                raise InvariantError("story must be a string")
            story = self.service.update_story(session.user_id, story_text)
            ack = make_envelope("ack", request_id, {"story_version": story.version})
            session.push(ack)
            # Stories are private: only the owner's other sessions sync.
            self._sync_user(
                session.user_id,
                make_envelope(
                    "emn-update", "", {"story_version": story.version, "story": story.text}
                ),
                skip=session,
            )
        elif "selected_tags" in payload:
            selected = payload.get("selected_tags")
            if not isinstance(selected, list):
                raise InvariantError("selected_tags must be a list")
            selection = self.service.select_tags(
                session.user_id, [str(t) for t in selected],
                [str(t) for t in payload.get("custom", [])],
            )
            ack = make_envelope("ack", request_id, {"selected": list(selection.selected)})
            session.push(ack)
            self._sync_user(
                session.user_id,
                make_envelope("emn-update", "", {"selected_tags": list(selection.selected)}),
                skip=session,
            )
        else:
            raise InvariantError("emn-update requires story or selected_tags")
        self._remember(session, request_id, [ack])


# -- HTTP layer -----------------------------------------------------------


class LoginBody(BaseModel):
    user_id: str
    display_name: str | None = None


class ContactBody(BaseModel):
    peer_id: str
    relationship_icon: str = "friend"


class ConversationBody(BaseModel):
    peer_id: str


class RecommendBody(BaseModel):
    conversation_id: str
    draft_text: str | None = None
    seed: int | None = None
    no_noise: bool = False


class OutcomeBody(BaseModel):
    shown: list[str]
    chosen: str | None = None
    hidden: str | None = None


class NarrateBody(BaseModel):
    action_id: str
    conversation_id: str | None = None
    tags: list[str] | None = None


class StoryBody(BaseModel):
    text: str


class TagSelectBody(BaseModel):
    selected: list[str]
    custom: list[str] = []


_STATUS_BY_ERROR: list[tuple[type[Exception], int, str]] = [
    (AuthenticationError, 401, "unauthorized"),
    (NotAMemberError, 403, "forbidden"),
    (EphemeralRecordError, 410, "ephemeral record"),
    (UnknownActionError, 404, "not found"),
    (UnknownRecordError, 404, "not found"),
    (ReplayError, 400, "bad request"),
    (InvariantError, 400, "bad request"),
    (LibraryError, 400, "bad request"),
    (ValueError, 400, "bad request"),
]


def create_app(service: DyadChatService) -> FastAPI:
    app = FastAPI(title="dyadchat", version="0.1.0")
    gateway = Gateway(service)
    app.state.gateway = gateway
    app.state.service = service

    for exc_type, status, code in _STATUS_BY_ERROR:
        def handler(request, exc, status=status, code=code):
            return JSONResponse(
                status_code=status, content={"error": code, "message": str(exc)}
            )

        app.add_exception_handler(exc_type, handler)

    def require_user(authorization: str = Header(default="")) -> str:
        if not authorization.startswith("Bearer "):
            raise AuthenticationError("missing bearer token")
        return service.authenticate(authorization.removeprefix("Bearer "))

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {"ok": True, "actions": len(service.library)}

    @app.post("/login")
    def login(body: LoginBody) -> dict[str, Any]:
        token = service.login(body.user_id, body.display_name)
        return {"token": token, "user_id": body.user_id}

    @app.get("/library")
    def library() -> dict[str, Any]:
        return service.library_document()

    @app.post("/contacts")
    def add_contact(body: ContactBody, user_id: str = Depends(require_user)) -> dict[str, Any]:
        contact = service.add_contact(user_id, body.peer_id, body.relationship_icon)
        return {
            "owner_id": contact.owner_id,
            "peer_id": contact.peer_id,
            "relationship_icon": contact.relationship_icon,
        }

    @app.get("/contacts")
    def list_contacts(user_id: str = Depends(require_user)) -> dict[str, Any]:
        return {
            "contacts": [
                {
                    "owner_id": c.owner_id,
                    "peer_id": c.peer_id,
                    "relationship_icon": c.relationship_icon,
                }
                for c in service.contacts_of(user_id)
            ]
        }

    @app.post("/conversations")
    def open_conversation(
        body: ConversationBody, user_id: str = Depends(require_user)
    ) -> dict[str, Any]:
        return {"conversation_id": service.open_conversation(user_id, body.peer_id)}

    @app.get("/history/{conversation_id}")
    def history(
        conversation_id: str,
        page: int = Query(default=0, ge=0),
        page_size: int = Query(default=50, ge=1, le=500),
        user_id: str = Depends(require_user),
    ) -> dict[str, Any]:
        records = service.history(user_id, conversation_id, page, page_size)
        return {"records": [record_to_dict(r) for r in records], "page": page}

    @app.post("/recommend")
    def recommend(body: RecommendBody, user_id: str = Depends(require_user)) -> dict[str, Any]:
        results, degraded = service.recommend_for(
            user_id, body.conversation_id, body.draft_text, body.seed, body.no_noise
        )
        return {"actions": [breakdown_to_dict(b) for b in results], "degraded": degraded}

    @app.post("/recommend/outcome")
    def outcome(body: OutcomeBody, user_id: str = Depends(require_user)) -> dict[str, Any]:
        service.record_outcome(user_id, body.shown, body.chosen, body.hidden)
        return {"ok": True}

    @app.post("/narrate")
    def narrate(body: NarrateBody, user_id: str = Depends(require_user)) -> dict[str, Any]:
        narrative = service.narrate(user_id, body.action_id, body.conversation_id, body.tags)
        return {
            "micronarrative": {
                "text": narrative.text,
                "action_id": narrative.action_id,
                "story_version": narrative.story_version,
                "tags_used": list(narrative.tags_used),
                "generated_by": narrative.generated_by,
                "edited": narrative.edited,
            }
        }

    @app.post("/story")
    def update_story(body: StoryBody, user_id: str = Depends(require_user)) -> dict[str, Any]:
        story = service.update_story(user_id, body.text)
        return {"version": story.version}

    @app.get("/tags")
    def proposed_tags(user_id: str = Depends(require_user)) -> dict[str, Any]:
        tags = service.propose_tags(user_id)
        return {
            "likes_dislikes": list(tags.likes_dislikes),
            "habits": list(tags.habits),
            "social_style": list(tags.social_style),
            "emotion": list(tags.emotion),
            "selected": list(service.stories.selected_tags(user_id)),
        }

    @app.post("/tags/select")
    def select_tags(body: TagSelectBody, user_id: str = Depends(require_user)) -> dict[str, Any]:
        selection = service.select_tags(user_id, body.selected, body.custom)
        return {"selected": list(selection.selected), "custom": list(selection.custom)}

    @app.get("/replay/{record_id}")
    def replay(record_id: str, user_id: str = Depends(require_user)) -> dict[str, Any]:
        return service.replay(user_id, record_id)

    @app.websocket("/ws")
    async def websocket_endpoint(websocket: WebSocket) -> None:
        await gateway.run_session(websocket)

    return app


def serve(service: DyadChatService, host: str, port: int) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    uvicorn.run(create_app(service), host=host, port=port, log_level="info")
