"""Users, contacts, dyadic conversations, and the exchange thread.

Durable records go to an append-only JSONL log per conversation and are
flushed to disk before the append returns, so an acknowledged record
survives restart. Action-only statuses live in a transient buffer with a
TTL and never touch the log.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterator

from .narrative import Micronarrative

RECORD_KINDS = ("text", "action_with_narrative", "action_only_status", "dyadic_exchange")
RELATIONSHIP_ICONS = ("friend", "family", "partner")

DEFAULT_EPHEMERAL_TTL = 60.0


class NotAMemberError(PermissionError):
    pass


class UnknownRecordError(LookupError):
    pass


class EphemeralRecordError(LookupError):
    """Replay target was an action-only status: delivered, never logged."""


class ReplayError(ValueError):
    pass


class InvariantError(ValueError):
    pass


@dataclass(frozen=True)
class User:
    user_id: str
    display_name: str
    current_story_version: int = 0


@dataclass(frozen=True)
class Contact:
    owner_id: str
    peer_id: str
    relationship_icon: str

    def __post_init__(self):
        if self.owner_id == self.peer_id:
            raise InvariantError("contact owner and peer must differ")
        icon = self.relationship_icon
        if icon not in RELATIONSHIP_ICONS and not (
            icon.startswith("custom:") and len(icon) > len("custom:")
        ):
            raise InvariantError(
                f"relationship_icon must be one of {RELATIONSHIP_ICONS} or custom:<token>, got {icon!r}"
            )


@dataclass(frozen=True)
class ExchangeRecord:
    record_id: str
    conversation_id: str
    sender_id: str
    kind: str
    timestamp: float
    text: str | None = None
    action_id: str | None = None
    micronarrative: Micronarrative | None = None
    paired_with: str | None = None


def record_to_dict(record: ExchangeRecord) -> dict[str, Any]:
    body: dict[str, Any] = {
        "record_id": record.record_id,
        "conversation_id": record.conversation_id,
        "sender_id": record.sender_id,
        "kind": record.kind,
        "timestamp": record.timestamp,
    }
    if record.text is not None:
        body["text"] = record.text
    if record.action_id is not None:
        body["action_id"] = record.action_id
    if record.micronarrative is not None:
        m = record.micronarrative
        body["micronarrative"] = {
            "text": m.text,
            "action_id": m.action_id,
            "story_version": m.story_version,
            "tags_used": list(m.tags_used),
            "generated_by": m.generated_by,
            "edited": m.edited,
        }
    if record.paired_with is not None:
        body["paired_with"] = record.paired_with
    return body


def record_from_dict(body: dict[str, Any]) -> ExchangeRecord:
    narrative = None
    if body.get("micronarrative") is not None:
        m = body["micronarrative"]
        narrative = Micronarrative(
            text=m["text"],
            action_id=m["action_id"],
            story_version=int(m.get("story_version", 0)),
            tags_used=tuple(m.get("tags_used", ())),
            generated_by=m.get("generated_by", "offline_template"),
            edited=bool(m.get("edited", False)),
        )
    return ExchangeRecord(
        record_id=body["record_id"],
        conversation_id=body["conversation_id"],
        sender_id=body["sender_id"],
        kind=body["kind"],
        timestamp=float(body["timestamp"]),
        text=body.get("text"),
        action_id=body.get("action_id"),
        micronarrative=narrative,
        paired_with=body.get("paired_with"),
    )


def conversation_id_for(a: str, b: str) -> str:
    lo, hi = sorted((a, b))
    return f"{lo}--{hi}"


class ConversationStore:
    def __init__(
        self,
        data_dir: str | Path,
        ephemeral_ttl: float = DEFAULT_EPHEMERAL_TTL,
        clock=time.time,
    ):
        self.data_dir = Path(data_dir)
        self.ephemeral_ttl = ephemeral_ttl
        self._clock = clock
        self._lock = threading.RLock()

        self._users: dict[str, User] = {}
        self._contacts: dict[tuple[str, str], Contact] = {}
        self._members: dict[str, tuple[str, str]] = {}
        self._durable: dict[str, list[ExchangeRecord]] = {}
        self._by_id: dict[str, ExchangeRecord] = {}
        self._ephemeral: dict[str, list[tuple[ExchangeRecord, float]]] = {}
        # Every ephemeral id ever issued this process, so replay can tell
        # "that was ephemeral" apart from "never heard of it".
        self._tombstones: dict[str, tuple[str, str, str]] = {}
        self._seq: dict[str, int] = {}
        self._files: dict[str, Any] = {}
        self._last_ts: dict[str, float] = {}

        self.data_dir.mkdir(parents=True, exist_ok=True)
        (self.data_dir / "conversations").mkdir(exist_ok=True)
        self._replay_meta()
        self._replay_logs()

    # -- startup -------------------------------------------------------

    def _replay_meta(self) -> None:
        meta = self.data_dir / "meta.jsonl"
        if not meta.exists():
            return
        for line in meta.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError:
                continue
            kind = row.get("type")
            if kind == "user":
                self._users[row["user_id"]] = User(
                    row["user_id"], row["display_name"], int(row.get("current_story_version", 0))
                )
            elif kind == "contact":
                contact = Contact(row["owner_id"], row["peer_id"], row["relationship_icon"])
                self._contacts[(contact.owner_id, contact.peer_id)] = contact
            elif kind == "conversation":
                self._members[row["conversation_id"]] = tuple(row["members"])

    def _replay_logs(self) -> None:
        for path in sorted((self.data_dir / "conversations").glob("*.jsonl")):
            conversation_id = path.stem
            records = []
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    record = record_from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError):
                    continue  # torn tail line from a crash mid-write
                records.append(record)
                self._by_id[record.record_id] = record
            self._durable[conversation_id] = records
            if records:
                self._last_ts[conversation_id] = records[-1].timestamp
                last_seq = int(records[-1].record_id.rsplit(":", 1)[1])
                self._seq[conversation_id] = last_seq

    def _append_meta(self, row: dict[str, Any]) -> None:
        with (self.data_dir / "meta.jsonl").open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(row) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    # -- users / contacts / conversations ------------------------------

    def register_user(self, user_id: str, display_name: str | None = None) -> User:
        if not user_id:
            raise InvariantError("user_id must be nonempty")
        with self._lock:
            existing = self._users.get(user_id)
            if existing is not None and (display_name is None or display_name == existing.display_name):
                return existing
            user = User(user_id, display_name or user_id,
                        existing.current_story_version if existing else 0)
            self._users[user_id] = user
            self._append_meta(
                {
                    "type": "user",
                    "user_id": user.user_id,
                    "display_name": user.display_name,
                    "current_story_version": user.current_story_version,
                }
            )
            return user

    def get_user(self, user_id: str) -> User:
        try:
            return self._users[user_id]
        except KeyError:
            raise UnknownRecordError(f"unknown user {user_id!r}") from None

    def set_story_version(self, user_id: str, version: int) -> User:
        with self._lock:
            user = replace(self.get_user(user_id), current_story_version=version)
            self._users[user_id] = user
            self._append_meta(
                {
                    "type": "user",
                    "user_id": user.user_id,
                    "display_name": user.display_name,
                    "current_story_version": user.current_story_version,
                }
            )
            return user

    def add_contact(self, owner_id: str, peer_id: str, relationship_icon: str) -> Contact:
        with self._lock:
            self.get_user(owner_id)
            self.get_user(peer_id)
            contact = Contact(owner_id, peer_id, relationship_icon)
            self._contacts[(owner_id, peer_id)] = contact
            self._append_meta(
                {
                    "type": "contact",
                    "owner_id": owner_id,
                    "peer_id": peer_id,
                    "relationship_icon": relationship_icon,
                }
            )
            return contact

    def contacts_of(self, owner_id: str) -> list[Contact]:
        return sorted(
            (c for (owner, _), c in self._contacts.items() if owner == owner_id),
            key=lambda c: c.peer_id,
        )

    def open_conversation(self, a: str, b: str) -> str:
        if a == b:
            raise InvariantError("a conversation needs two distinct members")
        with self._lock:
            self.get_user(a)
            self.get_user(b)
            conversation_id = conversation_id_for(a, b)
            if conversation_id not in self._members:
                self._members[conversation_id] = tuple(sorted((a, b)))
                self._append_meta(
                    {
                        "type": "conversation",
                        "conversation_id": conversation_id,
                        "members": sorted((a, b)),
                    }
                )
                self._durable.setdefault(conversation_id, [])
            return conversation_id

    def members(self, conversation_id: str) -> tuple[str, str]:
        try:
            return self._members[conversation_id]
        except KeyError:
            raise UnknownRecordError(f"unknown conversation {conversation_id!r}") from None

    def is_member(self, conversation_id: str, user_id: str) -> bool:
        return user_id in self.members(conversation_id)

    def conversations_of(self, user_id: str) -> list[str]:
        return sorted(cid for cid, m in self._members.items() if user_id in m)

    # -- appends --------------------------------------------------------

    def _require_member(self, conversation_id: str, user_id: str) -> None:
        if not self.is_member(conversation_id, user_id):
            raise NotAMemberError(f"{user_id!r} is not a member of {conversation_id!r}")

    def _validate(self, record: ExchangeRecord) -> None:
        if record.kind not in RECORD_KINDS:
            raise InvariantError(f"unknown record kind {record.kind!r}")
        if record.kind == "text":
            if not record.text:
                raise InvariantError("text record requires nonempty text")
            if record.action_id is not None or record.micronarrative is not None:
                raise InvariantError("text record must not carry an action or micronarrative")
        elif record.kind == "action_with_narrative":
            if not record.action_id or record.micronarrative is None:
                raise InvariantError(
                    "action_with_narrative requires both action_id and micronarrative"
                )
        elif record.kind == "action_only_status":
            if not record.action_id:
                raise InvariantError("action_only_status requires action_id")
            if record.micronarrative is not None:
                raise InvariantError("action_only_status must not carry a micronarrative")
        elif record.kind == "dyadic_exchange":
            if not record.action_id:
                raise InvariantError("dyadic_exchange requires action_id")
            if not record.paired_with:
                raise InvariantError("dyadic_exchange requires paired_with")
            self._check_pairing(record)
        if record.micronarrative is not None and record.action_id is not None:
            if record.micronarrative.action_id != record.action_id:
                raise InvariantError("micronarrative was generated for a different action")

    def _check_pairing(self, record: ExchangeRecord) -> None:
        target = self._by_id.get(record.paired_with)
        if target is not None:
            if target.conversation_id != record.conversation_id:
                raise InvariantError("paired_with points outside this conversation")
            if target.sender_id == record.sender_id:
                raise InvariantError("paired_with must reference the other member's record")
            if not target.action_id:
                raise InvariantError("paired_with must reference an action record")
            return
        tomb = self._tombstones.get(record.paired_with)
        if tomb is not None:
            conversation_id, sender_id, _ = tomb
            if conversation_id != record.conversation_id:
                raise InvariantError("paired_with points outside this conversation")
            if sender_id == record.sender_id:
                raise InvariantError("paired_with must reference the other member's record")
            return
        raise InvariantError(f"paired_with references unknown record {record.paired_with!r}")

    def _purge_ephemeral(self, conversation_id: str) -> None:
        buffer = self._ephemeral.get(conversation_id)
        if not buffer:
            return
        now = self._clock()
        self._ephemeral[conversation_id] = [(r, exp) for r, exp in buffer if exp > now]

    def append(self, record: ExchangeRecord) -> ExchangeRecord:
        """Assign id and timestamp, validate, and commit.

        Durable kinds hit the log (flush + fsync) before this returns;
        action_only_status goes to the transient buffer instead.
        """
        with self._lock:
            self._require_member(record.conversation_id, record.sender_id)
            conversation_id = record.conversation_id
            self._purge_ephemeral(conversation_id)

            seq = self._seq.get(conversation_id, 0) + 1
            now = max(self._clock(), self._last_ts.get(conversation_id, 0.0))
            completed = replace(
                record, record_id=f"{conversation_id}:{seq:06d}", timestamp=now
            )
            self._validate(completed)

            self._seq[conversation_id] = seq
            self._last_ts[conversation_id] = now

            if completed.kind == "action_only_status":
                self._ephemeral.setdefault(conversation_id, []).append(
                    (completed, self._clock() + self.ephemeral_ttl)
                )
                self._tombstones[completed.record_id] = (
                    conversation_id,
                    completed.sender_id,
                    completed.action_id or "",
                )
                return completed

            fh = self._files.get(conversation_id)
            if fh is None:
                path = self.data_dir / "conversations" / f"{conversation_id}.jsonl"
                fh = path.open("a", encoding="utf-8")
                self._files[conversation_id] = fh
            fh.write(json.dumps(record_to_dict(completed)) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

            self._durable.setdefault(conversation_id, []).append(completed)
            self._by_id[completed.record_id] = completed
            return completed

    def new_text(self, conversation_id: str, sender_id: str, text: str) -> ExchangeRecord:
        return self.append(
            ExchangeRecord("", conversation_id, sender_id, "text", 0.0, text=text)
        )

    def new_action(
        self,
        conversation_id: str,
        sender_id: str,
        action_id: str,
        micronarrative: Micronarrative | None,
        persist: bool,
        paired_with: str | None = None,
    ) -> ExchangeRecord:
        if not persist:
            kind = "action_only_status"
        elif paired_with:
            kind = "dyadic_exchange"
        else:
            kind = "action_with_narrative"
        return self.append(
            ExchangeRecord(
                "",
                conversation_id,
                sender_id,
                kind,
                0.0,
                action_id=action_id,
                micronarrative=micronarrative,
                paired_with=paired_with,
            )
        )

    # -- reads ----------------------------------------------------------

    def history(
        self,
        conversation_id: str,
        requester: str,
        page: int = 0,
        page_size: int = 50,
    ) -> list[ExchangeRecord]:
        if page < 0 or page_size < 1:
            raise ValueError("page must be >= 0 and page_size >= 1")
        with self._lock:
            self._require_member(conversation_id, requester)
            records = self._durable.get(conversation_id, [])
            start = page * page_size
            return list(records[start : start + page_size])

    def history_after(
        self, conversation_id: str, requester: str, last_seen: str | None
    ) -> list[ExchangeRecord]:
        with self._lock:
            self._require_member(conversation_id, requester)
            records = self._durable.get(conversation_id, [])
            if last_seen is None:
                return list(records)
            return [r for r in records if r.record_id > last_seen]

    def replay(self, record_id: str, requester: str) -> dict[str, Any]:
        with self._lock:
            record = self._by_id.get(record_id)
            if record is None:
                if record_id in self._tombstones:
                    raise EphemeralRecordError("ephemeral record")
                raise UnknownRecordError(f"unknown record {record_id!r}")
            self._require_member(record.conversation_id, requester)
            if record.kind == "text" or not record.action_id:
                raise ReplayError("text-only record has no action to replay")
            return {
                "record_id": record.record_id,
                "action_id": record.action_id,
                "micronarrative": (
                    record_to_dict(record)["micronarrative"]
                    if record.micronarrative is not None
                    else None
                ),
                "timestamp": record.timestamp,
            }

    def live_statuses(self, conversation_id: str, requester: str) -> list[ExchangeRecord]:
        with self._lock:
            self._require_member(conversation_id, requester)
            self._purge_ephemeral(conversation_id)
            return [r for r, _ in self._ephemeral.get(conversation_id, [])]

    def derive_context(self, conversation_id: str, user_id: str) -> tuple[str | None, str]:
        """Most recent activity decides the reciprocity inputs.

        Returns (partner_last_action, conversation_state). Live
        action-only statuses count as activity; expired ones do not.
        """
        with self._lock:
            self._require_member(conversation_id, user_id)
            self._purge_ephemeral(conversation_id)
            merged = list(self._durable.get(conversation_id, []))
            merged.extend(r for r, _ in self._ephemeral.get(conversation_id, []))
            merged.sort(key=lambda r: r.record_id)
            if not merged:
                return None, "opening"
            last = merged[-1]
            if last.sender_id == user_id:
                return None, "self_acted_last"
            if last.action_id:
                return last.action_id, "partner_acted_last"
            return None, "idle"

    def recent_context(self, conversation_id: str, user_id: str, window: int = 6) -> list[ExchangeRecord]:
        with self._lock:
            self._require_member(conversation_id, user_id)
            records = self._durable.get(conversation_id, [])
            return list(records[-window:])

    def export(self, conversation_id: str) -> Iterator[dict[str, Any]]:
        for record in self._durable.get(conversation_id, []):
            yield record_to_dict(record)

    def close(self) -> None:
        with self._lock:
            for fh in self._files.values():
                fh.close()
            self._files.clear()
