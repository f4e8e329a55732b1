"""Expressive action library: loading, validation, and the reaction graph.

Actions are immutable snapshots. Mutation helpers return a new library
with the version bumped; callers that need serialized writes go through
the conversation store.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

EMOTIONS = ("positive", "negative", "neutral")
INTERACTION_ROLES = ("self_oriented", "responsive")

_ID_CHARS = "abcdefghijklmnopqrstuvwxyz0123456789-"


class LibraryError(ValueError):
    """Raised when a library document fails validation.

    ``problems`` holds one human-readable line per defect, each naming
    the offending action id where one exists.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UnknownActionError(LookupError):
    def __init__(self, action_id: str):
        self.action_id = action_id
        super().__init__(f"unknown action id: {action_id!r}")


@dataclass(frozen=True)
class Action:
    id: str
    name: str
    description: str
    keywords: frozenset[str]
    emotion: str
    interaction_role: str
    reaction_candidates: tuple[str, ...]
    embedding: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ActionLibrary:
    actions: dict[str, Action] = field(default_factory=dict)
    embedding_dimension: int = 128
    version: int = 1

    def __iter__(self):
        return iter(self.actions.values())

    def __len__(self) -> int:
        return len(self.actions)

    def __contains__(self, action_id: str) -> bool:
        return action_id in self.actions

    def get(self, action_id: str) -> Action:
        try:
            return self.actions[action_id]
        except KeyError:
            raise UnknownActionError(action_id) from None

    def ids(self) -> list[str]:
        return sorted(self.actions)


def _valid_id(token: Any) -> bool:
    if not isinstance(token, str) or not token:
        return False
    if token.startswith("-") or token.endswith("-") or "--" in token:
        return False
    return all(ch in _ID_CHARS for ch in token)


def _action_problems(raw: Mapping[str, Any], dimension: int) -> tuple[Action | None, list[str]]:
    problems: list[str] = []
    action_id = raw.get("id")
    label = repr(action_id) if isinstance(action_id, str) else "<missing id>"
    if not _valid_id(action_id):
        problems.append(f"{label}: id must be a lowercase kebab-case token")
        return None, problems

    name = raw.get("name")
    if not isinstance(name, str) or not name.strip():
        problems.append(f"{label}: name must be a nonempty string")
    description = raw.get("description")
    if not isinstance(description, str) or not description.strip():
        problems.append(f"{label}: description must be a nonempty string")

    keywords = raw.get("keywords")
    if not isinstance(keywords, (list, tuple)) or not keywords:
        problems.append(f"{label}: keywords must be a nonempty list")
        keywords = []
    bad_kw = [k for k in keywords if not isinstance(k, str) or k != k.lower() or not k]
    if bad_kw:
        problems.append(f"{label}: keywords must be lowercase strings, got {bad_kw!r}")

    emotion = raw.get("emotion")
    if emotion not in EMOTIONS:
        problems.append(f"{label}: unknown emotion {emotion!r} (expected one of {', '.join(EMOTIONS)})")
    role = raw.get("interaction_role")
    if role not in INTERACTION_ROLES:
        problems.append(
            f"{label}: unknown interaction_role {role!r} (expected one of {', '.join(INTERACTION_ROLES)})"
        )

    candidates = raw.get("reaction_candidates", [])
    if not isinstance(candidates, (list, tuple)):
        problems.append(f"{label}: reaction_candidates must be a list")
        candidates = []

    embedding = raw.get("embedding")
    emb: tuple[float, ...] | None = None
    if embedding is not None:
        if not isinstance(embedding, (list, tuple)) or not all(
            isinstance(x, (int, float)) for x in embedding
        ):
            problems.append(f"{label}: embedding must be a list of numbers")
        elif len(embedding) != dimension:
            problems.append(
                f"{label}: wrong embedding dimension {len(embedding)} (library declares {dimension})"
            )
        else:
            norm = math.sqrt(sum(float(x) * float(x) for x in embedding))
            if abs(norm - 1.0) > 1e-6:
                problems.append(f"{label}: embedding norm {norm:.8f} is not within 1e-6 of 1")
            else:
                emb = tuple(float(x) for x in embedding)

    if problems:
        return None, problems
    return (
        Action(
            id=action_id,
            name=name.strip(),
            description=description.strip(),
            keywords=frozenset(keywords),
            emotion=emotion,
            interaction_role=role,
            reaction_candidates=tuple(candidates),
            embedding=emb,
        ),
        [],
    )


def _graph_problems(actions: dict[str, Action]) -> list[str]:
    problems = []
    for action in actions.values():
        for candidate in action.reaction_candidates:
            if candidate == action.id:
                problems.append(f"{action.id!r}: lists itself as a reaction candidate")
            elif candidate not in actions:
                problems.append(
                    f"{action.id!r}: dangling reaction_candidate reference {candidate!r}"
                )
    return problems


def lint_document(document: Mapping[str, Any]) -> list[str]:
    """Validate a parsed library document, returning every problem found."""
    problems: list[str] = []
    version = document.get("version")
    if not isinstance(version, int) or version < 1:
        problems.append("version must be a positive integer")
    dimension = document.get("embedding_dimension")
    if not isinstance(dimension, int) or dimension < 1:
        problems.append("embedding_dimension must be a positive integer")
        dimension = 0

    raw_actions = document.get("actions")
    if not isinstance(raw_actions, list) or not raw_actions:
        problems.append("library must contain at least one action")
        return problems

    actions: dict[str, Action] = {}
    for raw in raw_actions:
        if not isinstance(raw, Mapping):
            problems.append("action entries must be objects")
            continue
        action, entry_problems = _action_problems(raw, dimension)
        problems.extend(entry_problems)
        if action is None:
            continue
        if action.id in actions:
            problems.append(f"{action.id!r}: duplicate id")
            continue
        actions[action.id] = action

    problems.extend(_graph_problems(actions))
    return problems


def _build(document: Mapping[str, Any]) -> ActionLibrary:
    problems = lint_document(document)
    if problems:
        raise LibraryError(problems)
    dimension = document["embedding_dimension"]
    actions = {}
    for raw in document["actions"]:
        action, _ = _action_problems(raw, dimension)
        assert action is not None
        actions[action.id] = action
    return ActionLibrary(
        actions=actions,
        embedding_dimension=dimension,
        version=document["version"],
    )


def load_library(source: Mapping[str, Any] | str | Path) -> ActionLibrary:
    """Load and validate a library document.

    ``source`` is either an already-parsed mapping or a path to a JSON
    file shaped {version, embedding_dimension, actions: [...]}.
    """
    if isinstance(source, Mapping):
        return _build(source)
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LibraryError([f"cannot read library file: {exc}"]) from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LibraryError([f"library file is not valid JSON: {exc}"]) from exc
    if not isinstance(document, Mapping):
        raise LibraryError(["library document must be a JSON object"])
    return _build(document)


def canonical_library_path() -> Path:
    return Path(str(resources.files("dyadchat.data") / "library.json"))


def load_canonical_library() -> ActionLibrary:
    return load_library(canonical_library_path())


def serialize_library(library: ActionLibrary) -> dict[str, Any]:
    """Round-trippable document form: load(serialize(lib)) == lib."""
    actions = []
    for action_id in sorted(library.actions):
        action = library.actions[action_id]
        entry: dict[str, Any] = {
            "id": action.id,
            "name": action.name,
            "description": action.description,
            "keywords": sorted(action.keywords),
            "emotion": action.emotion,
            "interaction_role": action.interaction_role,
            "reaction_candidates": list(action.reaction_candidates),
        }
        if action.embedding is not None:
            entry["embedding"] = list(action.embedding)
        actions.append(entry)
    return {
        "version": library.version,
        "embedding_dimension": library.embedding_dimension,
        "actions": actions,
    }


def reaction_candidates_of(library: ActionLibrary, action_id: str) -> list[Action]:
    action = library.get(action_id)
    return [library.get(candidate) for candidate in action.reaction_candidates]


def upsert_action(library: ActionLibrary, action: Action) -> ActionLibrary:
    merged = dict(library.actions)
    merged[action.id] = action
    document = serialize_library(
        ActionLibrary(merged, library.embedding_dimension, library.version)
    )
    problems = lint_document(document)
    if problems:
        raise LibraryError(problems)
    return ActionLibrary(merged, library.embedding_dimension, library.version + 1)


def remove_action(library: ActionLibrary, action_id: str) -> ActionLibrary:
    if action_id not in library.actions:
        raise UnknownActionError(action_id)
    referrers = sorted(
        other.id
        for other in library.actions.values()
        if other.id != action_id and action_id in other.reaction_candidates
    )
    if referrers:
        raise LibraryError(
            [f"{r!r}: still references {action_id!r} as a reaction candidate" for r in referrers]
        )
    remaining = {k: v for k, v in library.actions.items() if k != action_id}
    if not remaining:
        raise LibraryError(["library must contain at least one action"])
    return ActionLibrary(remaining, library.embedding_dimension, library.version + 1)


def with_embedding(library: ActionLibrary, action_id: str, vector: tuple[float, ...]) -> ActionLibrary:
    """Attach a lazily computed embedding without a version bump.

    Embeddings are derived data, not an edit to the library itself.
    """
    action = library.get(action_id)
    merged = dict(library.actions)
    merged[action_id] = replace(action, embedding=tuple(vector))
    return ActionLibrary(merged, library.embedding_dimension, library.version)
