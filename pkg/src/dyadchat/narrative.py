"""Caption generation: personal stories, tag proposal, and templates.

Captions come from a remote provider when one is configured and healthy,
and otherwise from a deterministic template over a per-action phrase
table, so generation never hard-fails.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, replace
from importlib import resources
from typing import Any, Protocol, Sequence

import httpx

from .actions import Action, ActionLibrary
from .interpret import ProviderConfig, ProviderUnavailable, tokenize

MAX_STORY_LENGTH = 1000
MAX_CAPTION_LENGTH = 200
CONTEXT_WINDOW = 6
TAGS_PER_CATEGORY = 5

TAG_CATEGORIES = ("likes_dislikes", "habits", "social_style", "emotion")

GENERATED_BY = ("provider", "offline_template", "user_edit")

_INTEREST_WORDS = frozenset(
    """
    cat cats dog dogs coffee tea music running cooking baking reading books
    movies films games gaming hiking photography gardening painting drawing
    travel traveling yoga chess football soccer basketball anime plants
    cycling swimming dancing singing puzzles podcasts marathon marathons
    chocolate pizza sushi ramen camping fishing knitting skating surfing
    """.split()
)

_HABIT_WORDS = frozenset(
    """
    morning mornings early late night nights daily routine gym run runs
    running jog jogging walk walks walking journal journaling meditate
    meditation practice study studying weekend weekends coffee tea nap naps
    cook cooks cooking bake baking read reads reading train training stretch
    commute garden gardening volunteer
    """.split()
)

_SOCIAL_WORDS = frozenset(
    """
    friendly shy outgoing quiet introvert introverted extrovert extroverted
    listener listening talkative chatty playful caring supportive teasing
    sarcastic warm direct blunt patient empathetic gentle goofy reserved
    social loyal honest thoughtful generous kind
    """.split()
)

_EMOTION_WORDS = frozenset(
    """
    happy sad calm anxious cheerful moody optimistic pessimistic grumpy
    sentimental energetic mellow stressed hopeful tired excited content
    nostalgic sensitive passionate joyful worried relaxed upbeat
    """.split()
)

_PREFERENCE_VERBS = frozenset(
    "love loves like likes enjoy enjoys hate hates dislike dislikes into adore adores".split()
)

_GENERIC_TAGS: dict[str, tuple[str, ...]] = {
    "likes_dislikes": ("music", "coffee", "books", "travel", "games"),
    "habits": ("early-riser", "night-owl", "journaling", "daily-walks", "tea-breaks"),
    "social_style": ("warm", "playful", "good-listener", "encouraging", "easygoing"),
    "emotion": ("cheerful", "calm", "sentimental", "upbeat", "thoughtful"),
}

_CATEGORY_LEXICONS: dict[str, frozenset[str]] = {
    "likes_dislikes": _INTEREST_WORDS,
    "habits": _HABIT_WORDS,
    "social_style": _SOCIAL_WORDS,
    "emotion": _EMOTION_WORDS,
}


@dataclass(frozen=True)
class PersonalStory:
    user_id: str
    text: str
    version: int
    created_at: float

    def __post_init__(self):
        if len(self.text) > MAX_STORY_LENGTH:
            raise ValueError(f"story exceeds {MAX_STORY_LENGTH} characters")


@dataclass(frozen=True)
class TagSet:
    likes_dislikes: tuple[str, ...]
    habits: tuple[str, ...]
    social_style: tuple[str, ...]
    emotion: tuple[str, ...]
    selected: tuple[str, ...] = ()
    custom: tuple[str, ...] = ()

    def proposed(self) -> frozenset[str]:
        return frozenset(self.likes_dislikes + self.habits + self.social_style + self.emotion)

    def with_selection(self, selected: Sequence[str], custom: Sequence[str] = ()) -> TagSet:
        allowed = self.proposed() | frozenset(custom)
        unknown = [t for t in selected if t not in allowed]
        if unknown:
            raise ValueError(f"selected tags not proposed and not custom: {unknown!r}")
        return replace(self, selected=tuple(selected), custom=tuple(custom))


@dataclass(frozen=True)
class Micronarrative:
    text: str
    action_id: str
    story_version: int
    tags_used: tuple[str, ...]
    generated_by: str
    edited: bool = False

    def __post_init__(self):
        if not self.text:
            raise ValueError("micronarrative text must be nonempty")
        if len(self.text) > MAX_CAPTION_LENGTH:
            raise ValueError(f"micronarrative exceeds {MAX_CAPTION_LENGTH} characters")
        if self.generated_by not in GENERATED_BY:
            raise ValueError(f"unknown generated_by {self.generated_by!r}")


def load_phrase_table() -> dict[str, str]:
    text = (resources.files("dyadchat.data") / "phrases.json").read_text(encoding="utf-8")
    return json.loads(text)


def _ordered_unique(tokens: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for token in tokens:
        if token not in seen:
            seen.add(token)
            out.append(token)
    return out


def propose_tags(story: PersonalStory | None) -> TagSet:
    """Offline tag proposal: lexicon routing padded with generic tags.

    Pure function of the story text, so identical stories always yield
    identical tag sets.
    """
    tokens = tokenize(story.text) if story else []
    interests_extra: list[str] = []
    for i, token in enumerate(tokens):
        if token in _PREFERENCE_VERBS:
            for follower in tokens[i + 1 : i + 3]:
                if follower not in _PREFERENCE_VERBS and len(follower) > 2:
                    interests_extra.append(follower)
                    break

    categories: dict[str, tuple[str, ...]] = {}
    for category in TAG_CATEGORIES:
        lexicon = _CATEGORY_LEXICONS[category]
        matched = [t for t in tokens if t in lexicon]
        if category == "likes_dislikes":
            matched.extend(interests_extra)
        ordered = _ordered_unique(matched)[:TAGS_PER_CATEGORY]
        for fallback in _GENERIC_TAGS[category]:
            if len(ordered) >= TAGS_PER_CATEGORY:
                break
            if fallback not in ordered:
                ordered.append(fallback)
        categories[category] = tuple(ordered)

    return TagSet(**categories)


def _tag_clause(tags: tuple[str, ...]) -> str:
    if not tags:
        return ""
    if len(tags) == 1:
        return f", true to my {tags[0]} side"
    return f", true to my {tags[0]} and {tags[1]} sides"


def _context_echo(context: Sequence[Any], user_id: str | None) -> str:
    for record in reversed(list(context)[-CONTEXT_WINDOW:]):
        sender = getattr(record, "sender_id", None)
        if user_id is not None and sender == user_id:
            continue
        action_id = getattr(record, "action_id", None)
        if action_id:
            return " — answering your " + action_id.replace("-", " ")
        text = getattr(record, "text", None)
        if text:
            words = text.split()
            snippet = " ".join(words[:4]) + ("..." if len(words) > 4 else "")
            return f' — answering "{snippet}"'
    return ""


def render_template(
    phrase: str, tags: tuple[str, ...], context: Sequence[Any], user_id: str | None
) -> str:
    clause = _tag_clause(tags)
    echo = _context_echo(context, user_id)
    for attempt in (phrase + clause + echo, phrase + clause, phrase):
        if len(attempt) <= MAX_CAPTION_LENGTH:
            return attempt
    return phrase[:MAX_CAPTION_LENGTH]


class CaptionProvider(Protocol):
    def caption(self, prompt: str) -> str: ...

    def tags(self, prompt: str) -> dict[str, list[str]]: ...


class RemoteCaptionProvider:
    """Caption and tag generation over the remote provider protocol."""

    def __init__(self, config: ProviderConfig, timeout: float = 15.0):
        self.config = config
        self._timeout = timeout

    def _post(self, route: str, payload: dict[str, Any]) -> dict[str, Any]:
        headers = {}
        if self.config.token:
            headers["Authorization"] = "Bearer " + self.config.token
        try:
            response = httpx.post(
                self.config.endpoint.rstrip("/") + route,
                json=payload,
                headers=headers,
                timeout=self._timeout,
            )
            response.raise_for_status()
            return response.json()
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"caption provider failed on {route}: {exc}") from exc

    def caption(self, prompt: str) -> str:
        return str(self._post("/caption", {"prompt": prompt}).get("caption", ""))

    def tags(self, prompt: str) -> dict[str, list[str]]:
        body = self._post("/tags", {"prompt": prompt})
        return {k: [str(t) for t in body.get(k, [])] for k in TAG_CATEGORIES}


def _load_prompt(name: str) -> str:
    return (resources.files("dyadchat.prompts") / name).read_text(encoding="utf-8")


class MicronarrativeEngine:
    def __init__(
        self,
        library: ActionLibrary,
        caption_provider: CaptionProvider | None = None,
        phrases: dict[str, str] | None = None,
    ):
        self.library = library
        self.caption_provider = caption_provider
        self.phrases = phrases if phrases is not None else load_phrase_table()

    def neutral_caption(self, action: Action) -> str:
        phrase = self.phrases.get(action.id)
        if phrase is None:
            phrase = f"Sharing a {action.name.lower()} with you"
        return phrase

    def propose_tags(self, story: PersonalStory | None) -> TagSet:
        if self.caption_provider is not None:
            try:
                prompt = _load_prompt("tags.txt").format(story=story.text if story else "")
                raw = self.caption_provider.tags(prompt)
                categories = {}
                for category in TAG_CATEGORIES:
                    tags = _ordered_unique([t.lower() for t in raw.get(category, []) if t])
                    if len(tags) != TAGS_PER_CATEGORY:
                        raise ProviderUnavailable(
                            f"provider returned {len(tags)} tags for {category}"
                        )
                    categories[category] = tuple(tags)
                return TagSet(**categories)
            except ProviderUnavailable:
                pass
        return propose_tags(story)

    def _provider_caption(
        self,
        action: Action,
        story: PersonalStory | None,
        context: Sequence[Any],
        tags: tuple[str, ...],
    ) -> str | None:
        if self.caption_provider is None:
            return None
        lines = []
        for record in list(context)[-CONTEXT_WINDOW:]:
            sender = getattr(record, "sender_id", "?")
            body = getattr(record, "text", None) or getattr(record, "action_id", "") or ""
            lines.append(f"{sender}: {body}")
        prompt = _load_prompt("micronarrative.txt").format(
            action_name=action.name,
            action_id=action.id,
            action_description=action.description,
            story=story.text if story else "",
            tags=", ".join(tags) or "none",
            context="\n".join(lines) or "(none)",
        )
        try:
            caption = self.caption_provider.caption(prompt).strip()
        except ProviderUnavailable:
            return None
        if not caption or len(caption) > MAX_CAPTION_LENGTH:
            return None
        return caption

    def generate(
        self,
        action_id: str,
        story: PersonalStory | None = None,
        context: Sequence[Any] = (),
        tags: Sequence[str] = (),
    ) -> Micronarrative:
        action = self.library.get(action_id)
        tags_used = tuple(tags)
        story_version = story.version if story else 0
        story_empty = story is None or not story.text.strip()

        if not story_empty or tags_used:
            caption = self._provider_caption(action, story, context, tags_used)
            if caption is not None:
                return Micronarrative(
                    text=caption,
                    action_id=action_id,
                    story_version=story_version,
                    tags_used=tags_used,
                    generated_by="provider",
                )

        if story_empty and not tags_used:
            # Neutral baseline: the bare phrase, byte for byte.
            text = self.neutral_caption(action)
        else:
            user_id = story.user_id if story else None
            text = render_template(self.neutral_caption(action), tags_used, context, user_id)
        return Micronarrative(
            text=text,
            action_id=action_id,
            story_version=story_version,
            tags_used=tags_used,
            generated_by="offline_template",
        )

    def regenerate(
        self,
        previous: Micronarrative,
        new_tags: Sequence[str],
        story: PersonalStory | None,
        context: Sequence[Any] = (),
    ) -> Micronarrative:
        """Fresh caption from tags and story; the edited text of the
        previous caption is never an input."""
        return self.generate(previous.action_id, story, context, new_tags)


def apply_user_edit(previous: Micronarrative, text: str) -> Micronarrative:
    if not text or not text.strip():
        raise ValueError("edited micronarrative must be nonempty")
    if len(text) > MAX_CAPTION_LENGTH:
        raise ValueError(f"edited micronarrative exceeds {MAX_CAPTION_LENGTH} characters")
    return replace(previous, text=text, generated_by="user_edit", edited=True)


class StoryBook:
    """Per-user story versions and the last tag selection.

    Version assignment is serialized per process; stories are kept in
    full so earlier versions stay readable.
    """

    def __init__(self, clock=time.time):
        self._clock = clock
        self._lock = threading.Lock()
        self._stories: dict[str, list[PersonalStory]] = {}
        self._selections: dict[str, TagSet] = {}

    def update_story(self, user_id: str, text: str) -> PersonalStory:
        if len(text) > MAX_STORY_LENGTH:
            raise ValueError(f"story exceeds {MAX_STORY_LENGTH} characters")
        with self._lock:
            versions = self._stories.setdefault(user_id, [])
            story = PersonalStory(
                user_id=user_id,
                text=text,
                version=versions[-1].version + 1 if versions else 1,
                created_at=self._clock(),
            )
            versions.append(story)
            return story

    def latest(self, user_id: str) -> PersonalStory:
        versions = self._stories.get(user_id)
        if not versions:
            return PersonalStory(user_id=user_id, text="", version=0, created_at=0.0)
        return versions[-1]

    def history(self, user_id: str) -> list[PersonalStory]:
        return list(self._stories.get(user_id, []))

    def select_tags(
        self, user_id: str, selected: Sequence[str], custom: Sequence[str] = ()
    ) -> TagSet:
        proposal = propose_tags(self.latest(user_id))
        selection = proposal.with_selection(selected, custom)
        with self._lock:
            self._selections[user_id] = selection
        return selection

    def selected_tags(self, user_id: str) -> tuple[str, ...]:
        selection = self._selections.get(user_id)
        return selection.selected if selection else ()
