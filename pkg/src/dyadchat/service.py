"""Composition root tying the library, providers, recommender, narrative
engine, and store into one authenticated facade.

The realtime gateway and the CLI both talk to this class, so semantics
live here, not in transport code.
"""

from __future__ import annotations

import random
import secrets
import threading
from typing import Any, Sequence

from .actions import ActionLibrary, load_canonical_library, load_library, serialize_library
from .config import ServiceConfig
from .interpret import (
    EmbeddingCache,
    OfflineProvider,
    ProviderUnavailable,
    RemoteProvider,
)
from .narrative import (
    Micronarrative,
    MicronarrativeEngine,
    PersonalStory,
    RemoteCaptionProvider,
    StoryBook,
    TagSet,
    apply_user_edit,
)
from .recommend import (
    PreferenceStore,
    RecommendationContext,
    Recommender,
    ScoreBreakdown,
    Weights,
)
from .store import Contact, ConversationStore, ExchangeRecord, User

__all__ = ["AuthenticationError", "DyadChatService", "apply_user_edit"]


class AuthenticationError(PermissionError):
    pass


class DyadChatService:
    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        if self.config.library_path:
            self.library: ActionLibrary = load_library(self.config.library_path)
        else:
            self.library = load_canonical_library()

        cache = EmbeddingCache(self.config.resolved_cache_path())
        self._offline = OfflineProvider(self.library.embedding_dimension, cache)
        caption_provider = None
        if self.config.provider_kind == "remote":
            provider_config = self.config.provider_config()
            self.provider = RemoteProvider(
                provider_config, self.library.embedding_dimension, cache
            )
            caption_provider = RemoteCaptionProvider(provider_config)
        else:
            self.provider = self._offline

        self.preferences = PreferenceStore()
        self.weights = self.config.weights()
        self.recommender = Recommender(self.library, self.provider, self.preferences, self.weights)
        self._fallback_recommender = Recommender(
            self.library, self._offline, self.preferences, self.weights
        )
        self.stories = StoryBook()
        self.narrator = MicronarrativeEngine(self.library, caption_provider)
        self.store = ConversationStore(self.config.data_dir, self.config.ephemeral_ttl)

        self._tokens: dict[str, str] = {}
        self._token_lock = threading.Lock()

    # -- auth ------------------------------------------------------------

    def login(self, user_id: str, display_name: str | None = None) -> str:
        self.store.register_user(user_id, display_name)
        token = secrets.token_hex(16)
        with self._token_lock:
            self._tokens[token] = user_id
        return token

    def authenticate(self, token: str) -> str:
        user_id = self._tokens.get(token)
        if user_id is None:
            raise AuthenticationError("invalid or expired token")
        return user_id

    # -- contacts / conversations ----------------------------------------

    def add_contact(self, user_id: str, peer_id: str, relationship_icon: str) -> Contact:
        self.store.register_user(peer_id)
        return self.store.add_contact(user_id, peer_id, relationship_icon)

    def contacts_of(self, user_id: str) -> list[Contact]:
        return self.store.contacts_of(user_id)

    def open_conversation(self, user_id: str, peer_id: str) -> str:
        self.store.register_user(peer_id)
        return self.store.open_conversation(user_id, peer_id)

    # -- exchanges ---------------------------------------------------------

    def post_text(self, user_id: str, conversation_id: str, text: str) -> ExchangeRecord:
        return self.store.new_text(conversation_id, user_id, text)

    def post_action(
        self,
        user_id: str,
        conversation_id: str,
        action_id: str,
        micronarrative: dict[str, Any] | Micronarrative | None,
        persist: bool,
        paired_with: str | None = None,
        recommendation_ref: dict[str, Any] | None = None,
    ) -> ExchangeRecord:
        self.library.get(action_id)
        narrative = self._coerce_narrative(action_id, micronarrative)

        shown: list[str] = []
        hidden: str | None = None
        if recommendation_ref is not None:
            shown = [str(a) for a in recommendation_ref.get("shown", [])]
            hidden = recommendation_ref.get("hidden")
            if action_id not in shown:
                raise ValueError("recommendation_ref.shown must include the sent action")
            if hidden is not None and hidden not in shown:
                raise ValueError("recommendation_ref.hidden must be among shown")

        record = self.store.new_action(
            conversation_id, user_id, action_id, narrative, persist, paired_with
        )
        if shown:
            self.preferences.record_outcome(user_id, shown, chosen=action_id, hidden=hidden)
        return record

    def _coerce_narrative(
        self, action_id: str, micronarrative: dict[str, Any] | Micronarrative | None
    ) -> Micronarrative | None:
        if micronarrative is None or isinstance(micronarrative, Micronarrative):
            return micronarrative
        return Micronarrative(
            text=micronarrative.get("text", ""),
            action_id=micronarrative.get("action_id", action_id),
            story_version=int(micronarrative.get("story_version", 0)),
            tags_used=tuple(micronarrative.get("tags_used", ())),
            generated_by=micronarrative.get("generated_by", "offline_template"),
            edited=bool(micronarrative.get("edited", False)),
        )

    # -- recommendations ---------------------------------------------------

    def recommend_for(
        self,
        user_id: str,
        conversation_id: str,
        draft_text: str | None = None,
        seed: int | None = None,
        no_noise: bool = False,
    ) -> tuple[list[ScoreBreakdown], bool]:
        """Returns (top-4 breakdowns, degraded flag). A remote provider
        outage falls back to the offline provider instead of failing."""
        partner_last, state = self.store.derive_context(conversation_id, user_id)
        ctx = RecommendationContext(
            user_id=user_id,
            draft_text=draft_text,
            partner_last_action=partner_last,
            conversation_state=state,
            seed=seed if seed is not None else random.getrandbits(63),
        )
        weights = self.weights
        if no_noise:
            weights = Weights(weights.w_text, weights.w_ctx, weights.w_pref, 0.0)
        try:
            return self.recommender.recommend(ctx, weights), False
        except ProviderUnavailable:
            return self._fallback_recommender.recommend(ctx, weights), True

    def record_outcome(
        self,
        user_id: str,
        shown: Sequence[str],
        chosen: str | None = None,
        hidden: str | None = None,
    ) -> None:
        self.preferences.record_outcome(user_id, list(shown), chosen, hidden)

    # -- narratives ---------------------------------------------------------

    def narrate(
        self,
        user_id: str,
        action_id: str,
        conversation_id: str | None = None,
        tags: Sequence[str] | None = None,
    ) -> Micronarrative:
        story = self.stories.latest(user_id)
        context: Sequence[Any] = ()
        if conversation_id is not None:
            context = self.store.recent_context(conversation_id, user_id)
        used = tuple(tags) if tags is not None else self.stories.selected_tags(user_id)
        return self.narrator.generate(action_id, story, context, used)

    def propose_tags(self, user_id: str) -> TagSet:
        return self.narrator.propose_tags(self.stories.latest(user_id))

    def update_story(self, user_id: str, text: str) -> PersonalStory:
        story = self.stories.update_story(user_id, text)
        self.store.register_user(user_id)
        self.store.set_story_version(user_id, story.version)
        return story

    def select_tags(
        self, user_id: str, selected: Sequence[str], custom: Sequence[str] = ()
    ) -> TagSet:
        return self.stories.select_tags(user_id, selected, custom)

    # -- reads ---------------------------------------------------------------

    def history(
        self, user_id: str, conversation_id: str, page: int = 0, page_size: int = 50
    ) -> list[ExchangeRecord]:
        return self.store.history(conversation_id, user_id, page, page_size)

    def history_after(
        self, user_id: str, conversation_id: str, last_seen: str | None
    ) -> list[ExchangeRecord]:
        return self.store.history_after(conversation_id, user_id, last_seen)

    def replay(self, user_id: str, record_id: str) -> dict[str, Any]:
        return self.store.replay(record_id, user_id)

    def library_document(self) -> dict[str, Any]:
        return serialize_library(self.library)

    def get_user(self, user_id: str) -> User:
        return self.store.get_user(user_id)

    def close(self) -> None:
        self.store.close()
