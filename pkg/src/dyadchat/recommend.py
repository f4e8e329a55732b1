"""Scoring and ranking of library actions for a conversation context.

The global score is a weighted sum of a text term, a context term, a
learned per-user preference, and a small seeded exploration noise.
Everything here is pure given (context, library snapshot, preference
snapshot, seed), so calls may run concurrently.
"""

from __future__ import annotations

import math
import random
import threading
from dataclasses import dataclass, field

from .actions import Action, ActionLibrary
from .interpret import LanguageProvider, OfflineProvider, TextAnalysis, cosine

CONVERSATION_STATES = ("opening", "partner_acted_last", "self_acted_last", "idle")

KEYWORD_MATCH = 3.0
VALENCE_MATCH = 2.0
VALENCE_NEUTRAL = 1.0
REACTION_BONUS = 5.0
RESPONSIVE_BONUS = 1.0
EMBEDDING_SCALE = 2.0

SELECTED_STEP = 0.1
IGNORED_STEP = -0.05
HIDDEN_STEP = -0.2


class EmptyLibraryError(ValueError):
    pass


@dataclass(frozen=True)
class Weights:
    w_text: float = 1.0
    w_ctx: float = 1.0
    w_pref: float = 0.5
    noise_amplitude: float = 0.05

    def __post_init__(self):
        values = (self.w_text, self.w_ctx, self.w_pref, self.noise_amplitude)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("weights must be finite")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be nonnegative")


@dataclass(frozen=True)
class RecommendationContext:
    user_id: str
    draft_text: str | None = None
    partner_last_action: str | None = None
    conversation_state: str = "idle"
    seed: int = 0

    def __post_init__(self):
        if self.conversation_state not in CONVERSATION_STATES:
            raise ValueError(f"unknown conversation_state {self.conversation_state!r}")
        if self.conversation_state == "partner_acted_last" and not self.partner_last_action:
            raise ValueError("partner_acted_last requires partner_last_action")


@dataclass(frozen=True)
class ScoreBreakdown:
    action_id: str
    s_text: float
    s_ctx: float
    preference: float
    noise: float
    total: float


@dataclass
class OutcomeCounts:
    selected: int = 0
    ignored: int = 0
    hidden: int = 0


class PreferenceStore:
    """Per (user, action) outcome counters feeding the preference term."""

    def __init__(self):
        self._counts: dict[tuple[str, str], OutcomeCounts] = {}
        self._lock = threading.Lock()

    def counts(self, user_id: str, action_id: str) -> OutcomeCounts:
        return self._counts.get((user_id, action_id), OutcomeCounts())

    def record_outcome(
        self,
        user_id: str,
        shown: list[str],
        chosen: str | None = None,
        hidden: str | None = None,
    ) -> None:
        if chosen is not None and chosen not in shown:
            raise ValueError(f"chosen action {chosen!r} was not among the shown actions")
        if hidden is not None and hidden not in shown:
            raise ValueError(f"hidden action {hidden!r} was not among the shown actions")
        with self._lock:
            for action_id in shown:
                counts = self._counts.setdefault((user_id, action_id), OutcomeCounts())
                if action_id == chosen:
                    counts.selected += 1
                else:
                    counts.ignored += 1
                if action_id == hidden:
                    counts.hidden += 1


def preference_value(store: PreferenceStore | None, user_id: str, action_id: str) -> float:
    if store is None:
        return 0.0
    counts = store.counts(user_id, action_id)
    raw = (
        SELECTED_STEP * counts.selected
        + IGNORED_STEP * counts.ignored
        + HIDDEN_STEP * counts.hidden
    )
    return max(-1.0, min(1.0, raw))


def action_embedding_text(action: Action) -> str:
    return " ".join([action.name] + sorted(action.keywords))


def score_text(
    analysis: TextAnalysis,
    action: Action,
    embedder: LanguageProvider | None = None,
) -> float:
    """Keyword term plus valence term plus gated embedding adjustment.

    The embedding adjustment only fires when the first two layers say
    nothing (no keyword match, neutral valence), so fuzzy similarity can
    never override an explicit match.
    """
    matched = analysis.keywords & action.keywords
    affirmed = matched - analysis.negated_keywords
    if affirmed:
        keyword_term = KEYWORD_MATCH
    elif matched:
        keyword_term = -KEYWORD_MATCH
    else:
        keyword_term = 0.0

    if analysis.valence == "neutral":
        valence_term = VALENCE_NEUTRAL
    elif analysis.valence == action.emotion:
        valence_term = VALENCE_MATCH
    elif action.emotion != "neutral" and (analysis.negated_keywords & action.keywords):
        # A negated mention of this action's own keywords is still an
        # emotionally aligned utterance about it.
        valence_term = VALENCE_MATCH
    else:
        valence_term = 0.0

    embedding_term = 0.0
    if keyword_term == 0.0 and analysis.valence == "neutral":
        action_vector = action.embedding
        if action_vector is None and embedder is not None:
            action_vector = embedder.embed(action_embedding_text(action))
        if action_vector is not None:
            embedding_term = EMBEDDING_SCALE * max(0.0, cosine(analysis.embedding, action_vector))

    return keyword_term + valence_term + embedding_term


def score_context(ctx: RecommendationContext, action: Action, library: ActionLibrary) -> float:
    bonus = 0.0
    if ctx.partner_last_action is not None:
        partner_action = library.get(ctx.partner_last_action)
        if action.id in partner_action.reaction_candidates:
            bonus += REACTION_BONUS
    if ctx.conversation_state == "partner_acted_last" and action.interaction_role == "responsive":
        bonus += RESPONSIVE_BONUS
    return bonus


@dataclass
class Recommender:
    """Bundles a library snapshot with a provider and preference store."""

    library: ActionLibrary
    provider: LanguageProvider | None = None
    store: PreferenceStore = field(default_factory=PreferenceStore)
    weights: Weights = field(default_factory=Weights)

    def __post_init__(self):
        if self.provider is None:
            self.provider = OfflineProvider(self.library.embedding_dimension)
        self._action_vectors: dict[str, tuple[float, ...]] = {}

    def _vector_for(self, action: Action) -> tuple[float, ...]:
        if action.embedding is not None:
            return action.embedding
        cached = self._action_vectors.get(action.id)
        if cached is None:
            cached = self.provider.embed(action_embedding_text(action))
            self._action_vectors[action.id] = cached
        return cached

    def recommend(
        self, ctx: RecommendationContext, weights: Weights | None = None
    ) -> list[ScoreBreakdown]:
        weights = weights or self.weights
        return recommend(ctx, self.library, weights, self.store, self.provider, self._vector_for)


def recommend(
    ctx: RecommendationContext,
    library: ActionLibrary,
    weights: Weights | None = None,
    store: PreferenceStore | None = None,
    provider: LanguageProvider | None = None,
    action_vector=None,
) -> list[ScoreBreakdown]:
    """Score every action and return the top four breakdowns.

    Noise is drawn once per action, walking ids in ascending order from
    a generator seeded by ctx.seed; ties after noise break by ascending
    action id. Libraries smaller than four return everything, ranked.
    """
    if len(library) == 0:
        raise EmptyLibraryError("cannot recommend from an empty library")
    weights = weights or Weights()
    if provider is None:
        provider = OfflineProvider(library.embedding_dimension)
    if ctx.partner_last_action is not None:
        library.get(ctx.partner_last_action)  # raises UnknownActionError

    analysis = provider.analyze(ctx.draft_text) if ctx.draft_text is not None else None

    def default_vector(action: Action) -> tuple[float, ...]:
        if action.embedding is not None:
            return action.embedding
        return provider.embed(action_embedding_text(action))

    vector_for = action_vector or default_vector

    rng = random.Random(ctx.seed)
    breakdowns: list[ScoreBreakdown] = []
    for action_id in library.ids():
        action = library.get(action_id)
        noise = rng.uniform(0.0, weights.noise_amplitude)
        if analysis is None:
            text_term = 0.0
        else:
            text_term = score_text(analysis, action, _VectorEmbedder(vector_for, action))
        ctx_term = score_context(ctx, action, library)
        pref = preference_value(store, ctx.user_id, action_id)
        total = (
            weights.w_text * text_term
            + weights.w_ctx * ctx_term
            + weights.w_pref * pref
            + noise
        )
        breakdowns.append(
            ScoreBreakdown(
                action_id=action_id,
                s_text=text_term,
                s_ctx=ctx_term,
                preference=pref,
                noise=noise,
                total=total,
            )
        )

    breakdowns.sort(key=lambda b: (-b.total, b.action_id))
    return breakdowns[:4]


class _VectorEmbedder:
    """Adapter so score_text sees a provider-shaped object that returns a
    precomputed (or cached) vector for exactly this action."""

    provider_id = "vector-adapter"

    def __init__(self, vector_for, action: Action):
        self._vector_for = vector_for
        self._action = action

    def analyze(self, text: str):  # pragma: no cover - not used
        raise NotImplementedError

    def embed(self, text: str) -> tuple[float, ...]:
        return self._vector_for(self._action)
