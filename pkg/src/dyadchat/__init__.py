"""Dyadic messaging with reciprocity-aware action recommendation,
personalized micronarratives, and ephemeral or persistent exchanges."""

from .actions import (
    Action,
    ActionLibrary,
    LibraryError,
    UnknownActionError,
    load_canonical_library,
    load_library,
    reaction_candidates_of,
    remove_action,
    serialize_library,
    upsert_action,
)
from .config import ServiceConfig
from .interpret import (
    EmbeddingCache,
    OfflineProvider,
    ProviderConfig,
    TextAnalysis,
    cosine,
    provider_from_env,
)
from .narrative import (
    Micronarrative,
    MicronarrativeEngine,
    PersonalStory,
    StoryBook,
    TagSet,
    apply_user_edit,
    propose_tags,
)
from .recommend import (
    PreferenceStore,
    RecommendationContext,
    Recommender,
    ScoreBreakdown,
    Weights,
    preference_value,
    recommend,
    score_context,
    score_text,
)
from .service import AuthenticationError, DyadChatService
from .store import ConversationStore, Contact, ExchangeRecord, User

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionLibrary",
    "AuthenticationError",
    "Contact",
    "ConversationStore",
    "DyadChatService",
    "EmbeddingCache",
    "ExchangeRecord",
    "LibraryError",
    "Micronarrative",
    "MicronarrativeEngine",
    "OfflineProvider",
    "PersonalStory",
    "PreferenceStore",
    "ProviderConfig",
    "RecommendationContext",
    "Recommender",
    "ScoreBreakdown",
    "ServiceConfig",
    "StoryBook",
    "TagSet",
    "TextAnalysis",
    "UnknownActionError",
    "User",
    "Weights",
    "apply_user_edit",
    "cosine",
    "load_canonical_library",
    "load_library",
    "preference_value",
    "propose_tags",
    "provider_from_env",
    "reaction_candidates_of",
    "recommend",
    "remove_action",
    "score_context",
    "score_text",
    "serialize_library",
    "upsert_action",
]
