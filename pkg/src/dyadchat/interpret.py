"""Text understanding behind a pluggable provider boundary.

The offline provider is a pure function of its input: fixed tokenizer,
fixed lexicons, hashed-feature embeddings. The remote provider speaks a
small JSON protocol and falls back to nothing by itself; callers decide
whether to retry offline.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol

import httpx

VALENCES = ("positive", "negative", "neutral")

# Kept inside words so contractions survive as single tokens.
_TOKEN_RE = re.compile(r"[a-z0-9']+")

# Cues that open a 3-token negation window. Any token ending in n't
# counts as a cue too.
NEGATION_CUES = frozenset({"not", "don't", "never", "no", "without"})
NEGATION_WINDOW = 3

_STOPWORDS = frozenset(
    """
    a an the i i'm i'll i've i'd you you're you'll you've you'd me my mine
    your yours we we're we'll we've us our ours it it's its is am are was
    were be been being to of in on at for and or but so if then than this
    that that's these those there there's here he she they they're them him
    her his their theirs do does did doing have has had having will would
    could should shall may might must just very really too also about with
    from as by up down out over under again once all any both each few most
    other some such only own same let's gonna wanna
    """.split()
)

_POSITIVE_WORDS = frozenset(
    """
    love adore like liked likes happy glad joy joyful great awesome amazing
    wonderful beautiful win won winning celebrate congrats congratulations
    proud yay hooray cool nice sweet fun funny laugh laughed haha lol excited
    exciting thanks thank grateful good best better fabulous cozy delicious
    yum yummy tasty cute aww excellent perfect brilliant lovely cheerful hug
    kiss smile smiled enjoy enjoyed gorgeous delighted thrilled glorious
    """.split()
)

_NEGATIVE_WORDS = frozenset(
    """
    sad cry crying cried tears upset angry mad hate hated hates awful
    terrible horrible gross disgusting disgust yuck eww annoyed annoying hurt
    hurts pain painful ouch tired exhausted drained lonely miss missed worst
    bad worse ugh sulk unfair weary sick afraid scared worried anxious stress
    stressed fail failed failing lost lose losing grumble complain bored
    boring sorry sigh wrong broke broken miserable gloomy furious
    """.split()
)

# Coarse concept buckets so semantically related words share a strong
# feature even when they share no characters.
_CONCEPTS: dict[str, frozenset[str]] = {
    "food": frozenset(
        """
        apple fruit banana bread cake snack pizza dinner lunch breakfast eat
        yum tasty delicious hungry munch treat tea coffee cookie soup
        """.split()
    ),
    "vehicle": frozenset("bicycle bike car bus train drive ride".split()),
    "affection": frozenset(
        "love heart adore kiss hug cuddle darling sweetheart mwah".split()
    ),
    "sadness": frozenset("sad cry tears sorrow grief upset lonely miss".split()),
    "celebration": frozenset(
        "win won celebrate congrats party cheer yay hooray victory graduation".split()
    ),
    "sport": frozenset(
        "marathon race run running mile gym workout training jog".split()
    ),
    "photo": frozenset("photo picture camera selfie pose snapshot".split()),
    "animal": frozenset("cat dog kitten puppy paw pet bird hamster".split()),
    "rest": frozenset("sleep nap tired sleepy bed goodnight yawn dream".split()),
    "anger": frozenset("angry mad furious annoyed rage grr".split()),
    "humor": frozenset("funny laugh joke haha lol hilarious silly".split()),
    "gratitude": frozenset("thanks thank grateful appreciate".split()),
}

_CONCEPT_WEIGHT = 2.0


class ProviderUnavailable(RuntimeError):
    """Remote provider could not be reached or answered with an error."""


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class TextAnalysis:
    keywords: frozenset[str]
    negated_keywords: frozenset[str]
    valence: str
    embedding: tuple[float, ...]

    def __post_init__(self):
        assert self.negated_keywords <= self.keywords
        assert self.valence in VALENCES


@dataclass(frozen=True)
class ProviderConfig:
    provider_kind: str = "offline"
    endpoint: str = ""
    token: str = ""
    cache_path: str | None = None

    def __post_init__(self):
        if self.provider_kind not in ("offline", "remote"):
            raise ConfigurationError(f"unknown provider kind {self.provider_kind!r}")
        if self.provider_kind == "remote" and not self.endpoint:
            raise ConfigurationError("remote provider requires an endpoint")


class LanguageProvider(Protocol):
    provider_id: str

    def analyze(self, text: str) -> TextAnalysis: ...

    def embed(self, text: str) -> tuple[float, ...]: ...


def tokenize(text: str) -> list[str]:
    return [t.strip("'") for t in _TOKEN_RE.findall(text.lower()) if t.strip("'")]


def _is_cue(token: str) -> bool:
    return token in NEGATION_CUES or token.endswith("n't")


def extract_keywords(tokens: list[str]) -> tuple[frozenset[str], frozenset[str]]:
    """Keywords plus the subset that falls inside a negation window."""
    keywords = {t for t in tokens if t not in _STOPWORDS and not _is_cue(t)}
    negated: set[str] = set()
    for i, token in enumerate(tokens):
        if not _is_cue(token):
            continue
        for follower in tokens[i + 1 : i + 1 + NEGATION_WINDOW]:
            if follower in keywords:
                negated.add(follower)
    return frozenset(keywords), frozenset(negated)


def classify_valence(keywords: frozenset[str], negated: frozenset[str]) -> str:
    score = 0
    for word in keywords:
        signed = 1 if word in _POSITIVE_WORDS else -1 if word in _NEGATIVE_WORDS else 0
        if signed and word in negated:
            signed = -signed
        score += signed
    if score > 0:
        return "positive"
    if score < 0:
        return "negative"
    return "neutral"


def _bucket(feature: str, dimension: int) -> tuple[int, float]:
    digest = hashlib.sha1(feature.encode("utf-8")).digest()
    index = int.from_bytes(digest[:8], "big") % dimension
    return index, (1.0 if digest[8] & 1 else -1.0)


def _accumulate(vector: list[float], feature: str, weight: float) -> None:
    index, sign = _bucket(feature, len(vector))
    vector[index] += sign * weight


def hashed_embedding(text: str, dimension: int) -> tuple[float, ...]:
    """Deterministic unit-norm embedding; zero vector for empty text.

    Features per token: the whole token, boundary-marked character
    trigrams, and any concept buckets the token belongs to.
    """
    vector = [0.0] * dimension
    for token in tokenize(text):
        _accumulate(vector, "tok:" + token, 1.0)
        marked = "^" + token + "$"
        for i in range(len(marked) - 2):
            _accumulate(vector, "tri:" + marked[i : i + 3], 1.0)
        for concept, members in _CONCEPTS.items():
            if token in members:
                _accumulate(vector, "con:" + concept, _CONCEPT_WEIGHT)
    norm = math.sqrt(sum(x * x for x in vector))
    if norm == 0.0:
        return tuple(vector)
    return tuple(x / norm for x in vector)


def cosine(u: tuple[float, ...], v: tuple[float, ...]) -> float:
    if len(u) != len(v):
        raise ConfigurationError(f"vector dimension mismatch: {len(u)} vs {len(v)}")
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    value = sum(a * b for a, b in zip(u, v)) / (nu * nv)
    return max(-1.0, min(1.0, value))


class EmbeddingCache:
    """Append-only JSONL map (provider, dimension, sha256 of text) -> vector.

    Reads are lock-free against the in-memory dict; writes append under a
    lock and flush before returning.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, int, str], tuple[float, ...]] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                    key = (row["provider"], int(row["dim"]), row["sha256"])
                    self._entries[key] = tuple(float(x) for x in row["vector"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    continue  # tolerate a torn final line

    @staticmethod
    def text_key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def get(self, provider_id: str, dimension: int, text: str) -> tuple[float, ...] | None:
        return self._entries.get((provider_id, dimension, self.text_key(text)))

    def put(self, provider_id: str, dimension: int, text: str, vector: tuple[float, ...]) -> None:
        key = (provider_id, dimension, self.text_key(text))
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = tuple(vector)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {
                            "provider": provider_id,
                            "dim": dimension,
                            "sha256": key[2],
                            "vector": list(vector),
                        }
                    )
                    + "\n"
                )
                fh.flush()


class OfflineProvider:
    """Deterministic, dependency-free analysis at a fixed dimension."""

    provider_id = "offline-v1"

    def __init__(self, dimension: int = 128, cache: EmbeddingCache | None = None):
        if dimension < 1:
            raise ConfigurationError("embedding dimension must be positive")
        self.dimension = dimension
        self.cache = cache

    def analyze(self, text: str) -> TextAnalysis:
        tokens = tokenize(text)
        keywords, negated = extract_keywords(tokens)
        return TextAnalysis(
            keywords=keywords,
            negated_keywords=negated,
            valence=classify_valence(keywords, negated),
            embedding=self.embed(text),
        )

    def embed(self, text: str) -> tuple[float, ...]:
        if self.cache is not None:
            hit = self.cache.get(self.provider_id, self.dimension, text)
            if hit is not None:
                return hit
        vector = hashed_embedding(text, self.dimension)
        if self.cache is not None:
            self.cache.put(self.provider_id, self.dimension, text, vector)
        return vector


class RemoteProvider:
    """HTTP provider speaking POST {endpoint}/analyze and /embed.

    Results are memoized by content hash for the life of the process;
    embeddings additionally persist through the shared cache file.
    """

    def __init__(
        self,
        config: ProviderConfig,
        dimension: int,
        cache: EmbeddingCache | None = None,
        timeout: float = 10.0,
    ):
        if config.provider_kind != "remote":
            raise ConfigurationError("RemoteProvider requires a remote ProviderConfig")
        self.config = config
        self.dimension = dimension
        self.cache = cache
        self.provider_id = "remote:" + config.endpoint
        self._timeout = timeout
        self._analysis_memo: dict[str, TextAnalysis] = {}

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
            raise ProviderUnavailable(f"remote provider failed on {route}: {exc}") from exc

    def analyze(self, text: str) -> TextAnalysis:
        memo_key = EmbeddingCache.text_key(text)
        if memo_key in self._analysis_memo:
            return self._analysis_memo[memo_key]
        body = self._post("/analyze", {"text": text, "dimension": self.dimension})
        keywords = frozenset(str(k).lower() for k in body.get("keywords", []))
        negated = frozenset(str(k).lower() for k in body.get("negated_keywords", [])) & keywords
        valence = body.get("valence", "neutral")
        if valence not in VALENCES:
            valence = "neutral"
        analysis = TextAnalysis(
            keywords=keywords,
            negated_keywords=negated,
            valence=valence,
            embedding=self.embed(text),
        )
        self._analysis_memo[memo_key] = analysis
        return analysis

    def embed(self, text: str) -> tuple[float, ...]:
        if self.cache is not None:
            hit = self.cache.get(self.provider_id, self.dimension, text)
            if hit is not None:
                return hit
        body = self._post("/embed", {"text": text, "dimension": self.dimension})
        vector = tuple(float(x) for x in body.get("vector", ()))
        if len(vector) != self.dimension:
            raise ConfigurationError(
                f"remote embedding has dimension {len(vector)}, library declares {self.dimension}"
            )
        if self.cache is not None:
            self.cache.put(self.provider_id, self.dimension, text, vector)
        return vector


def provider_from_env(
    dimension: int = 128, cache_path: str | Path | None = None
) -> LanguageProvider:
    """Build a provider from DYADCHAT_PROVIDER{,_ENDPOINT,_TOKEN}."""
    kind = os.environ.get("DYADCHAT_PROVIDER", "offline").strip().lower()
    cache = EmbeddingCache(cache_path) if cache_path else None
    if kind in ("", "offline"):
        return OfflineProvider(dimension, cache)
    if kind == "remote":
        config = ProviderConfig(
            provider_kind="remote",
            endpoint=os.environ.get("DYADCHAT_PROVIDER_ENDPOINT", ""),
            token=os.environ.get("DYADCHAT_PROVIDER_TOKEN", ""),
        )
        return RemoteProvider(config, dimension, cache)
    raise ConfigurationError(f"unknown DYADCHAT_PROVIDER value {kind!r}")
