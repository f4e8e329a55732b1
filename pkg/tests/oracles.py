"""Independent reference arithmetic and random fixture generators.

Nothing here calls into dyadchat's scoring pipeline: terms, clamping,
weighting, noise draws, and sorting are all recomputed from scratch so
the engine can be checked against a second implementation.
"""

from __future__ import annotations

import math
import random
from typing import Any

EMOTIONS = ("positive", "negative", "neutral")
ROLES = ("self_oriented", "responsive")

# Mixed vocabulary: positive, negative, and plain words, so random texts
# exercise every valence branch and the embedding-only path.
VOCAB = [
    "love", "happy", "great", "awesome", "celebrate", "proud", "sweet", "fun",
    "sad", "cry", "tears", "angry", "gross", "tired", "awful", "lonely",
    "table", "window", "river", "cloud", "paper", "stone", "garden", "train",
    "apple", "fruit", "bicycle", "marathon", "photo", "cat", "dog", "blanket",
    "morning", "evening", "quiet", "loud", "slow", "fast", "green", "round",
    "not", "never", "no", "don't", "without", "really", "maybe", "today",
]


def oracle_cosine(u, v) -> float:
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return sum(a * b for a, b in zip(u, v)) / (nu * nv)


def oracle_text_term(analysis, action: dict[str, Any]) -> float:
    hits = set(analysis.keywords) & set(action["keywords"])
    plain = hits - set(analysis.negated_keywords)
    if plain:
        k = 3.0
    elif hits:
        k = -3.0
    else:
        k = 0.0

    if analysis.valence == "neutral":
        v = 1.0
    elif analysis.valence == action["emotion"]:
        v = 2.0
    elif action["emotion"] != "neutral" and (
        set(analysis.negated_keywords) & set(action["keywords"])
    ):
        v = 2.0
    else:
        v = 0.0

    e = 0.0
    if k == 0.0 and analysis.valence == "neutral":
        sim = oracle_cosine(analysis.embedding, action["vector"])
        if sim > 0.0:
            e = 2.0 * sim
    return k + v + e


def oracle_context_term(
    partner_last: str | None, state: str, action: dict[str, Any], by_id: dict[str, dict]
) -> float:
    total = 0.0
    if partner_last is not None and action["id"] in by_id[partner_last]["candidates"]:
        total += 5.0
    if state == "partner_acted_last" and action["role"] == "responsive":
        total += 1.0
    return total


def oracle_preference(selected: int, ignored: int, hidden: int) -> float:
    raw = 0.1 * selected - 0.05 * ignored - 0.2 * hidden
    return min(1.0, max(-1.0, raw))


def oracle_rank(
    actions: list[dict[str, Any]],
    analysis,
    partner_last: str | None,
    state: str,
    counts_for,
    seed: int,
    w_text: float = 1.0,
    w_ctx: float = 1.0,
    w_pref: float = 0.5,
    noise_amplitude: float = 0.0,
) -> list[dict[str, Any]]:
    """Score every action and sort, fully restating the contract:
    noise drawn per action walking ids ascending, ties broken by id."""
    by_id = {a["id"]: a for a in actions}
    rng = random.Random(seed)
    rows = []
    for action_id in sorted(by_id):
        action = by_id[action_id]
        noise = rng.uniform(0.0, noise_amplitude)
        s_text = 0.0 if analysis is None else oracle_text_term(analysis, action)
        s_ctx = oracle_context_term(partner_last, state, action, by_id)
        sel, ign, hid = counts_for(action_id)
        pref = oracle_preference(sel, ign, hid)
        total = w_text * s_text + w_ctx * s_ctx + w_pref * pref + noise
        rows.append(
            {
                "id": action_id,
                "s_text": s_text,
                "s_ctx": s_ctx,
                "preference": pref,
                "noise": noise,
                "total": total,
            }
        )
    rows.sort(key=lambda r: (-r["total"], r["id"]))
    return rows


def action_view(action, vector) -> dict[str, Any]:
    """Flatten a library Action into the plain dict the oracle reads."""
    return {
        "id": action.id,
        "keywords": set(action.keywords),
        "emotion": action.emotion,
        "role": action.interaction_role,
        "candidates": set(action.reaction_candidates),
        "vector": vector,
    }


# -- random fixtures ------------------------------------------------------


def random_library_document(rng: random.Random, max_actions: int = 50, dim: int = 32) -> dict:
    count = rng.randint(1, max_actions)
    ids = [f"{rng.choice(VOCAB).replace(chr(39), '')}-{i}" for i in range(count)]
    actions = []
    for i, action_id in enumerate(ids):
        others = [x for x in ids if x != action_id]
        n_candidates = rng.randint(0, min(3, len(others)))
        actions.append(
            {
                "id": action_id,
                "name": action_id.replace("-", " ").title(),
                "description": f"Expresses {action_id.replace('-', ' ')}.",
                "keywords": sorted(
                    {rng.choice(VOCAB).replace(chr(39), "") for _ in range(rng.randint(1, 4))}
                ),
                "emotion": rng.choice(EMOTIONS),
                "interaction_role": rng.choice(ROLES),
                "reaction_candidates": rng.sample(others, n_candidates),
            }
        )
    return {"version": 1, "embedding_dimension": dim, "actions": actions}


def random_draft(rng: random.Random) -> str | None:
    roll = rng.random()
    if roll < 0.25:
        return None
    if roll < 0.35:
        return ""
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 6)))


def random_context_args(rng: random.Random, library_ids: list[str]) -> dict[str, Any]:
    partner_last = rng.choice(library_ids) if rng.random() < 0.5 else None
    if partner_last is not None:
        state = rng.choice(("partner_acted_last", "idle", "self_acted_last"))
    else:
        state = rng.choice(("opening", "idle", "self_acted_last"))
    return {
        "user_id": f"user-{rng.randint(0, 3)}",
        "draft_text": random_draft(rng),
        "partner_last_action": partner_last,
        "conversation_state": state,
        "seed": rng.getrandbits(32),
    }
