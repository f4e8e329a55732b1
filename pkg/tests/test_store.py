from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadchat.narrative import Micronarrative
from dyadchat.store import (
    Contact,
    ConversationStore,
    EphemeralRecordError,
    ExchangeRecord,
    InvariantError,
    NotAMemberError,
    ReplayError,
    UnknownRecordError,
    conversation_id_for,
    record_from_dict,
    record_to_dict,
)


class FakeClock:
    def __init__(self, now=1000.0):
        self.now = now

    def __call__(self):
        return self.now

    def advance(self, seconds):
        self.now += seconds


def caption(action_id="hug", text="Wrapping you up") -> Micronarrative:
    return Micronarrative(
        text=text,
        action_id=action_id,
        story_version=0,
        tags_used=(),
        generated_by="offline_template",
    )


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def store(tmp_path, clock):
    s = ConversationStore(tmp_path / "data", ephemeral_ttl=60.0, clock=clock)
    s.register_user("alice", "Alice")
    s.register_user("bob", "Bob")
    yield s
    s.close()


@pytest.fixture
def convo(store):
    return store.open_conversation("alice", "bob")


# -- identity and membership ---------------------------------------------------


def test_conversation_id_is_order_independent():
    assert conversation_id_for("bob", "alice") == "alice--bob"
    assert conversation_id_for("alice", "bob") == "alice--bob"


def test_open_conversation_is_idempotent(store):
    first = store.open_conversation("alice", "bob")
    second = store.open_conversation("bob", "alice")
    assert first == second
    assert store.members(first) == ("alice", "bob")


def test_open_conversation_requires_registered_users(store):
    with pytest.raises(UnknownRecordError):
        store.open_conversation("alice", "stranger")
    with pytest.raises(InvariantError):
        store.open_conversation("alice", "alice")


def test_register_user_is_idempotent(store):
    before = store.get_user("alice")
    assert store.register_user("alice") == before
    renamed = store.register_user("alice", "Alice Prime")
    assert renamed.display_name == "Alice Prime"


def test_contacts_round_trip(store):
    store.add_contact("alice", "bob", "friend")
    contacts = store.contacts_of("alice")
    assert len(contacts) == 1
    assert contacts[0].peer_id == "bob"
    assert store.contacts_of("bob") == []


def test_contact_icon_validation():
    Contact("a", "b", "family")
    Contact("a", "b", "custom:college-roommate")
    with pytest.raises(InvariantError):
        Contact("a", "b", "nemesis")
    with pytest.raises(InvariantError):
        Contact("a", "b", "custom:")
    with pytest.raises(InvariantError):
        Contact("a", "a", "friend")


# -- appends ---------------------------------------------------------------------


def test_record_ids_are_sequential_and_shared(store, convo):
    first = store.new_text(convo, "alice", "hi")
    ephemeral = store.new_action(convo, "bob", "peek", None, persist=False)
    third = store.new_text(convo, "bob", "hello")
    assert first.record_id == f"{convo}:000001"
    assert ephemeral.record_id == f"{convo}:000002"
    assert third.record_id == f"{convo}:000003"


def test_persist_flag_selects_record_kind(store, convo):
    status = store.new_action(convo, "alice", "peek", None, persist=False)
    assert status.kind == "action_only_status"
    narrated = store.new_action(convo, "alice", "hug", caption(), persist=True)
    assert narrated.kind == "action_with_narrative"
    paired = store.new_action(
        convo, "bob", "hug", caption(), persist=True, paired_with=narrated.record_id
    )
    assert paired.kind == "dyadic_exchange"
    assert paired.paired_with == narrated.record_id


def test_append_requires_membership(store, convo):
    store.register_user("carol", "Carol")
    with pytest.raises(NotAMemberError):
        store.new_text(convo, "carol", "let me in")


def test_text_record_invariants(store, convo):
    with pytest.raises(InvariantError):
        store.new_text(convo, "alice", "")
    with pytest.raises(InvariantError):
        store.append(
            ExchangeRecord("", convo, "alice", "text", 0.0, text="hi", action_id="hug")
        )


def test_ephemeral_record_rejects_caption(store, convo):
    with pytest.raises(InvariantError) as exc:
        store.new_action(convo, "alice", "peek", caption("peek"), persist=False)
    assert "must not carry a micronarrative" in str(exc.value)
    assert store.history(convo, "alice") == []


def test_narrated_record_requires_caption(store, convo):
    with pytest.raises(InvariantError):
        store.new_action(convo, "alice", "hug", None, persist=True)


def test_caption_action_must_match_record_action(store, convo):
    with pytest.raises(InvariantError):
        store.new_action(convo, "alice", "cry", caption("hug"), persist=True)


def test_rejected_append_leaves_no_trace(store, convo):
    store.new_text(convo, "alice", "one")
    with pytest.raises(InvariantError):
        store.new_action(convo, "alice", "hug", None, persist=True)
    record = store.new_text(convo, "bob", "two")
    # the failed append consumed no sequence number
    assert record.record_id == f"{convo}:000002"
    assert [r.text for r in store.history(convo, "alice")] == ["one", "two"]


# -- pairing ---------------------------------------------------------------------


def test_pairing_references_partner_action(store, convo):
    mine = store.new_action(convo, "alice", "throw-heart", caption("throw-heart"), persist=True)
    paired = store.new_action(
        convo, "bob", "catch-heart", caption("catch-heart"), persist=True,
        paired_with=mine.record_id,
    )
    assert paired.kind == "dyadic_exchange"

    replayed = store.replay(paired.record_id, "alice")
    assert replayed["action_id"] == "catch-heart"


def test_pairing_rejects_own_record(store, convo):
    mine = store.new_action(convo, "alice", "throw-heart", caption("throw-heart"), persist=True)
    with pytest.raises(InvariantError):
        store.new_action(
            convo, "alice", "catch-heart", caption("catch-heart"), persist=True,
            paired_with=mine.record_id,
        )


def test_pairing_rejects_text_and_unknown_targets(store, convo):
    text = store.new_text(convo, "alice", "hello")
    with pytest.raises(InvariantError):
        store.new_action(
            convo, "bob", "catch-heart", caption("catch-heart"), persist=True,
            paired_with=text.record_id,
        )
    with pytest.raises(InvariantError):
        store.new_action(
            convo, "bob", "catch-heart", caption("catch-heart"), persist=True,
            paired_with=f"{convo}:999999",
        )


def test_pairing_rejects_record_from_other_conversation(store, convo):
    store.register_user("carol", "Carol")
    other = store.open_conversation("alice", "carol")
    theirs = store.new_action(other, "carol", "throw-heart", caption("throw-heart"), persist=True)
    with pytest.raises(InvariantError):
        store.new_action(
            convo, "bob", "catch-heart", caption("catch-heart"), persist=True,
            paired_with=theirs.record_id,
        )


def test_pairing_with_ephemeral_partner_action(store, convo):
    status = store.new_action(convo, "bob", "throw-heart", None, persist=False)
    paired = store.new_action(
        convo, "alice", "catch-heart", caption("catch-heart"), persist=True,
        paired_with=status.record_id,
    )
    assert paired.kind == "dyadic_exchange"


# -- ephemerality -------------------------------------------------------------------


def test_ephemeral_records_never_enter_history(store, convo, clock):
    store.new_action(convo, "alice", "peek", None, persist=False)
    assert store.history(convo, "bob") == []
    assert len(store.live_statuses(convo, "bob")) == 1
    clock.advance(61)
    assert store.live_statuses(convo, "bob") == []
    assert store.history(convo, "bob") == []


def test_ephemeral_replay_is_a_named_error(store, convo, clock):
    status = store.new_action(convo, "alice", "peek", None, persist=False)
    with pytest.raises(EphemeralRecordError) as exc:
        store.replay(status.record_id, "bob")
    assert "ephemeral record" in str(exc.value)
    clock.advance(3600)
    with pytest.raises(EphemeralRecordError):
        store.replay(status.record_id, "bob")


def test_ephemeral_log_file_stays_untouched(store, convo, tmp_path):
    store.new_text(convo, "alice", "hello")
    store.new_action(convo, "alice", "peek", None, persist=False)
    log = store.data_dir / "conversations" / f"{convo}.jsonl"
    lines = [json.loads(l) for l in log.read_text(encoding="utf-8").splitlines()]
    assert len(lines) == 1
    assert lines[0]["kind"] == "text"


# -- replay ---------------------------------------------------------------------------


def test_replay_returns_action_and_caption(store, convo):
    record = store.new_action(convo, "alice", "hug", caption(), persist=True)
    replayed = store.replay(record.record_id, "bob")
    assert replayed["action_id"] == "hug"
    assert replayed["micronarrative"]["text"] == "Wrapping you up"
    assert store.replay(record.record_id, "bob") == replayed


def test_replay_text_record_fails(store, convo):
    record = store.new_text(convo, "alice", "hello")
    with pytest.raises(ReplayError):
        store.replay(record.record_id, "bob")


def test_replay_unknown_record_fails(store, convo):
    with pytest.raises(UnknownRecordError):
        store.replay(f"{convo}:424242", "alice")


def test_replay_requires_membership(store, convo):
    store.register_user("carol", "Carol")
    record = store.new_action(convo, "alice", "hug", caption(), persist=True)
    with pytest.raises(NotAMemberError):
        store.replay(record.record_id, "carol")


# -- history ---------------------------------------------------------------------------


def test_history_pagination(store, convo):
    for i in range(5):
        store.new_text(convo, "alice", f"message {i}")
    page0 = store.history(convo, "bob", page=0, page_size=2)
    page1 = store.history(convo, "bob", page=1, page_size=2)
    page2 = store.history(convo, "bob", page=2, page_size=2)
    texts = [r.text for r in page0 + page1 + page2]
    assert texts == [f"message {i}" for i in range(5)]
    assert store.history(convo, "bob", page=9, page_size=2) == []
    with pytest.raises(ValueError):
        store.history(convo, "bob", page=-1)
    with pytest.raises(ValueError):
        store.history(convo, "bob", page_size=0)


def test_history_requires_membership(store, convo):
    store.register_user("carol", "Carol")
    with pytest.raises(NotAMemberError):
        store.history(convo, "carol")


def test_history_after_record_id(store, convo):
    first = store.new_text(convo, "alice", "one")
    second = store.new_text(convo, "bob", "two")
    third = store.new_text(convo, "alice", "three")
    assert [r.record_id for r in store.history_after(convo, "bob", first.record_id)] == [
        second.record_id,
        third.record_id,
    ]
    assert len(store.history_after(convo, "bob", None)) == 3
    assert store.history_after(convo, "bob", third.record_id) == []


def test_timestamps_never_decrease(store, convo, clock):
    first = store.new_text(convo, "alice", "one")
    clock.now -= 50  # wall clock jumps backwards
    second = store.new_text(convo, "bob", "two")
    assert second.timestamp >= first.timestamp


# -- durability ------------------------------------------------------------------------


def test_append_is_flushed_before_return(store, convo):
    record = store.new_action(convo, "alice", "hug", caption(), persist=True)
    log = store.data_dir / "conversations" / f"{convo}.jsonl"
    lines = log.read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[-1])["record_id"] == record.record_id


def test_reopened_store_preserves_everything(tmp_path, clock):
    data_dir = tmp_path / "data"
    store = ConversationStore(data_dir, clock=clock)
    store.register_user("alice", "Alice")
    store.register_user("bob", "Bob")
    store.add_contact("alice", "bob", "partner")
    convo = store.open_conversation("alice", "bob")
    kept = store.new_action(convo, "alice", "hug", caption(), persist=True)
    gone = store.new_action(convo, "alice", "peek", None, persist=False)
    store.new_text(convo, "bob", "goodnight")
    store.close()

    again = ConversationStore(data_dir, clock=clock)
    assert again.get_user("alice").display_name == "Alice"
    assert again.contacts_of("alice")[0].relationship_icon == "partner"
    history = again.history(convo, "bob")
    assert [r.record_id for r in history] == [kept.record_id, f"{convo}:000003"]
    assert again.replay(kept.record_id, "bob")["action_id"] == "hug"
    # the ephemeral id was never written, so after restart it is unknown
    with pytest.raises(UnknownRecordError):
        again.replay(gone.record_id, "bob")
    # sequence numbering continues from the durable tail
    fresh = again.new_text(convo, "alice", "morning")
    assert fresh.record_id == f"{convo}:000004"
    again.close()


def test_reopened_store_tolerates_torn_tail_line(tmp_path, clock):
    data_dir = tmp_path / "data"
    store = ConversationStore(data_dir, clock=clock)
    store.register_user("alice", "Alice")
    store.register_user("bob", "Bob")
    convo = store.open_conversation("alice", "bob")
    store.new_text(convo, "alice", "kept")
    store.close()
    log = data_dir / "conversations" / f"{convo}.jsonl"
    with log.open("a", encoding="utf-8") as fh:
        fh.write('{"record_id": "' + convo + ':000002", "kind": "te')
    again = ConversationStore(data_dir, clock=clock)
    assert [r.text for r in again.history(convo, "alice")] == ["kept"]
    again.close()


def test_record_serialization_round_trip(store, convo):
    record = store.new_action(
        convo, "alice", "hug",
        Micronarrative(
            text="With feeling",
            action_id="hug",
            story_version=3,
            tags_used=("cat", "marathon"),
            generated_by="user_edit",
            edited=True,
        ),
        persist=True,
    )
    assert record_from_dict(record_to_dict(record)) == record
    plain = store.new_text(convo, "bob", "hi")
    assert record_from_dict(record_to_dict(plain)) == plain


# -- context derivation -------------------------------------------------------------------


def test_derive_context_walk(store, convo, clock):
    assert store.derive_context(convo, "alice") == (None, "opening")

    store.new_text(convo, "bob", "hello")
    assert store.derive_context(convo, "alice") == (None, "idle")

    store.new_action(convo, "bob", "throw-heart", caption("throw-heart", "Heart!"), persist=True)
    assert store.derive_context(convo, "alice") == ("throw-heart", "partner_acted_last")
    assert store.derive_context(convo, "bob") == (None, "self_acted_last")


def test_derive_context_counts_live_ephemeral(store, convo, clock):
    store.new_text(convo, "bob", "hello")
    store.new_action(convo, "bob", "peek", None, persist=False)
    assert store.derive_context(convo, "alice") == ("peek", "partner_acted_last")
    clock.advance(61)
    # expired status no longer counts; the durable text is newest again
    assert store.derive_context(convo, "alice") == (None, "idle")


def test_recent_context_window(store, convo):
    for i in range(10):
        store.new_text(convo, "alice" if i % 2 else "bob", f"m{i}")
    window = store.recent_context(convo, "alice", window=6)
    assert [r.text for r in window] == [f"m{i}" for i in range(4, 10)]


def test_export_yields_durable_dicts(store, convo):
    store.new_text(convo, "alice", "one")
    store.new_action(convo, "alice", "peek", None, persist=False)
    rows = list(store.export(convo))
    assert len(rows) == 1
    assert rows[0]["text"] == "one"


# -- property: ephemerality invariant --------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["text", "status", "narrated"]), max_size=12), st.integers(0, 2**16))
def test_history_is_exactly_the_durable_prefix(tmp_path_factory, ops, seed):
    rng = random.Random(seed)
    root = tmp_path_factory.mktemp("prop")
    store = ConversationStore(root, clock=FakeClock())
    store.register_user("alice")
    store.register_user("bob")
    convo = store.open_conversation("alice", "bob")
    durable_ids = []
    try:
        for i, op in enumerate(ops):
            sender = rng.choice(("alice", "bob"))
            if op == "text":
                record = store.new_text(convo, sender, f"t{i}")
                durable_ids.append(record.record_id)
            elif op == "status":
                store.new_action(convo, sender, "peek", None, persist=False)
            else:
                record = store.new_action(convo, sender, "hug", caption(), persist=True)
                durable_ids.append(record.record_id)
        history = store.history(convo, "alice", page_size=500)
        assert [r.record_id for r in history] == durable_ids
        assert all(r.kind != "action_only_status" for r in history)
    finally:
        store.close()
