from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from dyadchat.cli import main
from dyadchat.config import ServiceConfig
from dyadchat.narrative import Micronarrative
from dyadchat.store import ConversationStore


@pytest.fixture
def runner():
    return CliRunner()


def all_output(result) -> str:
    try:
        err = result.stderr
    except (ValueError, AttributeError):
        err = ""
    return result.output + err


def write_library(tmp_path, mutate=None):
    doc = {
        "version": 1,
        "embedding_dimension": 8,
        "actions": [
            {
                "id": "wave",
                "name": "Wave",
                "description": "A friendly wave.",
                "keywords": ["wave", "hello"],
                "emotion": "positive",
                "interaction_role": "self_oriented",
                "reaction_candidates": ["wave-back"],
            },
            {
                "id": "wave-back",
                "name": "Wave Back",
                "description": "Returning the wave.",
                "keywords": ["wave", "back"],
                "emotion": "positive",
                "interaction_role": "responsive",
                "reaction_candidates": [],
            },
        ],
    }
    if mutate:
        mutate(doc)
    path = tmp_path / "library.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


# -- library lint ---------------------------------------------------------


def test_lint_canonical_library(runner):
    from dyadchat.actions import canonical_library_path

    result = runner.invoke(main, ["library", "lint", str(canonical_library_path())])
    assert result.exit_code == 0
    assert "ok: 42 actions, version 1, embedding dimension 128" in result.output


def test_lint_duplicate_id(runner, tmp_path):
    path = write_library(tmp_path, lambda d: d["actions"].append(dict(d["actions"][0])))
    result = runner.invoke(main, ["library", "lint", path])
    assert result.exit_code == 1
    assert "'wave'" in all_output(result)
    assert "duplicate id" in all_output(result)


def test_lint_dangling_candidate(runner, tmp_path):
    def mutate(doc):
        doc["actions"][0]["reaction_candidates"] = ["ghost"]

    result = runner.invoke(main, ["library", "lint", write_library(tmp_path, mutate)])
    assert result.exit_code == 1
    assert "'ghost'" in all_output(result)


def test_lint_bad_emotion(runner, tmp_path):
    def mutate(doc):
        doc["actions"][1]["emotion"] = "elated"

    result = runner.invoke(main, ["library", "lint", write_library(tmp_path, mutate)])
    assert result.exit_code == 1
    assert "'wave-back'" in all_output(result)
    assert "'elated'" in all_output(result)


def test_lint_unreadable_file(runner, tmp_path):
    result = runner.invoke(main, ["library", "lint", str(tmp_path / "missing.json")])
    assert result.exit_code == 1


# -- recommend ----------------------------------------------------------------


def test_recommend_table_output(runner):
    result = runner.invoke(
        main, ["recommend", "--partner-last", "throw-heart", "--no-noise"]
    )
    assert result.exit_code == 0
    lines = result.output.splitlines()
    assert lines[0].split() == ["action", "s_text", "s_ctx", "pref", "noise", "total"]
    body = [line.split()[0] for line in lines[1:]]
    assert set(body) == {"catch-heart", "carry-heart", "split-heart", "throw-back-heart"}


def test_recommend_json_output(runner):
    result = runner.invoke(
        main, ["recommend", "--text", "I love you", "--no-noise", "--as-json"]
    )
    assert result.exit_code == 0
    rows = json.loads(result.output)
    assert [r["action_id"] for r in rows] == [
        "blow-kiss",
        "catch-heart",
        "throw-back-heart",
        "throw-heart",
    ]
    assert all(r["total"] == 5.0 for r in rows)


def test_recommend_seed_reproducibility(runner):
    first = runner.invoke(main, ["recommend", "--seed", "9", "--as-json"])
    second = runner.invoke(main, ["recommend", "--seed", "9", "--as-json"])
    assert first.output == second.output
    different = runner.invoke(main, ["recommend", "--seed", "10", "--as-json"])
    noise = lambda out: [r["noise"] for r in json.loads(out)]
    assert noise(first.output) != noise(different.output)


def test_recommend_unknown_partner_action(runner):
    result = runner.invoke(main, ["recommend", "--partner-last", "does-not-exist"])
    assert result.exit_code == 1
    assert "does-not-exist" in all_output(result)


def test_recommend_with_custom_library(runner, tmp_path):
    path = write_library(tmp_path)
    result = runner.invoke(
        main,
        ["recommend", "--library", path, "--partner-last", "wave", "--no-noise", "--as-json"],
    )
    assert result.exit_code == 0
    rows = json.loads(result.output)
    assert rows[0]["action_id"] == "wave-back"
    assert rows[0]["s_ctx"] == 6.0


def test_recommend_usage_error_exits_2(runner):
    result = runner.invoke(main, ["recommend", "--seed", "not-a-number"])
    assert result.exit_code == 2


# -- narrate --------------------------------------------------------------------


def test_narrate_neutral_baseline(runner):
    result = runner.invoke(main, ["narrate", "--action", "hug", "--offline"])
    assert result.exit_code == 0
    assert result.output.rstrip("\n") == "Wrapping you up in the biggest hug"


def test_narrate_with_story_and_tags(runner, tmp_path):
    story = tmp_path / "story.txt"
    story.write_text("I love my cat and I run marathons.", encoding="utf-8")
    result = runner.invoke(
        main,
        [
            "narrate",
            "--action",
            "wipe-others-tears",
            "--story-file",
            str(story),
            "--tags",
            "cat",
            "--offline",
        ],
    )
    assert result.exit_code == 0
    assert result.output.rstrip("\n") == (
        "Here, let me wipe those tears away, true to my cat side"
    )


def test_narrate_unknown_action(runner):
    result = runner.invoke(main, ["narrate", "--action", "does-not-exist", "--offline"])
    assert result.exit_code == 1
    assert "does-not-exist" in all_output(result)


def test_narrate_requires_action_flag(runner):
    result = runner.invoke(main, ["narrate"])
    assert result.exit_code == 2


# -- export ----------------------------------------------------------------------


def test_export_round_trip(runner, tmp_path):
    data_dir = tmp_path / "data"
    store = ConversationStore(data_dir)
    store.register_user("alice")
    store.register_user("bob")
    convo = store.open_conversation("alice", "bob")
    store.new_text(convo, "alice", "hello")
    store.new_action(
        convo,
        "bob",
        "hug",
        Micronarrative(
            text="Wrapping you up",
            action_id="hug",
            story_version=0,
            tags_used=(),
            generated_by="offline_template",
        ),
        persist=True,
    )
    store.new_action(convo, "alice", "peek", None, persist=False)
    store.close()

    result = runner.invoke(main, ["export", convo, "--data-dir", str(data_dir)])
    assert result.exit_code == 0
    rows = [json.loads(line) for line in result.output.splitlines()]
    assert [r["kind"] for r in rows] == ["text", "action_with_narrative"]
    assert rows[1]["micronarrative"]["text"] == "Wrapping you up"


def test_export_unknown_conversation(runner, tmp_path):
    result = runner.invoke(
        main, ["export", "nobody--nothere", "--data-dir", str(tmp_path / "data")]
    )
    assert result.exit_code == 1


# -- run-script --------------------------------------------------------------------


def write_script(tmp_path, body) -> str:
    path = tmp_path / "session.json"
    path.write_text(json.dumps(body), encoding="utf-8")
    return str(path)


def test_run_script_passing(runner, tmp_path):
    script = write_script(
        tmp_path,
        {
            "seed": 1,
            "steps": [
                {"op": "text", "actor": "A", "text": "hello"},
                {"op": "assert", "actor": "B", "check": "history_count", "expected": 1},
            ],
        },
    )
    result = runner.invoke(main, ["run-script", script])
    assert result.exit_code == 0
    assert "2/2 steps passed" in result.output


def test_run_script_failing_assert(runner, tmp_path):
    script = write_script(
        tmp_path,
        {
            "steps": [
                {"op": "action_only", "actor": "A", "action": "peek", "save_as": "e1"},
                {
                    "op": "assert",
                    "actor": "B",
                    "check": "history_contains",
                    "record_from": "e1",
                    "expected": True,
                },
            ],
        },
    )
    result = runner.invoke(main, ["run-script", script])
    assert result.exit_code == 1
    assert "FAIL 2" in result.output
    assert "1/2 steps passed" in result.output


def test_run_script_parse_error(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"steps": [,]}', encoding="utf-8")
    result = runner.invoke(main, ["run-script", str(path)])
    assert result.exit_code == 2
    assert "parse error" in result.output
    assert "line 1" in result.output


def test_run_script_unknown_op(runner, tmp_path):
    script = write_script(tmp_path, {"steps": [{"op": "teleport", "actor": "A"}]})
    result = runner.invoke(main, ["run-script", script])
    assert result.exit_code == 2
    assert "teleport" in result.output


# -- config loading -------------------------------------------------------------------


def test_service_config_file_and_env(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps({"port": 9000, "ephemeral_ttl": 5.0, "w_pref": 0.25}), encoding="utf-8"
    )
    config = ServiceConfig.load(path, env={})
    assert config.port == 9000
    assert config.ephemeral_ttl == 5.0
    assert config.weights().w_pref == 0.25

    overridden = ServiceConfig.load(
        path, env={"DYADCHAT_PORT": "9100", "DYADCHAT_NOISE_AMPLITUDE": "0"}
    )
    assert overridden.port == 9100
    assert overridden.weights().noise_amplitude == 0.0


def test_service_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"flux_capacitor": True}), encoding="utf-8")
    with pytest.raises(ValueError) as exc:
        ServiceConfig.load(path, env={})
    assert "flux_capacitor" in str(exc.value)


def test_service_config_defaults():
    config = ServiceConfig.load(env={})
    assert config.port == 8470
    assert config.provider_kind == "offline"
    assert config.resolved_cache_path().name == "embeddings.jsonl"
