"""Operator and developer entry point.

Exit codes: 0 success, 1 validation or assertion failure, 2 usage error
(click's default for bad invocations).
"""

from __future__ import annotations

import dataclasses
import json
import sys
import time

import click

from . import gateway
from .actions import (
    LibraryError,
    UnknownActionError,
    load_canonical_library,
    load_library,
)
from .config import ServiceConfig
from .interpret import ProviderConfig, provider_from_env
from .narrative import MicronarrativeEngine, PersonalStory, RemoteCaptionProvider
from .recommend import (
    EmptyLibraryError,
    RecommendationContext,
    Weights,
    recommend as recommend_actions,
)
from .scripts import run_script
from .service import DyadChatService
from .store import ConversationStore, UnknownRecordError


@click.group()
@click.version_option(package_name="dyadchat")
def main() -> None:
    """Dyadic chat service with action recommendation and captions."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default=None, help="Listen address override.")
@click.option("--port", type=int, default=None, help="Listen port override.")
@click.option("--data-dir", default=None, help="Durable log directory override.")
@click.option("--library", "library_path", default=None, help="Library document override.")
@click.option("--ttl", type=float, default=None, help="Ephemeral status TTL in seconds.")
def serve(config_path, host, port, data_dir, library_path, ttl) -> None:
    """Run the realtime gateway (blocking)."""
    config = ServiceConfig.load(config_path)
    if host is not None:
        config.host = host
    if port is not None:
        config.port = port
    if data_dir is not None:
        config.data_dir = data_dir
    if library_path is not None:
        config.library_path = library_path
    if ttl is not None:
        config.ephemeral_ttl = ttl
    service = DyadChatService(config)
    gateway.serve(service, config.host, config.port)


@main.group()
def library() -> None:
    """Action library utilities."""


@library.command()
@click.argument("file", type=click.Path(dir_okay=False))
def lint(file) -> None:
    """Validate a library document; nonzero exit on any problem."""
    try:
        lib = load_library(file)
    except LibraryError as exc:
        for problem in exc.problems:
            click.echo(problem, err=True)
        sys.exit(1)
    click.echo(
        f"ok: {len(lib)} actions, version {lib.version}, "
        f"embedding dimension {lib.embedding_dimension}"
    )


@main.command()
@click.option("--text", default=None, help="Draft message text, if any.")
@click.option("--partner-last", default=None, help="Partner's most recent action id.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--no-noise", is_flag=True, help="Zero the exploration noise.")
@click.option("--library", "library_path", default=None)
@click.option("--as-json", is_flag=True, help="Structured output for harnesses.")
def recommend(text, partner_last, seed, no_noise, library_path, as_json) -> None:
    """Score the library and print the top four actions."""
    try:
        lib = load_library(library_path) if library_path else load_canonical_library()
    except LibraryError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    provider = provider_from_env(lib.embedding_dimension)
    weights = Weights(noise_amplitude=0.0) if no_noise else Weights()
    state = "partner_acted_last" if partner_last else "idle"
    try:
        ctx = RecommendationContext(
            user_id="cli",
            draft_text=text,
            partner_last_action=partner_last,
            conversation_state=state,
            seed=seed,
        )
        results = recommend_actions(ctx, lib, weights, None, provider)
    except (UnknownActionError, EmptyLibraryError, ValueError) as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    if as_json:
        click.echo(json.dumps([dataclasses.asdict(b) for b in results]))
        return
    click.echo(f"{'action':<22}{'s_text':>8}{'s_ctx':>8}{'pref':>8}{'noise':>8}{'total':>9}")
    for b in results:
        click.echo(
            f"{b.action_id:<22}{b.s_text:>8.3f}{b.s_ctx:>8.3f}"
            f"{b.preference:>8.3f}{b.noise:>8.4f}{b.total:>9.4f}"
        )


@main.command()
@click.option("--action", "action_id", required=True, help="Action id to caption.")
@click.option("--story-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--tags", default="", help="Comma-separated selected tags.")
@click.option("--offline", is_flag=True, help="Force the offline template.")
@click.option("--library", "library_path", default=None)
def narrate(action_id, story_file, tags, offline, library_path) -> None:
    """Generate a micronarrative for one action."""
    try:
        lib = load_library(library_path) if library_path else load_canonical_library()
    except LibraryError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    caption_provider = None
    if not offline:
        import os

        if os.environ.get("DYADCHAT_PROVIDER", "offline").lower() == "remote":
            caption_provider = RemoteCaptionProvider(
                ProviderConfig(
                    provider_kind="remote",
                    endpoint=os.environ.get("DYADCHAT_PROVIDER_ENDPOINT", ""),
                    token=os.environ.get("DYADCHAT_PROVIDER_TOKEN", ""),
                )
            )
    engine = MicronarrativeEngine(lib, caption_provider)
    story = None
    if story_file:
        story_text = click.open_file(story_file).read().strip()
        story = PersonalStory("cli", story_text, 1, time.time())
    tag_list = [t.strip() for t in tags.split(",") if t.strip()]
    try:
        narrative = engine.generate(action_id, story, (), tag_list)
    except (UnknownActionError, ValueError) as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    click.echo(narrative.text)


@main.command()
@click.argument("conversation_id")
@click.option("--data-dir", default="./dyadchat-data", show_default=True)
def export(conversation_id, data_dir) -> None:
    """Dump a conversation's durable thread as JSON lines."""
    store = ConversationStore(data_dir)
    try:
        store.members(conversation_id)
        for row in store.export(conversation_id):
            click.echo(json.dumps(row))
    except UnknownRecordError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    finally:
        store.close()


@main.command("run-script")
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--data-dir", default=None, help="Reuse a data directory instead of a temp one.")
def run_script_command(file, data_dir) -> None:
    """Replay a scripted dyad session end-to-end and report pass/fail."""
    sys.exit(run_script(file, data_dir))


if __name__ == "__main__":
    main()
