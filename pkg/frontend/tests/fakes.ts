import type { Envelope, ExchangeRecord, Micronarrative, ScoredAction } from "../src/protocol";
import type { SocketLike } from "../src/connection";
import type { FetchFn } from "../src/api";

export class FakeSocket implements SocketLike {
  sent: Envelope[] = [];
  closed = false;
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  handler: ((frame: Envelope) => void) | null = null;

  open(): void {
    this.onopen?.();
  }

  receive(frame: Envelope): void {
    this.onmessage?.({ data: JSON.stringify(frame) });
  }

  send(data: string): void {
    const frame = JSON.parse(data) as Envelope;
    this.sent.push(frame);
    this.handler?.(frame);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  dropConnection(): void {
    this.onclose?.();
  }
}

export function scored(ids: string[]): ScoredAction[] {
  return ids.map((action_id, i) => ({
    action_id,
    s_text: 3,
    s_ctx: 0,
    preference: 0,
    noise: 0,
    total: 3 - i * 0.1,
  }));
}

export function captionFor(actionId: string, tags: string[]): Micronarrative {
  const suffix = tags.length ? `, true to my ${tags.join(" and ")} side` : "";
  return {
    text: `Sending you ${actionId.replace(/-/g, " ")}${suffix}`,
    action_id: actionId,
    story_version: 1,
    tags_used: tags,
    generated_by: "offline_template",
    edited: false,
  };
}

/**
 * An in-memory stand-in for the gateway: answers auth, applies the
 * exchange rules (ephemeral never stored, persistent appended and
 * broadcast), and serves the HTTP routes the client uses.
 */
export class FakeGateway {
  sockets: FakeSocket[] = [];
  durable: ExchangeRecord[] = [];
  ephemeralIds = new Set<string>();
  recommendations: ScoredAction[] = scored([
    "catch-heart",
    "carry-heart",
    "split-heart",
    "throw-back-heart",
  ]);
  outcomes: Array<{ shown: string[]; chosen: string | null }> = [];
  contacts = [{ peer_id: "bob", relationship_icon: "friend" }];
  storyVersion = 0;
  private seq = 0;
  private users = new Map<FakeSocket, string>();

  readonly factory = (_url: string): SocketLike => {
    const socket = new FakeSocket();
    socket.handler = (frame) => this.handle(socket, frame);
    this.sockets.push(socket);
    return socket;
  };

  get lastSocket(): FakeSocket {
    const socket = this.sockets[this.sockets.length - 1];
    if (!socket) throw new Error("no socket connected yet");
    return socket;
  }

  openAll(): void {
    for (const socket of this.sockets) {
      if (!socket.closed) socket.open();
    }
  }

  private nextRecordId(): string {
    this.seq += 1;
    return `alice--bob:${String(this.seq).padStart(6, "0")}`;
  }

  private reply(socket: FakeSocket, event: string, request_id: string, payload: object): void {
    socket.receive({ event, request_id, payload: payload as Record<string, unknown> });
  }

  broadcast(event: string, payload: object): void {
    for (const socket of this.sockets) {
      if (!socket.closed) {
        socket.receive({ event, request_id: "", payload: payload as Record<string, unknown> });
      }
    }
  }

  handle(socket: FakeSocket, frame: Envelope): void {
    const { event, request_id, payload } = frame;
    if (event === "auth") {
      const token = String(payload.token ?? "");
      this.users.set(socket, token.replace(/^tok-/, ""));
      this.reply(socket, "ack", request_id, { user_id: this.users.get(socket) });
      return;
    }
    const sender = this.users.get(socket) ?? "alice";
    if (event === "chat-message") {
      const record: ExchangeRecord = {
        record_id: this.nextRecordId(),
        conversation_id: "alice--bob",
        sender_id: sender,
        kind: "text",
        timestamp: Date.now() / 1000,
        text: String(payload.text ?? ""),
      };
      this.durable.push(record);
      this.broadcast("chat-message", { record });
      this.reply(socket, "ack", request_id, { record_id: record.record_id });
      return;
    }
    if (event === "puppet-action") {
      const persist = Boolean(payload.persist);
      const record: ExchangeRecord = {
        record_id: this.nextRecordId(),
        conversation_id: "alice--bob",
        sender_id: sender,
        kind: persist
          ? payload.paired_with
            ? "dyadic_exchange"
            : "action_with_narrative"
          : "action_only_status",
        timestamp: Date.now() / 1000,
        action_id: String(payload.action_id),
      };
      if (persist && payload.micronarrative) {
        record.micronarrative = payload.micronarrative as Micronarrative;
      }
      if (payload.paired_with) record.paired_with = String(payload.paired_with);
      if (persist) this.durable.push(record);
      else this.ephemeralIds.add(record.record_id);
      this.broadcast("puppet-action", { record });
      this.reply(socket, "ack", request_id, { record_id: record.record_id, kind: record.kind });
      return;
    }
    if (event === "recommend-request") {
      this.reply(socket, "recommend-response", request_id, {
        actions: this.recommendations,
        degraded: false,
      });
      this.reply(socket, "ack", request_id, { count: this.recommendations.length });
      return;
    }
    if (event === "emn-update") {
      this.storyVersion += 1;
      this.reply(socket, "ack", request_id, { story_version: this.storyVersion });
      return;
    }
    this.reply(socket, "error", request_id, { code: "bad-frame", message: `unknown ${event}` });
  }

  readonly fetchFn: FetchFn = async (input, init) => {
    const url = String(input);
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const method = init?.method ?? "GET";
    const body = init?.body ? (JSON.parse(String(init.body)) as Record<string, unknown>) : {};

    const json = (status: number, data: object): Response =>
      new Response(JSON.stringify(data), {
        status,
        headers: { "Content-Type": "application/json" },
      });

    if (path.startsWith("/history/")) {
      return json(200, { records: this.durable, page: 0 });
    }
    if (path === "/contacts" && method === "GET") {
      return json(200, { contacts: this.contacts });
    }
    if (path === "/contacts" && method === "POST") {
      const peer = String(body.peer_id);
      const icon = String(body.relationship_icon);
      const existing = this.contacts.find((c) => c.peer_id === peer);
      if (existing) existing.relationship_icon = icon;
      else this.contacts.push({ peer_id: peer, relationship_icon: icon });
      return json(200, { owner_id: "alice", peer_id: peer, relationship_icon: icon });
    }
    if (path === "/conversations") {
      return json(200, { conversation_id: "alice--bob" });
    }
    if (path === "/tags") {
      return json(200, {
        likes_dislikes: ["cat", "music", "coffee", "books", "travel"],
        habits: ["run", "journaling", "early-riser", "gardening", "baking"],
        social_style: ["shy", "warm", "playful", "good-listener", "encouraging"],
        emotion: ["cheerful", "calm", "sentimental", "upbeat", "thoughtful"],
        selected: [],
      });
    }
    if (path === "/narrate") {
      return json(200, {
        micronarrative: captionFor(String(body.action_id), (body.tags as string[]) ?? []),
      });
    }
    if (path === "/recommend/outcome") {
      this.outcomes.push({
        shown: body.shown as string[],
        chosen: (body.chosen as string | null) ?? null,
      });
      return json(200, { ok: true });
    }
    if (path.startsWith("/replay/")) {
      const recordId = decodeURIComponent(path.slice("/replay/".length));
      if (this.ephemeralIds.has(recordId)) {
        return json(410, { error: "ephemeral record" });
      }
      const record = this.durable.find((r) => r.record_id === recordId);
      if (!record) return json(404, { error: `unknown record '${recordId}'` });
      if (!record.action_id) return json(400, { error: "text-only record" });
      return json(200, {
        record_id: record.record_id,
        action_id: record.action_id,
        micronarrative: record.micronarrative ?? null,
        timestamp: record.timestamp,
      });
    }
    return json(404, { error: `no such route ${path}` });
  };
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
