import type { Envelope } from "./protocol";
import { recordOf } from "./protocol";

// Minimal surface shared by the browser WebSocket and the test fake.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
}

export interface ConnectionOptions {
  url: string;
  token: string;
  conversationId: string;
  socketFactory?: (url: string) => SocketLike;
  reconnectDelayMs?: number;
  maxReconnects?: number;
}

interface PendingRequest {
  frame: Envelope;
  resolve: (frame: Envelope) => void;
  reject: (error: Error) => void;
}

export class RequestRejected extends Error {
  readonly code: string;

  constructor(code: string, message: string) {
    super(message);
    this.code = code;
  }
}

/**
 * One authenticated websocket session. Requests are fire-and-acknowledge:
 * every outgoing frame keeps its request_id until the server's ack or
 * error arrives, and a reconnect resends whatever is still unanswered
 * under the same ids, so retries are idempotent server-side. Incoming
 * record ids feed the auth frame's last_seen on reconnect, which makes
 * the server replay anything missed while offline.
 */
export class GatewayConnection {
  private readonly options: Required<Pick<ConnectionOptions, "url" | "token" | "conversationId">> &
    ConnectionOptions;
  private readonly makeSocket: (url: string) => SocketLike;
  private socket: SocketLike | null = null;
  private readonly pending = new Map<string, PendingRequest>();
  private readonly listeners: Array<(frame: Envelope) => void> = [];
  private counter = 0;
  private authed = false;
  private closedByUser = false;
  private reconnects = 0;
  private lastSeen: string | null = null;

  constructor(options: ConnectionOptions) {
    this.options = options;
    this.makeSocket =
      options.socketFactory ?? ((url: string) => new WebSocket(url) as unknown as SocketLike);
  }

  connect(): void {
    this.closedByUser = false;
    const socket = this.makeSocket(this.options.url);
    this.socket = socket;
    socket.onopen = () => this.authenticate();
    socket.onmessage = (event) => this.dispatch(JSON.parse(event.data) as Envelope);
    socket.onclose = () => this.handleClose();
  }

  close(): void {
    this.closedByUser = true;
    this.socket?.close();
    this.socket = null;
  }

  get isAuthed(): boolean {
    return this.authed;
  }

  /** Subscribe to server-initiated frames, in arrival order. */
  onFrame(listener: (frame: Envelope) => void): () => void {
    this.listeners.push(listener);
    return () => {
      const at = this.listeners.indexOf(listener);
      if (at >= 0) this.listeners.splice(at, 1);
    };
  }

  request(event: string, payload: Record<string, unknown>): Promise<Envelope> {
    this.counter += 1;
    const frame: Envelope = { event, request_id: `c-${this.counter}`, payload };
    return new Promise((resolve, reject) => {
      this.pending.set(frame.request_id, { frame, resolve, reject });
      if (this.authed && this.socket) {
        this.socket.send(JSON.stringify(frame));
      }
      // Not authed yet: the frame stays pending and flushes after the
      // auth ack, or after the next reconnect.
    });
  }

  private authenticate(): void {
    if (!this.socket) return;
    this.counter += 1;
    const payload: Record<string, unknown> = {
      token: this.options.token,
      conversation_id: this.options.conversationId,
    };
    if (this.lastSeen !== null) payload.last_seen = this.lastSeen;
    this.socket.send(
      JSON.stringify({ event: "auth", request_id: `auth-${this.counter}`, payload }),
    );
  }

  private dispatch(frame: Envelope): void {
    if (frame.event === "ack" && frame.request_id.startsWith("auth-")) {
      this.authed = true;
      this.reconnects = 0;
      this.flushPending();
      return;
    }
    if (frame.event === "ack" || frame.event === "error") {
      const waiting = this.pending.get(frame.request_id);
      if (waiting) {
        this.pending.delete(frame.request_id);
        if (frame.event === "ack") {
          waiting.resolve(frame);
        } else {
          const payload = frame.payload as { code?: string; message?: string };
          waiting.reject(
            new RequestRejected(payload.code ?? "error", payload.message ?? "request rejected"),
          );
        }
        return;
      }
      if (frame.event === "error" && !this.authed) {
        // Auth itself was refused; surface to listeners, stop retrying.
        this.closedByUser = true;
      }
    }
    const record = recordOf(frame);
    if (record && record.kind !== "action_only_status") {
      this.lastSeen = record.record_id;
    }
    for (const listener of [...this.listeners]) listener(frame);
  }

  private flushPending(): void {
    if (!this.socket) return;
    for (const { frame } of this.pending.values()) {
      this.socket.send(JSON.stringify(frame));
    }
  }

  private handleClose(): void {
    this.authed = false;
    this.socket = null;
    if (this.closedByUser) return;
    const limit = this.options.maxReconnects ?? 10;
    if (this.reconnects >= limit) return;
    this.reconnects += 1;
    const delay = this.options.reconnectDelayMs ?? 1000;
    setTimeout(() => {
      if (!this.closedByUser) this.connect();
    }, delay * this.reconnects);
  }
}
