import type { Contact, ExchangeRecord, Micronarrative, ScoredAction } from "./protocol";
import type { TagChoices } from "./composer";

export type FetchFn = typeof fetch;

export interface ReplayPayload {
  record_id: string;
  action_id: string;
  micronarrative: Micronarrative | null;
  timestamp: number;
}

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

/** Thin wrapper over the gateway's HTTP routes. */
export class HttpApi {
  private readonly baseUrl: string;
  private readonly token: string;
  private readonly fetchFn: FetchFn;

  constructor(baseUrl: string, token: string, fetchFn?: FetchFn) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.token = token;
    this.fetchFn = fetchFn ?? fetch.bind(globalThis);
  }

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: { Authorization: `Bearer ${this.token}` },
    };
    if (body !== undefined) {
      init.headers = { ...init.headers, "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const text = await response.text();
    if (!response.ok) {
      throw new ApiError(response.status, text || `${method} ${path} failed`);
    }
    return JSON.parse(text) as T;
  }

  async history(conversationId: string, pageSize = 200): Promise<ExchangeRecord[]> {
    const data = await this.call<{ records: ExchangeRecord[] }>(
      "GET",
      `/history/${conversationId}?page_size=${pageSize}`,
    );
    return data.records;
  }

  async contacts(): Promise<Contact[]> {
    const data = await this.call<{ contacts: Contact[] }>("GET", "/contacts");
    return data.contacts;
  }

  async setContact(peerId: string, icon: string): Promise<void> {
    await this.call("POST", "/contacts", { peer_id: peerId, relationship_icon: icon });
  }

  async openConversation(peerId: string): Promise<string> {
    const data = await this.call<{ conversation_id: string }>("POST", "/conversations", {
      peer_id: peerId,
    });
    return data.conversation_id;
  }

  async recommend(conversationId: string, draft: string | null): Promise<ScoredAction[]> {
    const data = await this.call<{ actions: ScoredAction[] }>("POST", "/recommend", {
      conversation_id: conversationId,
      draft_text: draft,
    });
    return data.actions;
  }

  async reportOutcome(
    shown: string[],
    chosen: string | null,
    hidden?: string | null,
  ): Promise<void> {
    await this.call("POST", "/recommend/outcome", { shown, chosen, hidden: hidden ?? null });
  }

  async narrate(
    actionId: string,
    conversationId: string,
    tags: string[],
  ): Promise<Micronarrative> {
    const data = await this.call<{ micronarrative: Micronarrative }>("POST", "/narrate", {
      action_id: actionId,
      conversation_id: conversationId,
      tags,
    });
    return data.micronarrative;
  }

  async tags(): Promise<TagChoices & { selected: string[] }> {
    return this.call("GET", "/tags");
  }

  async replay(recordId: string): Promise<ReplayPayload> {
    return this.call("GET", `/replay/${recordId}`);
  }
}
