import type { Envelope, ExchangeRecord, ScoredAction } from "./protocol";
import { recordOf } from "./protocol";
import { HttpApi, type FetchFn } from "./api";
import { GatewayConnection, type SocketLike } from "./connection";
import { PuppetStage, type Side } from "./stage";
import { Composer } from "./composer";
import { HistoryView } from "./history";
import { ContactPanel } from "./contacts";

export interface AppConfig {
  baseUrl: string;
  wsUrl?: string;
  token: string;
  userId: string;
  conversationId: string;
  socketFactory?: (url: string) => SocketLike;
  fetchFn?: FetchFn;
  onConversationChange?: (conversationId: string) => void;
}

/**
 * Wires the panels together around one ordered event stream. Every
 * server frame flows through handleFrame in arrival order; nothing else
 * mutates the stage or the history, so what the user sees always
 * matches the durable record.
 */
export class ChatApp {
  readonly stage: PuppetStage;
  readonly composer: Composer;
  readonly history: HistoryView;
  readonly contacts: ContactPanel;
  readonly connection: GatewayConnection;
  readonly api: HttpApi;
  readonly presence: HTMLElement;

  private readonly config: AppConfig;
  private readonly recentActions = new Map<string, { action_id: string; sender_id: string }>();
  private readonly recommendResponses = new Map<string, ScoredAction[]>();

  constructor(root: HTMLElement, config: AppConfig) {
    this.config = config;
    this.api = new HttpApi(config.baseUrl, config.token, config.fetchFn);
    const wsUrl = config.wsUrl ?? config.baseUrl.replace(/^http/, "ws") + "/ws";
    this.connection = new GatewayConnection({
      url: wsUrl,
      token: config.token,
      conversationId: config.conversationId,
      socketFactory: config.socketFactory,
    });

    root.classList.add("layout");
    const contactsRoot = document.createElement("aside");
    const main = document.createElement("div");
    main.className = "main";
    this.presence = document.createElement("div");
    this.presence.className = "presence";
    const stageRoot = document.createElement("div");
    const historyRoot = document.createElement("div");
    const composerRoot = document.createElement("div");
    const textSend = document.createElement("button");
    textSend.type = "button";
    textSend.className = "send-text";
    textSend.textContent = "Send text";
    textSend.addEventListener("click", () => {
      void this.sendText();
    });
    main.append(this.presence, stageRoot, historyRoot, composerRoot, textSend);
    root.append(contactsRoot, main);

    this.stage = new PuppetStage(stageRoot);
    this.history = new HistoryView(historyRoot, config.userId, (record) => {
      void this.replayRecord(record);
    });
    this.composer = new Composer(composerRoot, {
      requestRecommendations: (draft) => this.requestRecommendations(draft),
      requestCaption: (actionId, tags) =>
        this.api.narrate(actionId, config.conversationId, tags),
      emit: (payload) => this.connection.request("puppet-action", payload),
      reportOutcome: (shown, chosen) => {
        void this.api.reportOutcome(shown, chosen).catch(() => undefined);
      },
    });
    this.contacts = new ContactPanel(contactsRoot, {
      setIcon: (peer, icon) => this.api.setContact(peer, icon),
      openConversation: (peer) => {
        void this.api.openConversation(peer).then((id) => {
          this.config.onConversationChange?.(id);
        });
      },
      saveStory: async (text) => {
        const ack = await this.connection.request("emn-update", { story: text });
        await this.refreshTags();
        return Number(ack.payload["story_version"]);
      },
    });

    this.connection.onFrame((frame) => this.handleFrame(frame));
  }

  async start(): Promise<void> {
    this.connection.connect();
    const [records, contacts] = await Promise.all([
      this.api.history(this.config.conversationId),
      this.api.contacts(),
    ]);
    this.history.setRecords(records);
    this.contacts.setContacts(contacts);
    await this.refreshTags();
  }

  private async refreshTags(): Promise<void> {
    const tags = await this.api.tags();
    this.composer.setTagChoices(tags);
  }

  private async requestRecommendations(draft: string): Promise<ScoredAction[]> {
    const ack = await this.connection.request("recommend-request", {
      draft_text: draft || null,
    });
    const actions = this.recommendResponses.get(ack.request_id) ?? [];
    this.recommendResponses.delete(ack.request_id);
    return actions;
  }

  async sendText(): Promise<void> {
    const text = this.composer.state.draftText.trim();
    if (!text) return;
    await this.connection.request("chat-message", { text });
    this.composer.setDraft("");
  }

  async replayRecord(record: ExchangeRecord): Promise<void> {
    const payload = await this.api.replay(record.record_id);
    const side: Side = record.sender_id === this.config.userId ? "self" : "partner";
    this.stage.play(side, payload.action_id);
  }

  handleFrame(frame: Envelope): void {
    if (frame.event === "recommend-response") {
      this.recommendResponses.set(
        frame.request_id,
        (frame.payload["actions"] as ScoredAction[]) ?? [],
      );
      return;
    }
    if (frame.event === "exchange-status") {
      const who = String(frame.payload["user_id"] ?? "");
      const status = String(frame.payload["status"] ?? "");
      if (who && who !== this.config.userId) {
        this.presence.textContent = `${who} ${status}`;
        this.presence.dataset.partnerStatus = status;
      }
      return;
    }
    if (frame.event === "emn-update") {
      const story = frame.payload["story"];
      const version = frame.payload["story_version"];
      if (typeof story === "string" && typeof version === "number") {
        this.contacts.setStory(story, version);
      }
      return;
    }
    const record = recordOf(frame);
    if (!record) return;
    if (frame.event === "puppet-action" && record.action_id) {
      this.playIncoming(record);
    }
    this.history.append(record);
  }

  private playIncoming(record: ExchangeRecord): void {
    const actionId = record.action_id as string;
    const side: Side = record.sender_id === this.config.userId ? "self" : "partner";
    const paired = record.paired_with ? this.recentActions.get(record.paired_with) : undefined;
    if (paired && paired.sender_id !== record.sender_id) {
      if (side === "self") this.stage.playExchange(paired.action_id, actionId);
      else this.stage.playExchange(actionId, paired.action_id);
    } else {
      this.stage.play(side, actionId);
    }
    this.recentActions.set(record.record_id, {
      action_id: actionId,
      sender_id: record.sender_id,
    });
    if (this.recentActions.size > 64) {
      const oldest = this.recentActions.keys().next().value;
      if (oldest !== undefined) this.recentActions.delete(oldest);
    }
  }
}
