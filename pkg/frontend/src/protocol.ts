// Wire schema for the dyadchat gateway. Everything here mirrors the
// server's envelope protocol; the client adds nothing of its own.

export interface Envelope {
  event: string;
  request_id: string;
  payload: Record<string, unknown>;
  server_ts?: number;
}

export interface Micronarrative {
  text: string;
  action_id: string;
  story_version?: number | null;
  tags_used?: string[];
  generated_by: string;
  edited: boolean;
}

export interface ExchangeRecord {
  record_id: string;
  conversation_id: string;
  sender_id: string;
  kind: string;
  timestamp: number;
  text?: string;
  action_id?: string;
  micronarrative?: Micronarrative;
  paired_with?: string;
}

export interface ScoredAction {
  action_id: string;
  s_text: number;
  s_ctx: number;
  preference: number;
  noise: number;
  total: number;
}

export interface PuppetActionPayload {
  action_id: string;
  persist: boolean;
  micronarrative?: Micronarrative;
  paired_with?: string;
  recommendation_ref?: string[];
  [key: string]: unknown;
}

export interface Contact {
  peer_id: string;
  relationship_icon: string;
}

export const RELATIONSHIP_ICONS = ["friend", "family", "partner"] as const;

// The one transient record kind; everything else is durable and belongs
// in the history view.
export function isDurable(record: ExchangeRecord): boolean {
  return record.kind !== "action_only_status";
}

export function recordOf(frame: Envelope): ExchangeRecord | null {
  const record = frame.payload["record"];
  if (record && typeof record === "object" && "record_id" in record) {
    return record as unknown as ExchangeRecord;
  }
  return null;
}
