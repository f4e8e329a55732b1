import type { ExchangeRecord } from "./protocol";
import { isDurable } from "./protocol";
import { animationFor } from "./animations";

/**
 * The durable conversation thread. Transient action-only statuses never
 * land here: they exist solely on the live stage. Tapping an action
 * entry asks the app to replay it.
 */
export class HistoryView {
  readonly root: HTMLElement;
  private readonly onTap: (record: ExchangeRecord) => void;
  private readonly selfId: string;

  constructor(root: HTMLElement, selfId: string, onTap: (record: ExchangeRecord) => void) {
    this.root = root;
    this.root.classList.add("history");
    this.selfId = selfId;
    this.onTap = onTap;
  }

  setRecords(records: ExchangeRecord[]): void {
    this.root.replaceChildren();
    for (const record of records) this.append(record);
  }

  append(record: ExchangeRecord): void {
    if (!isDurable(record)) return;
    if (this.root.querySelector(`[data-record-id="${record.record_id}"]`)) return;
    const entry = document.createElement("div");
    entry.className = `history-entry kind-${record.kind}`;
    entry.dataset.recordId = record.record_id;
    entry.dataset.sender = record.sender_id === this.selfId ? "self" : "partner";

    if (record.kind === "text") {
      const bubble = document.createElement("p");
      bubble.className = "bubble";
      bubble.textContent = record.text ?? "";
      entry.append(bubble);
    } else if (record.action_id) {
      const { animation } = animationFor(record.action_id);
      const badge = document.createElement("span");
      badge.className = "action-badge";
      badge.textContent = `${animation.emoji} ${record.action_id.replace(/-/g, " ")}`;
      entry.append(badge);
      if (record.micronarrative) {
        const caption = document.createElement("p");
        caption.className = "caption";
        caption.textContent = record.micronarrative.text;
        if (record.micronarrative.edited) caption.dataset.edited = "true";
        entry.append(caption);
      }
      entry.classList.add("replayable");
      entry.addEventListener("click", () => this.onTap(record));
    }
    this.root.append(entry);
  }

  recordIds(): string[] {
    return Array.from(this.root.children).map(
      (child) => (child as HTMLElement).dataset.recordId ?? "",
    );
  }
}
