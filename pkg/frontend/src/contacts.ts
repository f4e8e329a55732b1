import type { Contact } from "./protocol";
import { RELATIONSHIP_ICONS } from "./protocol";

const ICON_GLYPHS: Record<string, string> = {
  friend: "🤝",
  family: "🏠",
  partner: "💞",
};

export interface ContactPanelDeps {
  setIcon(peerId: string, icon: string): Promise<void>;
  openConversation(peerId: string): void;
  saveStory(text: string): Promise<number>;
}

/**
 * Left-hand panel: contacts with their relationship icons plus the
 * user's own story box. The story is per user, not per conversation,
 * and story updates arriving from the user's other sessions land here.
 */
export class ContactPanel {
  readonly root: HTMLElement;
  private readonly deps: ContactPanelDeps;
  private readonly list: HTMLElement;
  private readonly storyBox: HTMLTextAreaElement;
  private readonly storyStatus: HTMLElement;

  constructor(root: HTMLElement, deps: ContactPanelDeps) {
    this.root = root;
    this.deps = deps;
    this.root.classList.add("contacts");

    this.list = document.createElement("div");
    this.list.className = "contact-list";

    this.storyBox = document.createElement("textarea");
    this.storyBox.className = "story-box";
    this.storyBox.placeholder = "Tell your puppet about yourself...";

    const saveButton = document.createElement("button");
    saveButton.type = "button";
    saveButton.className = "save-story";
    saveButton.textContent = "Save story";
    saveButton.addEventListener("click", () => {
      void this.deps
        .saveStory(this.storyBox.value)
        .then((version) => this.showStoryVersion(version));
    });

    this.storyStatus = document.createElement("span");
    this.storyStatus.className = "story-status";

    this.root.append(this.list, this.storyBox, saveButton, this.storyStatus);
  }

  setContacts(contacts: Contact[]): void {
    this.list.replaceChildren();
    for (const contact of contacts) {
      const row = document.createElement("div");
      row.className = "contact";
      row.dataset.peerId = contact.peer_id;

      const open = document.createElement("button");
      open.type = "button";
      open.className = "contact-name";
      open.textContent = contact.peer_id;
      open.addEventListener("click", () => this.deps.openConversation(contact.peer_id));

      const icon = document.createElement("select");
      icon.className = "icon-select";
      for (const name of RELATIONSHIP_ICONS) {
        const option = document.createElement("option");
        option.value = name;
        option.textContent = `${ICON_GLYPHS[name] ?? ""} ${name}`;
        icon.append(option);
      }
      const custom = document.createElement("option");
      custom.value = "custom";
      custom.textContent = "custom...";
      icon.append(custom);
      if (contact.relationship_icon.startsWith("custom:")) {
        custom.value = contact.relationship_icon;
        custom.textContent = contact.relationship_icon.slice("custom:".length);
      }
      icon.value = contact.relationship_icon;
      icon.addEventListener("change", () => {
        let next = icon.value;
        if (next === "custom") {
          const token = window.prompt("Name this relationship:") ?? "";
          if (!token.trim()) return;
          next = `custom:${token.trim()}`;
        }
        void this.deps.setIcon(contact.peer_id, next);
      });

      row.append(icon, open);
      this.list.append(row);
    }
  }

  /** Sync the story box from another of this user's sessions. */
  setStory(text: string, version: number): void {
    this.storyBox.value = text;
    this.showStoryVersion(version);
  }

  get storyText(): string {
    return this.storyBox.value;
  }

  private showStoryVersion(version: number): void {
    this.storyStatus.textContent = `story v${version}`;
    this.storyStatus.dataset.version = String(version);
  }
}
