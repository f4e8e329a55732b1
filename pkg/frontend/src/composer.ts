import type { Envelope, Micronarrative, PuppetActionPayload, ScoredAction } from "./protocol";
import { RecommendationStrip } from "./strip";

export interface TagChoices {
  likes_dislikes: string[];
  habits: string[];
  social_style: string[];
  emotion: string[];
}

export const TAG_CATEGORIES: Array<keyof TagChoices> = [
  "likes_dislikes",
  "habits",
  "social_style",
  "emotion",
];

export interface ComposerState {
  draftText: string;
  selectedAction: string | null;
  caption: string;
  proposedCaption: string;
  captionEdited: boolean;
  selectedTags: string[];
  persist: boolean;
}

export interface ComposerDeps {
  requestRecommendations(draft: string): Promise<ScoredAction[]>;
  requestCaption(actionId: string, tags: string[]): Promise<Micronarrative>;
  emit(payload: PuppetActionPayload): Promise<Envelope>;
  reportOutcome(shown: string[], chosen: string | null): void;
}

/**
 * The message composer: draft box, four-slot strip, caption editor with
 * the tag panel, and the two send paths. "Action Only" ships the bare
 * action ephemerally; "Send" ships it durably with the caption, which
 * carries edited=true whenever the user changed the proposed text.
 */
export class Composer {
  readonly root: HTMLElement;
  readonly strip: RecommendationStrip;
  readonly state: ComposerState = {
    draftText: "",
    selectedAction: null,
    caption: "",
    proposedCaption: "",
    captionEdited: false,
    selectedTags: [],
    persist: false,
  };

  private readonly deps: ComposerDeps;
  private readonly draftBox: HTMLTextAreaElement;
  private readonly captionBox: HTMLTextAreaElement;
  private readonly tagPanel: HTMLElement;
  private readonly customTagInput: HTMLInputElement;
  private readonly regenerateButton: HTMLButtonElement;
  private readonly actionOnlyButton: HTMLButtonElement;
  private readonly sendButton: HTMLButtonElement;
  private proposalMeta: Pick<Micronarrative, "generated_by" | "story_version" | "tags_used"> = {
    generated_by: "offline_template",
    story_version: null,
    tags_used: [],
  };

  constructor(root: HTMLElement, deps: ComposerDeps) {
    this.root = root;
    this.deps = deps;
    this.root.classList.add("composer");

    this.draftBox = document.createElement("textarea");
    this.draftBox.className = "draft-box";
    this.draftBox.placeholder = "Write a message...";
    this.draftBox.addEventListener("input", () => {
      this.state.draftText = this.draftBox.value;
    });

    const stripRoot = document.createElement("div");
    this.strip = new RecommendationStrip(stripRoot, (actionId) => {
      void this.pickAction(actionId);
    });

    this.captionBox = document.createElement("textarea");
    this.captionBox.className = "caption-box";
    this.captionBox.placeholder = "Caption appears here once you pick an action";
    this.captionBox.addEventListener("input", () => this.editCaption(this.captionBox.value));

    this.tagPanel = document.createElement("div");
    this.tagPanel.className = "tag-panel";
    this.customTagInput = document.createElement("input");
    this.customTagInput.className = "custom-tag";
    this.customTagInput.placeholder = "custom tag";

    this.regenerateButton = document.createElement("button");
    this.regenerateButton.type = "button";
    this.regenerateButton.className = "regenerate";
    this.regenerateButton.textContent = "Use tags to regenerate";
    this.regenerateButton.addEventListener("click", () => {
      void this.regenerate();
    });

    this.actionOnlyButton = document.createElement("button");
    this.actionOnlyButton.type = "button";
    this.actionOnlyButton.className = "action-only";
    this.actionOnlyButton.textContent = "Action Only";
    this.actionOnlyButton.addEventListener("click", () => {
      void this.actionOnly();
    });

    this.sendButton = document.createElement("button");
    this.sendButton.type = "button";
    this.sendButton.className = "send";
    this.sendButton.textContent = "Send";
    this.sendButton.addEventListener("click", () => {
      void this.send();
    });

    this.root.append(
      this.draftBox,
      stripRoot,
      this.captionBox,
      this.tagPanel,
      this.customTagInput,
      this.regenerateButton,
      this.actionOnlyButton,
      this.sendButton,
    );
    this.sync();
  }

  async refreshRecommendations(): Promise<void> {
    const actions = await this.deps.requestRecommendations(this.state.draftText);
    this.strip.render(actions);
    this.state.selectedAction = null;
    this.sync();
  }

  setDraft(text: string): void {
    this.state.draftText = text;
    this.draftBox.value = text;
  }

  setTagChoices(choices: TagChoices): void {
    this.tagPanel.replaceChildren();
    for (const category of TAG_CATEGORIES) {
      const group = document.createElement("div");
      group.className = "tag-group";
      group.dataset.category = category;
      for (const tag of choices[category]) {
        group.append(this.tagButton(tag));
      }
      this.tagPanel.append(group);
    }
  }

  addCustomTag(tag?: string): void {
    const value = (tag ?? this.customTagInput.value).trim();
    if (!value) return;
    let custom = this.tagPanel.querySelector<HTMLElement>(".tag-group[data-category='custom']");
    if (!custom) {
      custom = document.createElement("div");
      custom.className = "tag-group";
      custom.dataset.category = "custom";
      this.tagPanel.append(custom);
    }
    const button = this.tagButton(value);
    custom.append(button);
    this.customTagInput.value = "";
    button.click();
  }

  private tagButton(tag: string): HTMLButtonElement {
    const button = document.createElement("button");
    button.type = "button";
    button.className = "tag";
    button.dataset.tag = tag;
    button.textContent = tag;
    button.addEventListener("click", () => {
      const at = this.state.selectedTags.indexOf(tag);
      if (at >= 0) this.state.selectedTags.splice(at, 1);
      else this.state.selectedTags.push(tag);
      button.classList.toggle("selected", at < 0);
    });
    return button;
  }

  async pickAction(actionId: string): Promise<void> {
    this.state.selectedAction = actionId;
    this.sync();
    const proposal = await this.deps.requestCaption(actionId, [...this.state.selectedTags]);
    this.applyProposal(proposal);
  }

  /** Re-caption the selected action with the current tag selection. */
  async regenerate(): Promise<void> {
    if (!this.state.selectedAction) return;
    const proposal = await this.deps.requestCaption(this.state.selectedAction, [
      ...this.state.selectedTags,
    ]);
    this.applyProposal(proposal);
  }

  private applyProposal(proposal: Micronarrative): void {
    this.state.proposedCaption = proposal.text;
    this.state.caption = proposal.text;
    this.state.captionEdited = false;
    this.proposalMeta = {
      generated_by: proposal.generated_by,
      story_version: proposal.story_version ?? null,
      tags_used: proposal.tags_used ?? [],
    };
    this.captionBox.value = proposal.text;
    this.sync();
  }

  editCaption(text: string): void {
    this.state.caption = text;
    this.state.captionEdited = text !== this.state.proposedCaption;
    if (this.captionBox.value !== text) this.captionBox.value = text;
    this.sync();
  }

  /** Ephemeral path: the bare action, never with a caption. */
  async actionOnly(): Promise<Envelope> {
    const actionId = this.requireAction();
    this.state.persist = false;
    const payload: PuppetActionPayload = {
      action_id: actionId,
      persist: false,
      recommendation_ref: this.strip.shownIds,
    };
    const ack = await this.deps.emit(payload);
    this.deps.reportOutcome(this.strip.shownIds, actionId);
    this.resetSelection();
    return ack;
  }

  /** Durable path: action plus the (possibly edited) caption. */
  async send(): Promise<Envelope> {
    const actionId = this.requireAction();
    if (!this.state.caption.trim()) {
      throw new Error("Send needs a caption; use Action Only for a bare action");
    }
    this.state.persist = true;
    const micronarrative: Micronarrative = {
      text: this.state.caption,
      action_id: actionId,
      edited: this.state.captionEdited,
      generated_by: this.state.captionEdited ? "user_edit" : this.proposalMeta.generated_by,
      story_version: this.proposalMeta.story_version,
      tags_used: this.proposalMeta.tags_used,
    };
    const payload: PuppetActionPayload = {
      action_id: actionId,
      persist: true,
      micronarrative,
      recommendation_ref: this.strip.shownIds,
    };
    const ack = await this.deps.emit(payload);
    this.deps.reportOutcome(this.strip.shownIds, actionId);
    this.resetSelection();
    this.setDraft("");
    return ack;
  }

  get sendEnabled(): boolean {
    return !this.sendButton.disabled;
  }

  get actionOnlyEnabled(): boolean {
    return !this.actionOnlyButton.disabled;
  }

  private requireAction(): string {
    if (!this.state.selectedAction) {
      throw new Error("pick an action first");
    }
    return this.state.selectedAction;
  }

  private resetSelection(): void {
    this.state.selectedAction = null;
    this.state.caption = "";
    this.state.proposedCaption = "";
    this.state.captionEdited = false;
    this.captionBox.value = "";
    this.strip.clear();
    this.sync();
  }

  private sync(): void {
    const hasAction = this.state.selectedAction !== null;
    this.sendButton.disabled = !hasAction;
    this.actionOnlyButton.disabled = !hasAction;
    this.regenerateButton.disabled = !hasAction;
  }
}
