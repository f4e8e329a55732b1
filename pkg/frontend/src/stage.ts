import { animationFor } from "./animations";

export type Side = "partner" | "self";

interface PuppetSlot {
  element: HTMLElement;
  label: HTMLElement;
  figure: HTMLElement;
  restTimer: ReturnType<typeof setTimeout> | null;
}

/**
 * Two puppets side by side: partner on the left, self on the right.
 * Idle puppets sit in a resting pose; play() runs one placeholder
 * animation and drops back to rest. Reciprocal moves render as a
 * co-present exchange with both puppets up at once.
 */
export class PuppetStage {
  readonly root: HTMLElement;
  private readonly slots: Record<Side, PuppetSlot>;

  constructor(root: HTMLElement) {
    this.root = root;
    this.root.classList.add("stage");
    this.slots = {
      partner: this.buildSlot("partner"),
      self: this.buildSlot("self"),
    };
  }

  private buildSlot(side: Side): PuppetSlot {
    const element = document.createElement("div");
    element.className = `puppet puppet-${side}`;
    element.dataset.side = side;
    element.dataset.state = "resting";
    const figure = document.createElement("div");
    figure.className = "puppet-figure";
    figure.textContent = side === "partner" ? "🧑" : "🧑";
    const label = document.createElement("div");
    label.className = "puppet-label";
    label.textContent = "resting";
    element.append(figure, label);
    this.root.append(element);
    return { element, label, figure, restTimer: null };
  }

  stateOf(side: Side): { state: string; action: string } {
    const slot = this.slots[side];
    return { state: slot.element.dataset.state ?? "", action: slot.element.dataset.action ?? "" };
  }

  play(side: Side, actionId: string): void {
    const slot = this.slots[side];
    const { animation, generic } = animationFor(actionId);
    if (slot.restTimer !== null) clearTimeout(slot.restTimer);
    slot.element.dataset.state = "acting";
    slot.element.dataset.action = actionId;
    slot.element.dataset.animation = generic ? "generic" : actionId;
    slot.label.textContent = actionId.replace(/-/g, " ");
    slot.figure.textContent = animation.emoji;
    const el = slot.figure as HTMLElement & { animate?: Element["animate"] };
    if (typeof el.animate === "function") {
      el.animate(animation.keyframes, animation.options);
    }
    const duration = Number(animation.options.duration ?? 900);
    slot.restTimer = setTimeout(() => this.rest(side), duration);
  }

  /** Render a completed reciprocal pair: both puppets act together. */
  playExchange(partnerActionId: string, selfActionId: string): void {
    this.root.dataset.exchange = "co-present";
    this.play("partner", partnerActionId);
    this.play("self", selfActionId);
  }

  rest(side: Side): void {
    const slot = this.slots[side];
    if (slot.restTimer !== null) {
      clearTimeout(slot.restTimer);
      slot.restTimer = null;
    }
    slot.element.dataset.state = "resting";
    delete slot.element.dataset.action;
    delete slot.element.dataset.animation;
    slot.label.textContent = "resting";
    slot.figure.textContent = "🧑";
    if (
      this.slots.partner.element.dataset.state === "resting" &&
      this.slots.self.element.dataset.state === "resting"
    ) {
      delete this.root.dataset.exchange;
    }
  }
}
