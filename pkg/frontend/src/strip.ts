import type { ScoredAction } from "./protocol";
import { animationFor } from "./animations";

/**
 * The recommendation strip. Renders exactly what the server returned,
 * in the server's order: no client-side reordering, padding, or
 * truncation.
 */
export class RecommendationStrip {
  readonly root: HTMLElement;
  private readonly onPick: (actionId: string) => void;
  private shown: string[] = [];
  private selectedId: string | null = null;

  constructor(root: HTMLElement, onPick: (actionId: string) => void) {
    this.root = root;
    this.root.classList.add("strip");
    this.onPick = onPick;
  }

  render(actions: ScoredAction[]): void {
    this.root.replaceChildren();
    this.shown = actions.map((a) => a.action_id);
    this.selectedId = null;
    actions.forEach((action, index) => {
      const button = document.createElement("button");
      button.type = "button";
      button.className = "strip-slot";
      button.dataset.actionId = action.action_id;
      button.dataset.rank = String(index);
      const { animation } = animationFor(action.action_id);
      button.textContent = `${animation.emoji} ${action.action_id.replace(/-/g, " ")}`;
      button.addEventListener("click", () => this.select(action.action_id));
      this.root.append(button);
    });
  }

  private select(actionId: string): void {
    this.selectedId = actionId;
    for (const child of Array.from(this.root.children)) {
      const button = child as HTMLElement;
      button.classList.toggle("selected", button.dataset.actionId === actionId);
    }
    this.onPick(actionId);
  }

  get shownIds(): string[] {
    return [...this.shown];
  }

  get selected(): string | null {
    return this.selectedId;
  }

  clear(): void {
    this.root.replaceChildren();
    this.shown = [];
    this.selectedId = null;
  }
}
