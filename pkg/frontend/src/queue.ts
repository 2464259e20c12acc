/** Annotation queue: one card per pending task.
 *
 * Submissions are optimistic: the card leaves the list immediately and comes
 * back if the service rejects the write. A 409 is final (another annotator
 * won the index) and the card instead shows the committed label. Class
 * buttons are rendered straight from GET /classes, and digits 1..9/0 label
 * the focused card.
 */

import { ApiError, ServiceClient } from "./api.js";
import type { ClassOption, Task } from "./types.js";

export interface QueueOptions {
  pageSize?: number;
  /** Called after any change that other views may care about. */
  onChange?: () => void;
}

interface CardState {
  task: Task;
  status: "pending" | "conflict";
  committedClass?: number;
}

export class AnnotationQueue {
  readonly root: HTMLElement;
  private readonly client: ServiceClient;
  private readonly pageSize: number;
  private readonly onChange: () => void;
  private cards: CardState[] = [];
  private classes: ClassOption[] = [];
  private page = 0;
  private banner: string | null = null;

  constructor(client: ServiceClient, root: HTMLElement, options: QueueOptions = {}) {
    this.client = client;
    this.root = root;
    this.pageSize = options.pageSize ?? 25;
    this.onChange = options.onChange ?? (() => {});
  }

  /** Pull classes and pending tasks from the service and re-render. */
  async refresh(): Promise<void> {
    try {
      const [classes, tasks] = await Promise.all([
        this.client.getClasses(),
        this.client.getTasks(),
      ]);
      this.classes = classes;
      // conflict notices stick around until dismissed; everything else is
      // rebuilt from the service's pending list
      const conflicts = this.cards.filter((c) => c.status === "conflict");
      const pending = tasks
        .filter((t) => !conflicts.some((c) => c.task.sample_index === t.sample_index))
        .map((task) => ({ task, status: "pending" as const }));
      this.cards = [...pending, ...conflicts];
      this.banner = null;
    } catch {
      this.banner = "Cannot reach the annotation service — retry";
    }
    this.render();
  }

  pendingCount(): number {
    return this.cards.filter((c) => c.status === "pending").length;
  }

  render(): void {
    this.root.textContent = "";
    this.root.classList.add("annotation-queue");

    if (this.banner) {
      const banner = document.createElement("div");
      banner.className = "banner banner-error";
      banner.textContent = this.banner;
      const retry = document.createElement("button");
      retry.textContent = "Retry";
      retry.addEventListener("click", () => void this.refresh());
      banner.appendChild(retry);
      this.root.appendChild(banner);
    }

    const pageCount = Math.max(1, Math.ceil(this.cards.length / this.pageSize));
    this.page = Math.min(this.page, pageCount - 1);
    const start = this.page * this.pageSize;
    const visible = this.cards.slice(start, start + this.pageSize);

    const list = document.createElement("div");
    list.className = "card-list";
    for (const card of visible) {
      list.appendChild(this.renderCard(card));
    }
    this.root.appendChild(list);

    if (pageCount > 1) {
      this.root.appendChild(this.renderPager(pageCount));
    }
  }

  private renderPager(pageCount: number): HTMLElement {
    const pager = document.createElement("div");
    pager.className = "pager";
    const prev = document.createElement("button");
    prev.textContent = "Prev";
    prev.disabled = this.page === 0;
    prev.addEventListener("click", () => {
      this.page -= 1;
      this.render();
    });
    const label = document.createElement("span");
    label.textContent = `page ${this.page + 1} / ${pageCount}`;
    const next = document.createElement("button");
    next.textContent = "Next";
    next.disabled = this.page >= pageCount - 1;
    next.addEventListener("click", () => {
      this.page += 1;
      this.render();
    });
    pager.append(prev, label, next);
    return pager;
  }

  private renderCard(card: CardState): HTMLElement {
    const element = document.createElement("article");
    element.className = "task-card";
    element.dataset.sampleIndex = String(card.task.sample_index);
    element.tabIndex = 0;

    const header = document.createElement("header");
    const title = document.createElement("strong");
    title.textContent = `#${card.task.sample_index}`;
    header.appendChild(title);

    if (card.task.uncertainty !== null) {
      const badge = document.createElement("span");
      badge.className = "badge badge-uncertainty";
      badge.textContent = `u=${card.task.uncertainty.toFixed(3)}`;
      header.appendChild(badge);
    }
    if (card.task.region_id >= 0) {
      const badge = document.createElement("span");
      badge.className = "badge badge-region";
      badge.textContent = `region ${card.task.region_id}`;
      header.appendChild(badge);
    }
    element.appendChild(header);

    const payload = document.createElement("p");
    payload.className = "payload";
    payload.textContent = card.task.payload;
    element.appendChild(payload);

    if (card.status === "conflict") {
      const notice = document.createElement("div");
      notice.className = "conflict-notice";
      const name =
        this.classes.find((c) => c.id === card.committedClass)?.name ??
        String(card.committedClass);
      notice.textContent = `Already labeled by another annotator: ${name}`;
      const dismiss = document.createElement("button");
      dismiss.textContent = "Dismiss";
      dismiss.addEventListener("click", () => {
        this.cards = this.cards.filter((c) => c !== card);
        this.render();
      });
      notice.appendChild(dismiss);
      element.appendChild(notice);
      return element;
    }

    const buttons = document.createElement("div");
    buttons.className = "class-buttons";
    this.classes.forEach((option, position) => {
      const button = document.createElement("button");
      button.className = "class-button";
      button.dataset.classId = String(option.id);
      const hotkey = position < 10 ? `${(position + 1) % 10}` : "";
      button.textContent = hotkey ? `${option.name} [${hotkey}]` : option.name;
      button.addEventListener("click", () => void this.submit(card, option.id));
      buttons.appendChild(button);
    });
    element.appendChild(buttons);

    element.addEventListener("keydown", (event: KeyboardEvent) => {
      if (!/^[0-9]$/.test(event.key)) return;
      const position = event.key === "0" ? 9 : Number(event.key) - 1;
      const option = this.classes[position];
      if (option !== undefined) {
        event.preventDefault();
        void this.submit(card, option.id);
      }
    });
    return element;
  }

  /** Optimistically drop the card; restore it if the service says no. */
  private async submit(card: CardState, classId: number): Promise<void> {
    const position = this.cards.indexOf(card);
    if (position < 0) return;
    this.cards.splice(position, 1);
    this.render();
    this.onChange();
    try {
      await this.client.submitLabel(card.task.sample_index, classId);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        card.status = "conflict";
        card.committedClass = error.body["committed_class"] as number;
        this.cards.splice(Math.min(position, this.cards.length), 0, card);
      } else {
        // network failure or other rejection: the label did not commit
        this.cards.splice(Math.min(position, this.cards.length), 0, card);
        this.banner =
          error instanceof ApiError
            ? `Label rejected (${error.status}) — retry`
            : "Cannot reach the annotation service — retry";
      }
      this.render();
    }
    this.onChange();
  }
}
