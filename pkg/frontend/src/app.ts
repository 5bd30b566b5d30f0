// Single-page judging flow: show one anonymous pair at a time, record a
// preference, advance. All progress state lives on the service, so a page
// reload resumes at the next unjudged item, and side order is whatever
// the campaign seed fixed server-side. The screen never sees or shows
// system identities, tallies, or anything beyond the task view fields.

import { ApiError, Choice, EvalApi, NextTask, TaskView, isDone, isTransient } from "./api.js";

export interface JudgingOptions {
  root: HTMLElement;
  api: EvalApi;
  campaignId: string;
  evaluator: string;
  // Pause between resubmission attempts after a transient failure.
  retryDelayMs?: number;
}

const KEY_TO_CHOICE: Record<string, Choice> = {
  "1": "first",
  "2": "second",
  "0": "tie",
};

type BannerKind = "retry" | "error" | "notice";

function el(
  doc: Document,
  tag: string,
  className: string,
  text?: string,
): HTMLElement {
  const node = doc.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class JudgingApp {
  private readonly root: HTMLElement;
  private readonly doc: Document;
  private readonly api: EvalApi;
  private readonly campaignId: string;
  private readonly evaluator: string;
  private readonly retryDelayMs: number;
  private readonly bannerEl: HTMLElement;
  private bannerKind: BannerKind | null = null;
  private view: TaskView | null = null;
  private busy = false;
  private readonly onKeydown: (event: KeyboardEvent) => void;

  constructor(options: JudgingOptions) {
    this.root = options.root;
    this.doc = options.root.ownerDocument;
    this.api = options.api;
    this.campaignId = options.campaignId;
    this.evaluator = options.evaluator;
    this.retryDelayMs = options.retryDelayMs ?? 1500;
    // One persistent element, re-attached on every render, so a banner
    // raised just before a screen transition survives it.
    this.bannerEl = el(this.doc, "div", "banner");
    this.bannerEl.hidden = true;
    this.onKeydown = (event) => this.handleKey(event);
  }

  async start(): Promise<void> {
    this.doc.addEventListener("keydown", this.onKeydown as EventListener);
    await this.advance();
  }

  stop(): void {
    this.doc.removeEventListener("keydown", this.onKeydown as EventListener);
  }

  handleKey(event: KeyboardEvent): void {
    const choice = KEY_TO_CHOICE[event.key];
    if (!choice) return;
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return;
    }
    void this.choose(choice);
  }

  async choose(choice: Choice): Promise<void> {
    if (!this.view || this.busy) return;
    const view = this.view;
    this.busy = true;
    this.clearBanner("error", "notice");
    this.markPending(choice);
    const ack = await this.withRetry(() =>
      this.api.submitJudgment(this.campaignId, view.item_index, choice, this.evaluator),
    );
    if (ack === null) {
      // Validation failure already surfaced verbatim; let the evaluator act again.
      this.enableActions();
      this.busy = false;
      return;
    }
    if (ack.judged !== view.judged + 1) {
      // Progress moved while this task was on screen: the same evaluator
      // judged items from another tab. The service kept the latest
      // judgment per item, so just refresh to the next unjudged one.
      this.showBanner(
        "notice",
        "Progress changed in another session; showing the next unjudged item.",
      );
    }
    await this.advance();
    this.busy = false;
  }

  private async advance(): Promise<void> {
    const next = await this.withRetry(() =>
      this.api.nextTask(this.campaignId, this.evaluator),
    );
    if (next === null) {
      this.view = null;
      this.renderFatal();
      return;
    }
    if (isDone(next)) {
      this.view = null;
      this.renderDone(next);
    } else {
      this.view = next;
      this.renderTask(next);
    }
  }

  // Runs a service call until it succeeds, showing a non-blocking banner
  // between attempts. Returns null on a non-transient rejection, whose
  // detail is shown verbatim.
  private async withRetry<T>(call: () => Promise<T>): Promise<T | null> {
    for (;;) {
      try {
        const result = await call();
        this.clearBanner("retry");
        return result;
      } catch (error) {
        if (!isTransient(error)) {
          this.showBanner("error", (error as ApiError).message);
          return null;
        }
        this.showBanner(
          "retry",
          "Could not reach the judging service; retrying automatically.",
        );
        await delay(this.retryDelayMs);
      }
    }
  }

  // -- rendering ----------------------------------------------------

  private renderTask(view: TaskView): void {
    const doc = this.doc;
    const header = el(doc, "header", "progress-header");
    const bar = el(doc, "div", "progress");
    bar.setAttribute("role", "progressbar");
    bar.setAttribute("aria-valuemin", "0");
    bar.setAttribute("aria-valuemax", String(view.total));
    bar.setAttribute("aria-valuenow", String(view.judged));
    const fill = el(doc, "div", "progress-fill");
    fill.style.width = percent(view.judged, view.total);
    bar.append(fill);
    header.append(bar, el(doc, "div", "progress-label", `${view.judged} of ${view.total} judged`));

    const question = el(doc, "p", "question", view.question);

    const pair = el(doc, "div", "pair");
    pair.append(
      this.candidate("first", "Translation 1", view.text_first),
      this.candidate("second", "Translation 2", view.text_second),
    );

    const actions = el(doc, "div", "actions");
    actions.append(
      this.actionButton("first", "Choose translation 1", "1"),
      this.actionButton("tie", "Tie", "0"),
      this.actionButton("second", "Choose translation 2", "2"),
    );

    this.root.replaceChildren(this.bannerEl, header, question, pair, actions);
  }

  private candidate(side: "first" | "second", label: string, text: string): HTMLElement {
    // Both sides share one class and structure: equal visual weight.
    const section = el(this.doc, "section", "candidate");
    section.dataset.side = side;
    section.append(
      el(this.doc, "h2", "candidate-label", label),
      el(this.doc, "p", "candidate-text", text),
    );
    return section;
  }

  private actionButton(choice: Choice, label: string, key: string): HTMLElement {
    const button = el(this.doc, "button", "action") as HTMLButtonElement;
    button.type = "button";
    button.dataset.choice = choice;
    button.setAttribute("aria-keyshortcuts", key);
    const kbd = el(this.doc, "kbd", "key-hint", key);
    button.append(kbd, this.doc.createTextNode(` ${label}`));
    button.addEventListener("click", () => void this.choose(choice));
    return button;
  }

  private renderDone(next: { judged: number }): void {
    // Count only: tallies and identities stay hidden so the evaluator's
    // later sessions remain blind.
    const doc = this.doc;
    const section = el(doc, "section", "done");
    section.append(
      el(doc, "h2", "done-title", "All done"),
      el(
        doc,
        "p",
        "done-text",
        `You judged ${next.judged} pairs in this campaign. You can close this tab.`,
      ),
    );
    this.root.replaceChildren(this.bannerEl, section);
  }

  private renderFatal(): void {
    const section = el(this.doc, "section", "fatal");
    section.append(
      el(
        this.doc,
        "p",
        "fatal-text",
        "Cannot continue this campaign. Check the link you were given and reload.",
      ),
    );
    this.root.replaceChildren(this.bannerEl, section);
  }

  private markPending(choice: Choice): void {
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("button.action")) {
      button.disabled = true;
      if (button.dataset.choice === choice) button.classList.add("pending");
    }
  }

  private enableActions(): void {
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("button.action")) {
      button.disabled = false;
      button.classList.remove("pending");
    }
  }

  private showBanner(kind: BannerKind, text: string): void {
    this.bannerKind = kind;
    this.bannerEl.className = `banner banner-${kind}`;
    this.bannerEl.textContent = text;
    this.bannerEl.hidden = false;
  }

  private clearBanner(...kinds: BannerKind[]): void {
    if (this.bannerKind !== null && kinds.includes(this.bannerKind)) {
      this.bannerKind = null;
      this.bannerEl.hidden = true;
      this.bannerEl.textContent = "";
    }
  }
}

function percent(judged: number, total: number): string {
  if (total <= 0) return "0%";
  return `${Math.round((100 * judged) / total)}%`;
}

// -- session entry ----------------------------------------------------

export interface EntryValues {
  baseUrl: string;
  campaignId: string;
  evaluator: string;
}

// Small form for whatever the operator's link did not already carry.
// Configuration stops here: service base URL, campaign id, and the
// evaluator token that identifies this session.
export function renderEntryForm(
  root: HTMLElement,
  defaults: Partial<EntryValues>,
  onStart: (values: EntryValues) => void,
): void {
  const doc = root.ownerDocument;
  const form = el(doc, "form", "entry") as HTMLFormElement;
  const hint = el(doc, "p", "entry-hint");
  hint.hidden = true;

  const field = (name: string, label: string, value: string): HTMLInputElement => {
    const wrap = el(doc, "label", "entry-field", label);
    const input = doc.createElement("input");
    input.type = "text";
    input.name = name;
    input.value = value;
    wrap.append(input);
    form.append(wrap);
    return input;
  };

  const base = field("base", "Service URL (empty for same origin)", defaults.baseUrl ?? "");
  const campaign = field("campaign", "Campaign id", defaults.campaignId ?? "");
  const evaluator = field("evaluator", "Your evaluator token", defaults.evaluator ?? "");

  const start = el(doc, "button", "entry-start", "Start judging") as HTMLButtonElement;
  start.type = "submit";
  form.append(start, hint);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const values = {
      baseUrl: base.value.trim(),
      campaignId: campaign.value.trim(),
      evaluator: evaluator.value.trim(),
    };
    if (!values.campaignId || !values.evaluator) {
      hint.textContent = "Campaign id and evaluator token are both required.";
      hint.hidden = false;
      return;
    }
    onStart(values);
  });

  root.replaceChildren(form);
}
