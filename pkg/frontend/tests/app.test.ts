import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, EvalApi, FetchLike, isDone, isTransient } from "../src/api.js";
import { JudgingApp, renderEntryForm } from "../src/app.js";

// ---------------------------------------------------------------------
// In-memory stand-in for the judging service with the same JSON contract
// and the same replace semantics: the latest judgment per (item,
// evaluator) wins, so client retries are idempotent.

interface StoredRow {
  item_index: number;
  choice: string;
  evaluator: string;
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

class FakeService {
  readonly question: string;
  readonly items: { text_first: string; text_second: string }[];
  readonly rows: StoredRow[] = [];
  readonly requested: { url: string; method: string }[] = [];
  failSubmits = 0; // answer 500 without storing, this many times
  rejectSubmits = 0; // drop the connection, this many times
  validationDetail: string | null = null; // answer 400 once with this detail

  constructor(question: string, pairs: [string, string][]) {
    this.question = question;
    this.items = pairs.map(([a, b]) => ({ text_first: a, text_second: b }));
  }

  latest(evaluator: string): Map<number, StoredRow> {
    const effective = new Map<number, StoredRow>();
    for (const row of this.rows) {
      if (row.evaluator === evaluator) effective.set(row.item_index, row);
    }
    return effective;
  }

  fetch: FetchLike = async (url, init) => {
    this.requested.push({ url, method: init?.method ?? "GET" });
    const parsed = new URL(url, "http://svc.test");
    if (parsed.pathname.endsWith("/next")) {
      const evaluator = parsed.searchParams.get("evaluator") ?? "";
      const judged = this.latest(evaluator);
      for (let index = 0; index < this.items.length; index += 1) {
        if (!judged.has(index)) {
          return json(200, {
            campaign_id: "camp-1",
            item_index: index,
            question: this.question,
            text_first: this.items[index].text_first,
            text_second: this.items[index].text_second,
            judged: judged.size,
            total: this.items.length,
          });
        }
      }
      return json(200, {
        campaign_id: "camp-1",
        done: true,
        judged: judged.size,
        total: this.items.length,
      });
    }
    if (parsed.pathname.endsWith("/judgments")) {
      if (this.rejectSubmits > 0) {
        this.rejectSubmits -= 1;
        throw new TypeError("fetch failed");
      }
      if (this.failSubmits > 0) {
        this.failSubmits -= 1;
        return json(500, { detail: "storage failure, retry" });
      }
      if (this.validationDetail !== null) {
        const detail = this.validationDetail;
        this.validationDetail = null;
        return json(400, { detail });
      }
      const body = JSON.parse(String(init?.body)) as StoredRow;
      this.rows.push({
        item_index: body.item_index,
        choice: body.choice,
        evaluator: body.evaluator,
      });
      return json(200, {
        accepted: true,
        judged: this.latest(body.evaluator).size,
        total: this.items.length,
      });
    }
    return json(404, { detail: "unknown path" });
  };
}

const QUESTION =
  "Please choose the translation that is more fluent, natural, and " +
  "reflecting better use of Chinese";

const PAIRS: [string, string][] = [
  ["这项条约于周一生效。", "该条约周一开始生效。"],
  ["委员会推迟了投票。", "委员会将投票推迟了。"],
  ["港口在风暴后重新开放。", "风暴过后港口重新开放。"],
];

// The evaluator screen must never show hidden labels, tallies, or any of
// the words the service reserves for system identities.
const FORBIDDEN = ["Refine", "Reference", "first_system", "second_system", "tally"];

function expectBlindDom(): void {
  const html = document.body.innerHTML;
  for (const needle of FORBIDDEN) {
    expect(html).not.toContain(needle);
  }
}

const liveApps: JudgingApp[] = [];

afterEach(() => {
  while (liveApps.length > 0) liveApps.pop()!.stop();
  document.body.innerHTML = "";
});

function makeApp(
  service: FakeService,
  options: { evaluator?: string; retryDelayMs?: number } = {},
): { root: HTMLElement; app: JudgingApp } {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app") as HTMLElement;
  const api = new EvalApi("", service.fetch);
  const app = new JudgingApp({
    root,
    api,
    campaignId: "camp-1",
    evaluator: options.evaluator ?? "eva-1",
    retryDelayMs: options.retryDelayMs ?? 1,
  });
  liveApps.push(app);
  return { root, app };
}

function text(root: HTMLElement, selector: string): string {
  const node = root.querySelector(selector);
  expect(node, selector).not.toBeNull();
  return node!.textContent ?? "";
}

function clickChoice(root: HTMLElement, choice: string): void {
  const button = root.querySelector<HTMLButtonElement>(`button[data-choice="${choice}"]`);
  expect(button, choice).not.toBeNull();
  button!.click();
}

// ---------------------------------------------------------------------

describe("task rendering", () => {
  it("shows the question verbatim with both texts and zero progress", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    expect(text(root, ".question")).toBe(QUESTION);
    expect(text(root, '.candidate[data-side="first"] .candidate-text')).toBe(PAIRS[0][0]);
    expect(text(root, '.candidate[data-side="second"] .candidate-text')).toBe(PAIRS[0][1]);
    expect(text(root, ".progress-label")).toBe("0 of 3 judged");
    const fill = root.querySelector<HTMLElement>(".progress-fill")!;
    expect(fill.style.width).toBe("0%");
    expectBlindDom();
  });

  it("renders the question as text, not markup", async () => {
    const tricky = 'Which is better? <b>&amp;</b> "quotes"';
    const service = new FakeService(tricky, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    expect(text(root, ".question")).toBe(tricky);
    expect(root.querySelector(".question b")).toBeNull();
  });

  it("gives both translations identical presentation", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    const candidates = root.querySelectorAll(".candidate");
    expect(candidates.length).toBe(2);
    const [first, second] = [...candidates];
    expect(first.className).toBe(second.className);
    expect(first.tagName).toBe(second.tagName);
    expect(first.querySelector(".candidate-label")!.tagName).toBe(
      second.querySelector(".candidate-label")!.tagName,
    );
  });

  it("offers exactly three actions with key hints 1, 0, 2", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    const buttons = [...root.querySelectorAll<HTMLButtonElement>("button.action")];
    expect(buttons.map((b) => b.dataset.choice)).toEqual(["first", "tie", "second"]);
    expect(buttons.map((b) => b.querySelector("kbd")!.textContent)).toEqual(["1", "0", "2"]);
  });
});

describe("judging flow", () => {
  it("records a click and advances with updated progress", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    clickChoice(root, "second");
    await vi.waitFor(() => {
      expect(text(root, '.candidate[data-side="first"] .candidate-text')).toBe(PAIRS[1][0]);
    });
    expect(service.rows).toEqual([{ item_index: 0, choice: "second", evaluator: "eva-1" }]);
    expect(text(root, ".progress-label")).toBe("1 of 3 judged");
    const fill = root.querySelector<HTMLElement>(".progress-fill")!;
    expect(fill.style.width).toBe("33%");
  });

  it("maps keys 1, 0 and 2 to first, tie and second", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    const keys = ["1", "0", "2"];
    for (let index = 0; index < keys.length; index += 1) {
      document.dispatchEvent(new KeyboardEvent("keydown", { key: keys[index] }));
      await vi.waitFor(() => {
        expect(service.latest("eva-1").size).toBe(index + 1);
        expect(root.querySelector("button.action:disabled")).toBeNull();
      });
    }
    expect(service.rows.map((row) => row.choice)).toEqual(["first", "tie", "second"]);
    expect(service.rows.map((row) => row.item_index)).toEqual([0, 1, 2]);
    await vi.waitFor(() => expect(text(root, ".done-text")).toContain("3 pairs"));
  });

  it("ignores shortcut keys while typing in a form field", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    const input = document.createElement("input");
    root.append(input);
    input.dispatchEvent(new KeyboardEvent("keydown", { key: "1", bubbles: true }));
    await new Promise((resolve) => setTimeout(resolve, 20));
    expect(service.rows).toEqual([]);
  });

  it("submits once even when two choices race", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { app } = makeApp(service);
    await app.start();

    await Promise.all([app.choose("first"), app.choose("second")]);
    expect(service.rows).toEqual([{ item_index: 0, choice: "first", evaluator: "eva-1" }]);
  });

  it("does nothing before a task is on screen", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { app } = makeApp(service);
    await app.choose("tie");
    expect(service.rows).toEqual([]);
  });

  it("walks the whole campaign to a count-only completion screen", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();
    expectBlindDom();

    for (let index = 0; index < PAIRS.length; index += 1) {
      clickChoice(root, "tie");
      await vi.waitFor(() => {
        expect(service.latest("eva-1").size).toBe(index + 1);
        expect(root.querySelector("button.action:disabled")).toBeNull();
      });
      expectBlindDom();
    }

    expect(text(root, ".done-title")).toBe("All done");
    expect(text(root, ".done-text")).toBe(
      "You judged 3 pairs in this campaign. You can close this tab.",
    );
    expectBlindDom();
  });

  it("only ever calls the task and judgment endpoints", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();
    for (let index = 0; index < PAIRS.length; index += 1) {
      clickChoice(root, "first");
      await vi.waitFor(() => {
        expect(service.latest("eva-1").size).toBe(index + 1);
        expect(root.querySelector("button.action:disabled")).toBeNull();
      });
    }
    await vi.waitFor(() => expect(root.querySelector(".done")).not.toBeNull());

    expect(service.requested.length).toBeGreaterThan(0);
    for (const { url } of service.requested) {
      expect(url).toMatch(/\/api\/campaigns\/camp-1\/(next\?|judgments$)/);
    }
  });

  it("a fresh session resumes at the next unjudged item", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    service.rows.push(
      { item_index: 0, choice: "tie", evaluator: "eva-1" },
      { item_index: 1, choice: "first", evaluator: "eva-1" },
    );
    const { root, app } = makeApp(service);
    await app.start();

    expect(text(root, '.candidate[data-side="first"] .candidate-text')).toBe(PAIRS[2][0]);
    expect(text(root, ".progress-label")).toBe("2 of 3 judged");
    const fill = root.querySelector<HTMLElement>(".progress-fill")!;
    expect(fill.style.width).toBe("67%");
  });
});

describe("failure handling", () => {
  it("retries a 500 and stores exactly one judgment", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    service.failSubmits = 1000;
    clickChoice(root, "first");
    await vi.waitFor(() => {
      const banner = root.querySelector<HTMLElement>(".banner")!;
      expect(banner.hidden).toBe(false);
      expect(banner.textContent).toContain("retrying");
    });
    expect(service.rows).toEqual([]);

    service.failSubmits = 0;
    await vi.waitFor(() => {
      expect(text(root, '.candidate[data-side="first"] .candidate-text')).toBe(PAIRS[1][0]);
    });
    expect(service.rows).toEqual([{ item_index: 0, choice: "first", evaluator: "eva-1" }]);
    expect(root.querySelector<HTMLElement>(".banner")!.hidden).toBe(true);
  });

  it("retries a dropped connection the same way", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    service.rejectSubmits = 1000;
    clickChoice(root, "tie");
    await vi.waitFor(() => {
      expect(root.querySelector<HTMLElement>(".banner")!.hidden).toBe(false);
    });

    service.rejectSubmits = 0;
    await vi.waitFor(() => {
      expect(service.rows).toEqual([{ item_index: 0, choice: "tie", evaluator: "eva-1" }]);
      expect(text(root, ".progress-label")).toBe("1 of 3 judged");
    });
  });

  it("surfaces a validation error verbatim and keeps the task", async () => {
    const detail = "choice must be one of ('first', 'second', 'tie'), got 'maybe'";
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    service.validationDetail = detail;
    await app.choose("first");

    const banner = root.querySelector<HTMLElement>(".banner")!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toBe(detail);
    expect(service.rows).toEqual([]);
    expect(text(root, '.candidate[data-side="first"] .candidate-text')).toBe(PAIRS[0][0]);
    expect(root.querySelector("button.action:disabled")).toBeNull();

    await app.choose("first");
    expect(service.rows).toEqual([{ item_index: 0, choice: "first", evaluator: "eva-1" }]);
    expect(banner.hidden).toBe(true);
  });

  it("notices a task judged in another session and refreshes", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const { root, app } = makeApp(service);
    await app.start();

    service.rows.push(
      { item_index: 0, choice: "tie", evaluator: "eva-1" },
      { item_index: 1, choice: "tie", evaluator: "eva-1" },
    );
    await app.choose("first");

    const banner = root.querySelector<HTMLElement>(".banner")!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("another session");
    expect(text(root, '.candidate[data-side="first"] .candidate-text')).toBe(PAIRS[2][0]);
    expect(service.latest("eva-1").get(0)!.choice).toBe("first");
  });

  it("shows a dead-end screen when the campaign cannot load", async () => {
    const service = new FakeService(QUESTION, PAIRS);
    const brokenFetch: FetchLike = async () => json(404, { detail: "unknown campaign 'camp-1'" });
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    const app = new JudgingApp({
      root,
      api: new EvalApi("", brokenFetch),
      campaignId: "camp-1",
      evaluator: "eva-1",
      retryDelayMs: 1,
    });
    liveApps.push(app);
    await app.start();

    expect(root.querySelector(".fatal")).not.toBeNull();
    const banner = root.querySelector<HTMLElement>(".banner")!;
    expect(banner.textContent).toBe("unknown campaign 'camp-1'");
    await app.choose("tie");
    expect(service.rows).toEqual([]);
  });
});

describe("api client", () => {
  it("encodes path and query pieces", async () => {
    const seen: string[] = [];
    const fetchImpl: FetchLike = async (url) => {
      seen.push(url);
      return json(200, { campaign_id: "c 1", done: true, judged: 0, total: 0 });
    };
    const api = new EvalApi("http://svc.test/", fetchImpl);
    await api.nextTask("c 1", "eva/1");
    expect(seen).toEqual(["http://svc.test/api/campaigns/c%201/next?evaluator=eva%2F1"]);
  });

  it("raises ApiError with the service detail", async () => {
    const api = new EvalApi("", async () => json(400, { detail: "boom" }));
    const error = await api.nextTask("c", "e").catch((err) => err);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(400);
    expect(error.message).toBe("boom");
    expect(error.transient).toBe(false);
  });

  it("falls back to the raw body when the error is not JSON", async () => {
    const api = new EvalApi(
      "",
      async () => new Response("gateway exploded", { status: 502 }),
    );
    const error = await api.nextTask("c", "e").catch((err) => err);
    expect(error.message).toBe("gateway exploded");
    expect(error.transient).toBe(true);
  });

  it("classifies transport failures as transient", () => {
    expect(isTransient(new TypeError("fetch failed"))).toBe(true);
    expect(isTransient(new ApiError(503, "x"))).toBe(true);
    expect(isTransient(new ApiError(422, "x"))).toBe(false);
  });

  it("discriminates done views from tasks", () => {
    expect(isDone({ campaign_id: "c", done: true, judged: 3, total: 3 })).toBe(true);
    expect(
      isDone({
        campaign_id: "c",
        item_index: 0,
        question: "q",
        text_first: "a",
        text_second: "b",
        judged: 0,
        total: 3,
      }),
    ).toBe(false);
  });
});

describe("session entry form", () => {
  it("collects base URL, campaign and token", () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    const started: unknown[] = [];
    renderEntryForm(root, { campaignId: "camp-9" }, (values) => started.push(values));

    const inputs = [...root.querySelectorAll("input")];
    expect(inputs.map((input) => input.name)).toEqual(["base", "campaign", "evaluator"]);
    expect(inputs[1].value).toBe("camp-9");

    inputs[2].value = "  eva-7  ";
    root.querySelector("form")!.dispatchEvent(new Event("submit", { cancelable: true }));
    expect(started).toEqual([{ baseUrl: "", campaignId: "camp-9", evaluator: "eva-7" }]);
  });

  it("requires a campaign id and a token", () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    let started = 0;
    renderEntryForm(root, {}, () => {
      started += 1;
    });

    root.querySelector("form")!.dispatchEvent(new Event("submit", { cancelable: true }));
    expect(started).toBe(0);
    const hint = root.querySelector<HTMLElement>(".entry-hint")!;
    expect(hint.hidden).toBe(false);
    expect(hint.textContent).toContain("required");
  });
});
