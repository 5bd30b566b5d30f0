// Typed client for the judging service JSON API. The browser touches the
// service only through the two evaluator endpoints below; campaign
// administration and tallies are operator-only and must never be called
// from this bundle while a campaign is in progress.

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface TaskView {
  campaign_id: string;
  item_index: number;
  question: string;
  text_first: string;
  text_second: string;
  judged: number;
  total: number;
}

export interface CampaignDone {
  campaign_id: string;
  done: true;
  judged: number;
  total: number;
}

export type NextTask = TaskView | CampaignDone;

export function isDone(next: NextTask): next is CampaignDone {
  return "done" in next && next.done === true;
}

export type Choice = "first" | "second" | "tie";

export interface JudgmentAck {
  accepted: boolean;
  judged: number;
  total: number;
}

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
    this.status = status;
  }

  // 5xx means the judgment may or may not have been stored; resubmitting
  // is safe because the service keeps only the latest judgment per
  // (item, evaluator).
  get transient(): boolean {
    return this.status >= 500;
  }
}

// Anything that is not a structured service rejection is a transport
// problem (fetch rejects with TypeError on network failure) and worth
// retrying; 4xx validation errors are not.
export function isTransient(error: unknown): boolean {
  if (error instanceof ApiError) return error.transient;
  return true;
}

async function readDetail(response: Response): Promise<string> {
  const text = await response.text();
  try {
    const body = JSON.parse(text) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    // non-JSON body, fall through to the raw text
  }
  return text || `request failed with status ${response.status}`;
}

export class EvalApi {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  nextTask(campaignId: string, evaluator: string): Promise<NextTask> {
    const url =
      `${this.base}/api/campaigns/${encodeURIComponent(campaignId)}/next` +
      `?evaluator=${encodeURIComponent(evaluator)}`;
    return this.request<NextTask>(url);
  }

  submitJudgment(
    campaignId: string,
    itemIndex: number,
    choice: Choice,
    evaluator: string,
  ): Promise<JudgmentAck> {
    const url = `${this.base}/api/campaigns/${encodeURIComponent(campaignId)}/judgments`;
    return this.request<JudgmentAck>(url, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ item_index: itemIndex, choice, evaluator }),
    });
  }

  private async request<T>(url: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(url, init);
    if (!response.ok) {
      throw new ApiError(response.status, await readDetail(response));
    }
    return (await response.json()) as T;
  }
}
