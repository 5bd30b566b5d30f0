// Boot path when the bundle is hosted by the judging service at /ui.
// The operator's link usually carries the campaign id (?campaign=...);
// the evaluator supplies a token, which then travels only as an API
// query/body field, never into the page URL history.

import { EvalApi } from "./api.js";
import { JudgingApp, EntryValues, renderEntryForm } from "./app.js";

function begin(root: HTMLElement, values: EntryValues): void {
  const api = new EvalApi(values.baseUrl);
  const app = new JudgingApp({
    root,
    api,
    campaignId: values.campaignId,
    evaluator: values.evaluator,
  });
  void app.start();
}

function boot(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const defaults: EntryValues = {
    baseUrl: params.get("base") ?? "",
    campaignId: params.get("campaign") ?? "",
    evaluator: params.get("evaluator") ?? "",
  };
  if (defaults.campaignId && defaults.evaluator) {
    begin(root, defaults);
  } else {
    renderEntryForm(root, defaults, (values) => begin(root, values));
  }
}

boot();
