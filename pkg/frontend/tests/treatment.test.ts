import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { setBaseUrl } from "../src/api.js";
import { STAGE_ORDER, renderResults, renderTreatment, trackRun } from "../src/pages/treatment.js";
import type { RunState } from "../src/types.js";
import { fixture, flush, installFetchMock } from "./helpers.js";

const datasets = fixture("datasets");
const schema = fixture("schema");
const previewOk = fixture("preview_ok");
const previewError = fixture("preview_error");
const previewDegenerate = fixture("preview_degenerate");
const results = fixture("results");
const runStates: RunState[] = fixture("run_states");
const datasetId: string = datasets.datasets[0].dataset_id;

function formRouter(url: string, init?: RequestInit) {
  if (url.endsWith("/api/v1/datasets")) return { body: datasets };
  if (url.endsWith("/schema")) return { body: schema };
  if (url.endsWith("/treatment-preview")) {
    const expr = JSON.parse(String(init?.body ?? "{}")).expression as string;
    if (expr === "x >") return { status: previewError.status, body: previewError.body };
    if (expr === "x == x") return { status: previewDegenerate.status, body: previewDegenerate.body };
    return { body: previewOk };
  }
  return undefined;
}

describe("treatment page form", () => {
  beforeEach(() => {
    document.body.innerHTML = '<main id="app"></main>';
    setBaseUrl("");
  });
  afterEach(() => vi.unstubAllGlobals());

  async function setUp() {
    installFetchMock(formRouter);
    const app = document.getElementById("app")!;
    renderTreatment(app);
    await flush();
    return app;
  }

  function typeExpression(app: HTMLElement, text: string) {
    const input = app.querySelector<HTMLTextAreaElement>("#expression")!;
    input.value = text;
    input.dispatchEvent(new Event("input"));
  }

  it("loads datasets and the metric selector from the schema", async () => {
    const app = await setUp();
    const options = app.querySelectorAll<HTMLOptionElement>("#dataset-select option");
    expect(options).toHaveLength(1);
    expect(options[0].value).toBe(datasetId);
    const metrics = Array.from(
      app.querySelectorAll<HTMLOptionElement>("#metric-select option"),
    ).map((o) => o.value);
    expect(metrics[0]).toBe(schema.outcome);
  });

  it("shows live preview counts and enables submit", async () => {
    const app = await setUp();
    typeExpression(app, "x > 0");
    await flush();
    const preview = app.querySelector("#preview")!;
    expect(preview.textContent).toContain(String(previewOk.n_treated));
    expect(preview.textContent).toContain(String(previewOk.n_control));
    expect(app.querySelector("#submit-run")!.hasAttribute("disabled")).toBe(false);
  });

  it("renders syntax errors inline and disables submit", async () => {
    const app = await setUp();
    typeExpression(app, "x >");
    await flush();
    const error = app.querySelector("#preview .inline-error")!;
    expect(error.textContent).toContain("offset 4");
    expect(app.querySelector("#submit-run")!.hasAttribute("disabled")).toBe(true);
  });

  it("renders degenerate-treatment errors inline", async () => {
    const app = await setUp();
    typeExpression(app, "x == x");
    await flush();
    expect(app.querySelector("#preview .inline-error")!.textContent)
      .toContain("degenerate");
    expect(app.querySelector("#submit-run")!.hasAttribute("disabled")).toBe(true);
  });
});

describe("run tracking", () => {
  beforeEach(() => {
    document.body.innerHTML = '<main id="app"></main>';
    setBaseUrl("");
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
    vi.unstubAllGlobals();
  });

  it("walks the stage order monotonically and stops polling at terminal", async () => {
    let poll = 0;
    const runId = runStates[0].run_id;
    const { calls } = installFetchMock((url) => {
      if (url.endsWith(`/api/v1/runs/${runId}`)) {
        const state = runStates[Math.min(poll, runStates.length - 1)];
        poll += 1;
        return { body: state };
      }
      if (url.endsWith("/results")) return { body: results };
      return undefined;
    });

    const view = document.getElementById("app")!;
    const seenStages: string[] = [];
    const seenProgress: number[] = [];
    const { done } = trackRun(view, runId);

    for (let i = 0; i < runStates.length + 2; i += 1) {
      await vi.advanceTimersByTimeAsync(1000);
      const label = view.querySelector<HTMLElement>("#stage-label")!;
      const fill = view.querySelector<HTMLElement>(".pbar-fill")!;
      if (label.dataset.stage) seenStages.push(label.dataset.stage);
      seenProgress.push(Number(fill.dataset.progress));
    }
    await done;

    // stages appear in pipeline order, never going backwards
    const order = seenStages.map((stage) => STAGE_ORDER.indexOf(stage as never));
    expect(order.every((v) => v >= 0)).toBe(true);
    for (let i = 1; i < order.length; i += 1) expect(order[i]).toBeGreaterThanOrEqual(order[i - 1]);
    for (let i = 1; i < seenProgress.length; i += 1) {
      expect(seenProgress[i]).toBeGreaterThanOrEqual(seenProgress[i - 1]);
    }

    // terminal: no further polls however long we wait
    const callsAtEnd = calls.filter((u) => u.endsWith(`/runs/${runId}`)).length;
    await vi.advanceTimersByTimeAsync(30_000);
    expect(calls.filter((u) => u.endsWith(`/runs/${runId}`)).length).toBe(callsAtEnd);
  });
});

describe("results panel", () => {
  beforeEach(() => {
    document.body.innerHTML = '<main id="app"></main>';
  });

  it("renders the headline tiles and the pre-binned bootstrap histogram", () => {
    const box = document.getElementById("app")!;
    renderResults(box, "someid", results);
    const text = box.textContent ?? "";
    expect(text).toContain(JSON.stringify(results.att));
    expect(text).toContain(JSON.stringify(results.ci_percentile[0]));
    expect(text).toContain(JSON.stringify(results.ci_symmetric[1]));
    expect(text).toContain(JSON.stringify(results.counts.n_treated));
    expect(text).toContain(JSON.stringify(results.counts.n_treated_matched));

    const bars = box.querySelectorAll("svg rect.bar-boot");
    expect(bars.length).toBe(results.bootstrap_hist.edges.length - 1);
    // bar geometry comes from server counts only
    const counts = Array.from(bars).map((b) => Number(b.getAttribute("data-count")));
    expect(counts).toEqual(results.bootstrap_hist.counts);
  });

  it("links to both validation pages", () => {
    const box = document.getElementById("app")!;
    renderResults(box, "abc123", results);
    const hrefs = Array.from(box.querySelectorAll("a")).map((a) => a.getAttribute("href"));
    expect(hrefs).toContain("#/model/abc123");
    expect(hrefs).toContain("#/matching/abc123");
  });
});
