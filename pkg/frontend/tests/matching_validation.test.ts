import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { setBaseUrl } from "../src/api.js";
import { renderLoaded, renderMatchingValidation } from "../src/pages/matching_validation.js";
import { fixture, flush, installFetchMock } from "./helpers.js";

const results = fixture("results");

describe("matching validation page", () => {
  beforeEach(() => {
    document.body.innerHTML = '<main id="app"></main>';
    setBaseUrl("");
  });
  afterEach(() => vi.unstubAllGlobals());

  function render() {
    const app = document.getElementById("app")!;
    renderLoaded(app, results);
    return app;
  }

  it("renders before/after propensity histograms with shared edges", () => {
    const app = render();
    const figures = app.querySelectorAll(".chart-pair figure");
    expect(figures.length).toBeGreaterThanOrEqual(2);
    const edgeLabels = (fig: Element) =>
      Array.from(fig.querySelectorAll("text[data-verbatim]")).map((t) => t.textContent);
    expect(edgeLabels(figures[0])).toEqual(edgeLabels(figures[1]));
    const hist = results.diagnostics.score_hist;
    expect(figures[0].querySelectorAll("rect.bar-treated").length)
      .toBe(hist.edges.length - 1);
  });

  it("love plot has one row per model feature and a reference line", () => {
    const app = render();
    expect(app.querySelectorAll("circle.smd-before").length)
      .toBe(results.diagnostics.balance.length);
    expect(app.querySelectorAll("circle.smd-after").length)
      .toBe(results.diagnostics.balance.length);
    expect(app.querySelectorAll(".ref-line").length).toBe(2);
    // the reference value is the server-sent threshold
    const text = app.textContent ?? "";
    expect(text).toContain(JSON.stringify(results.diagnostics.balance_threshold));
  });

  it("shows the balance table with SMD and t-test values verbatim", () => {
    const app = render();
    const table = app.querySelector("#balance-table")!;
    const row0 = results.diagnostics.balance[0];
    expect(table.textContent).toContain(row0.name);
    expect(table.textContent).toContain(JSON.stringify(row0.smd_before));
    expect(table.textContent).toContain(JSON.stringify(row0.ttest_after[1]));
  });

  it("renders the sensitivity sweep line chart when the sweep is present", () => {
    const app = render();
    expect(results.sensitivity).toBeTruthy();
    const paths = app.querySelectorAll("svg path.line-path");
    expect(paths.length).toBe(2); // coefficient vs w, att shift vs w
    const dots = app.querySelectorAll("svg circle.line-dot");
    expect(dots.length).toBeGreaterThanOrEqual(results.sensitivity.summary.length);
  });

  it("captions explain the desired output of each plot", () => {
    const app = render();
    const captions = Array.from(app.querySelectorAll(".caption, figcaption"))
      .map((c) => c.textContent ?? "");
    expect(captions.some((c) => c.includes("Desired output"))).toBe(true);
  });

  it("redirects to the treatment page when results are missing", async () => {
    installFetchMock(() => undefined); // every call 404s
    window.location.hash = "#/matching/nope";
    renderMatchingValidation(document.getElementById("app")!, "nope");
    await flush();
    expect(window.location.hash).toBe("#/treatment");
  });
});
