import { beforeEach, describe, expect, it } from "vitest";

import { renderLoaded } from "../src/pages/model_validation.js";
import { fixture } from "./helpers.js";

const results = fixture("results");

describe("model validation page", () => {
  beforeEach(() => {
    document.body.innerHTML = '<main id="app"></main>';
  });

  function render() {
    const app = document.getElementById("app")!;
    renderLoaded(app, results);
    return app;
  }

  it("shows AUC and F1 verbatim", () => {
    const app = render();
    const text = app.textContent ?? "";
    expect(text).toContain(JSON.stringify(results.model_evaluation.test.auc));
    expect(text).toContain(JSON.stringify(results.model_evaluation.test.f1));
  });

  it("draws the PR curve with the threshold-0.5 point highlighted", () => {
    const app = render();
    expect(app.querySelector("svg path.pr-line")).toBeTruthy();
    expect(app.querySelector("svg circle.pr-highlight")).toBeTruthy();
  });

  it("sorts importance bars descending by coefficient magnitude", () => {
    const app = render();
    const values = Array.from(
      app.querySelectorAll<HTMLElement>(".coef-bars td[data-verbatim]"),
    ).map((cell) => Math.abs(JSON.parse(cell.textContent!)));
    for (let i = 1; i < values.length; i += 1) {
      expect(values[i]).toBeLessThanOrEqual(values[i - 1]);
    }
    // the intercept is not a feature
    expect(app.querySelector(".coef-bars")!.textContent).not.toContain("(intercept)");
  });

  it("shows the model ranking table capped at top_k", () => {
    const app = render();
    const rows = app.querySelectorAll("#ranking-table tbody tr, #ranking-table tr");
    const dataRows = Array.from(rows).filter((r) => r.querySelector("td"));
    expect(dataRows.length).toBeLessThanOrEqual(results.selection.top_k);
    expect(dataRows.length).toBe(
      Math.min(results.selection.top_k, results.selection.stage1.length));
  });
});
