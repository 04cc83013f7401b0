/** Propensity-model validation: AUC, precision-recall curve, feature
 * importance, and the stage-1 finalist table. */

import { getResults } from "../api.js";
import { coefficientBars, prCurve } from "../charts.js";
import { el, num } from "../format.js";
import type { RunResults } from "../types.js";

export function renderModelValidation(container: HTMLElement, runId: string | null): void {
  if (!runId) {
    window.location.hash = "#/treatment";
    return;
  }
  getResults(runId).then(
    (results) => renderLoaded(container, results),
    () => { window.location.hash = "#/treatment"; },
  );
}

export function renderLoaded(container: HTMLElement, results: RunResults): void {
  const test = results.model_evaluation.test;
  const positives = test.confusion.tp + test.confusion.fn;
  const predicted = test.confusion.tp + test.confusion.fp;
  const highlight: [number, number] | null = predicted > 0 && positives > 0
    ? [test.confusion.tp / positives, test.confusion.tp / predicted]
    : null;

  const coefficients = Object.entries(results.model.coefficients)
    .filter(([name]) => name !== "(intercept)")
    .map(([name, value]) => ({ name, value }))
    .sort((a, b) => Math.abs(b.value) - Math.abs(a.value));

  const finalists = results.selection.stage1.slice(0, results.selection.top_k);
  const table = el("table", { class: "ranking", id: "ranking-table" });
  table.appendChild(el("caption", {},
    `Top stage-1 candidate feature sets (of ${results.selection.stage1.length} enumerated)`));
  const head = table.createTHead().insertRow();
  for (const h of ["rank", "features", "AUC (test)", "F1 (test)", "converged"]) {
    head.appendChild(el("th", {}, h));
  }
  finalists.forEach((candidate, i) => {
    const row = table.insertRow();
    row.insertCell().textContent = String(i + 1);
    row.insertCell().textContent = candidate.base_features.join(", ");
    row.insertCell().appendChild(num(candidate.auc));
    row.insertCell().appendChild(num(candidate.f1));
    row.insertCell().textContent = candidate.converged ? "yes" : "no";
  });

  container.replaceChildren(
    el("section", { class: "prose" },
      el("h1", {}, "Propensity model validation"),
      el("p", {},
        "Discrimination of the selected propensity model on the held-out " +
        "test split. Moderate separation is expected: it reflects real " +
        "assignment bias that matching then removes. A near-perfect AUC " +
        "signals overlap problems rather than a good model.")),
    el("div", { class: "tiles" },
      el("div", { class: "tile" }, el("div", { class: "tile-value" }, num(test.auc)),
        el("div", { class: "tile-label" }, "AUC (test)")),
      el("div", { class: "tile" }, el("div", { class: "tile-value" }, num(test.f1)),
        el("div", { class: "tile-label" }, "F1 (test)"))),
    el("h2", {}, "Precision-recall curve"),
    prCurve(test.pr_curve, highlight),
    el("p", { class: "caption" },
      "Each point is a score threshold; the marker is the 0.5 threshold " +
      "used for the confusion counts."),
    el("h2", {}, "Feature importance"),
    coefficientBars(coefficients),
    el("p", { class: "caption" },
      "Standardized coefficients of the production model; longer bars mean " +
      "a stronger association with treatment assignment."),
    el("h2", {}, "Model ranking"),
    table,
  );
}
