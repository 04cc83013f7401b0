/** Matching validation: propensity distributions before/after, love plot,
 * per-covariate densities, contingency tables, and the sensitivity sweep. */

import { getResults } from "../api.js";
import { beforeAfterHistograms, lineChart, lovePlot } from "../charts.js";
import { el, num } from "../format.js";
import type { ContingencyTable, RunResults } from "../types.js";

export function renderMatchingValidation(container: HTMLElement, runId: string | null): void {
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
  const diag = results.diagnostics;
  const parts: Array<HTMLElement | SVGElement> = [];

  parts.push(el("section", { class: "prose" },
    el("h1", {}, "Matching validation"),
    el("p", {},
      "These plots verify that conditioning on the propensity score " +
      "balanced the user characteristics between the matched groups.")));

  parts.push(el("h2", {}, "Propensity scores before and after matching"));
  parts.push(beforeAfterHistograms(diag.score_hist, "propensity score"));
  parts.push(el("p", { class: "caption" },
    "Desired output: the treated and control score distributions should " +
    "overlap substantially after matching; disjoint humps mean matching " +
    "could not find comparable controls."));

  parts.push(el("h2", {}, "Covariate balance (love plot)"));
  parts.push(lovePlot(diag.balance, diag.balance_threshold));
  parts.push(el("p", { class: "caption" },
    "Desired output: after matching (filled dots) every standardized mean " +
    "difference should sit inside the reference band around zero; before " +
    "matching (open dots) they may be far outside."));

  const balanceTable = el("table", { class: "balance", id: "balance-table" });
  const head = balanceTable.createTHead().insertRow();
  for (const h of ["feature", "SMD before", "SMD after", "t before", "p before", "t after", "p after"]) {
    head.appendChild(el("th", {}, h));
  }
  for (const row of diag.balance) {
    const tr = balanceTable.insertRow();
    tr.insertCell().textContent = row.name;
    tr.insertCell().appendChild(num(row.smd_before));
    tr.insertCell().appendChild(num(row.smd_after));
    tr.insertCell().appendChild(num(row.ttest_before[0]));
    tr.insertCell().appendChild(num(row.ttest_before[1]));
    tr.insertCell().appendChild(num(row.ttest_after[0]));
    tr.insertCell().appendChild(num(row.ttest_after[1]));
  }
  parts.push(balanceTable);

  if (diag.densities.length > 0) {
    parts.push(el("h2", {}, "Continuous covariate distributions"));
    for (const hist of diag.densities) {
      parts.push(beforeAfterHistograms(hist, hist.name));
    }
    parts.push(el("p", { class: "caption" },
      "Desired output: within each panel the treated and control bars " +
      "should align after matching."));
  }

  if (diag.contingency.length > 0) {
    parts.push(el("h2", {}, "Categorical covariates"));
    for (const table of diag.contingency) {
      parts.push(contingencyTable(table));
    }
  }

  if (results.sensitivity) {
    const sweep = results.sensitivity;
    parts.push(el("h2", {}, "Sensitivity to an unobserved confounder"));
    const ws = sweep.summary.map((row) => row.w);
    parts.push(lineChart(ws, sweep.summary.map((row) => row.injected_coef_mean),
      "synthetic confounder coefficient vs mix weight"));
    parts.push(el("p", { class: "caption" },
      "A synthetic covariate mixes noise with the real signal in 10% steps; " +
      "its propensity coefficient grows with the signal share. Desired " +
      "output: near zero on the left, rising smoothly to the right."));
    parts.push(lineChart(ws, sweep.summary.map((row) => row.att_shift_mean),
      "ATT shift vs mix weight"));
    parts.push(el("p", { class: "caption" },
      "How far the ATT moves when the synthetic confounder is adjusted " +
      "for; large shifts warn that an unobserved variable of comparable " +
      "strength would change the conclusion."));
  }

  container.replaceChildren(...parts);
}

function contingencyTable(data: ContingencyTable): HTMLElement {
  const table = el("table", { class: "contingency" });
  table.appendChild(el("caption", {}, data.name));
  const head = table.createTHead().insertRow();
  for (const h of ["category", "treated before", "control before", "treated after", "control after"]) {
    head.appendChild(el("th", {}, h));
  }
  data.categories.forEach((cat, i) => {
    const row = table.insertRow();
    row.insertCell().textContent = cat;
    row.insertCell().appendChild(num(data.treated_before[i]));
    row.insertCell().appendChild(num(data.control_before[i]));
    row.insertCell().appendChild(num(data.treated_after[i]));
    row.insertCell().appendChild(num(data.control_after[i]));
  });
  return table;
}
