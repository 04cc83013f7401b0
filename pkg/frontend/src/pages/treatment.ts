/** Treatment page: analysis form with live expression preview, staged
 * progress bar, and the results panel. */

import { ApiError, getResults, getSchema, listDatasets, previewTreatment, submitRun } from "../api.js";
import { histogram } from "../charts.js";
import { el, num, statTile } from "../format.js";
import { pollRun } from "../poll.js";
import type { DatasetSchema, RunResults, RunState } from "../types.js";

export const STAGE_ORDER = [
  "ingesting_characteristics",
  "assigning_treatment",
  "selecting_model",
  "matching",
  "bootstrapping",
  "diagnostics",
  "sensitivity",
] as const;

export function renderTreatment(container: HTMLElement): void {
  const form = el("form", { class: "run-form", id: "treatment-form" });
  const runView = el("section", { class: "run-view" });
  container.replaceChildren(
    el("section", { class: "prose" }, el("h1", {}, "Define a treatment")),
    form, runView);

  const datasetSelect = el("select", { id: "dataset-select", required: "1" });
  const metricSelect = el("select", { id: "metric-select" });
  const historyInput = el("input", { id: "history-days", type: "number", min: "1", placeholder: "all history" });
  const samplesInput = el("input", { id: "bootstrap-samples", type: "number", min: "2", value: "200" });
  const seedInput = el("input", { id: "seed", type: "number", value: "1", required: "1" });
  const exprInput = el("textarea", {
    id: "expression", rows: "2",
    placeholder: "e.g. has_picture == 0 AND rank_top10 == 1",
  });
  const previewBox = el("div", { id: "preview", class: "preview" });
  const submitButton = el("button", { type: "submit", id: "submit-run", disabled: "1" }, "Run analysis");

  form.append(
    field("Dataset", datasetSelect),
    field("Primary metric", metricSelect),
    field("Historical days", historyInput),
    field("Bootstrap samples", samplesInput),
    field("Seed", seedInput),
    field("Treatment expression", exprInput),
    previewBox,
    submitButton,
  );

  let schema: DatasetSchema | null = null;
  let previewOk = false;

  function setSubmitEnabled(): void {
    if (previewOk && datasetSelect.value) submitButton.removeAttribute("disabled");
    else submitButton.setAttribute("disabled", "1");
  }

  async function loadSchema(): Promise<void> {
    if (!datasetSelect.value) return;
    schema = await getSchema(datasetSelect.value);
    metricSelect.replaceChildren(
      el("option", { value: schema.outcome }, `${schema.outcome} (declared outcome)`),
      ...schema.covariates
        .filter((c) => c.kind === "continuous")
        .map((c) => el("option", { value: c.name }, c.name)));
  }

  void listDatasets().then(async ({ datasets }) => {
    datasetSelect.replaceChildren(
      ...datasets.map((d) =>
        el("option", { value: d.dataset_id }, `${d.dataset_id} (${d.n_units} units)`)));
    await loadSchema();
  });
  datasetSelect.addEventListener("change", () => void loadSchema());

  exprInput.addEventListener("input", () => {
    const expression = (exprInput as HTMLTextAreaElement).value.trim();
    previewOk = false;
    setSubmitEnabled();
    if (!expression || !datasetSelect.value) {
      previewBox.replaceChildren();
      return;
    }
    previewTreatment(datasetSelect.value, expression).then(
      (counts) => {
        previewOk = true;
        previewBox.className = "preview ok";
        previewBox.replaceChildren(
          "treated: ", num(counts.n_treated), "  control: ", num(counts.n_control));
        setSubmitEnabled();
      },
      (error) => {
        previewOk = false;
        previewBox.className = "preview error";
        const message = error instanceof ApiError
          ? (error.body.field_errors?.expression ?? error.body.message)
          : String(error);
        previewBox.replaceChildren(el("span", { class: "inline-error" }, message));
        setSubmitEnabled();
      },
    );
  });

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const manifest: Record<string, unknown> = {
      seed: Number((seedInput as HTMLInputElement).value),
      dataset_id: datasetSelect.value,
      treatment: { expression: (exprInput as HTMLTextAreaElement).value.trim() },
      outcome: metricSelect.value && schema && metricSelect.value !== schema.outcome
        ? metricSelect.value : null,
      history_days: (historyInput as HTMLInputElement).value
        ? Number((historyInput as HTMLInputElement).value) : null,
      bootstrap: { n_samples: Number((samplesInput as HTMLInputElement).value) },
    };
    submitRun(manifest).then(
      ({ run_id }) => trackRun(runView, run_id),
      (error) => renderSubmitErrors(form, previewBox, error),
    );
  });
}

function field(label: string, control: HTMLElement): HTMLElement {
  return el("label", { class: "field" }, el("span", {}, label), control);
}

function renderSubmitErrors(form: HTMLElement, fallback: HTMLElement, error: unknown): void {
  form.querySelectorAll(".inline-error.submit").forEach((n) => n.remove());
  if (error instanceof ApiError && error.body.field_errors) {
    for (const [fieldName, message] of Object.entries(error.body.field_errors)) {
      const target = fieldName.startsWith("treatment") ? fallback : form;
      target.appendChild(el("span", { class: "inline-error submit" }, `${fieldName}: ${message}`));
    }
  } else {
    fallback.appendChild(el("span", { class: "inline-error submit" }, String(error)));
  }
}

export function trackRun(view: HTMLElement, runId: string): { done: Promise<RunState> } {
  const stageLabel = el("div", { class: "stage-label", id: "stage-label" }, "queued");
  const bar = el("div", { class: "pbar" });
  const fill = el("div", { class: "pbar-fill" });
  bar.appendChild(fill);
  const resultsBox = el("div", { id: "run-results" });
  view.replaceChildren(
    el("h2", {}, `Run ${runId}`),
    el("div", { class: "progress", id: "run-progress" }, stageLabel, bar),
    resultsBox);

  const handle = pollRun(runId, (state) => {
    stageLabel.textContent = state.status === "running" && state.stage
      ? state.stage : state.status;
    stageLabel.dataset.stage = state.stage ?? "";
    fill.style.width = `${state.progress * 100}%`;
    fill.dataset.progress = String(state.progress);
    if (state.status === "succeeded") {
      void getResults(runId).then((results) => renderResults(resultsBox, runId, results));
    } else if (state.status === "failed") {
      const detail = state.error ? `${state.error.stage}: ${state.error.message}` : "failed";
      resultsBox.replaceChildren(el("div", { class: "inline-error" }, detail));
    }
  });
  return { done: handle.done };
}

export function renderResults(box: HTMLElement, runId: string, results: RunResults): void {
  const hist = results.bootstrap_hist;
  box.replaceChildren(
    el("h3", {}, "Estimated change in the primary metric"),
    el("div", { class: "tiles" },
      statTile("ATT", num(results.att)),
      statTile(`CI (percentile, alpha=${results.alpha})`,
        el("span", {}, "[", num(results.ci_percentile[0]), ", ", num(results.ci_percentile[1]), "]")),
      statTile("symmetric CI",
        el("span", {}, "[", num(results.ci_symmetric[0]), ", ", num(results.ci_symmetric[1]), "]")),
      statTile("treated users", num(results.counts.n_treated)),
      statTile("matched treated", num(results.counts.n_treated_matched)),
      statTile("sample size", num(results.counts.sample_size)),
      statTile("days considered", num(results.counts.history_days)),
    ),
    el("h3", {}, "Bootstrap distribution of the ATT"),
    histogram(hist.edges, [{ counts: hist.counts, cssClass: "bar-boot" }],
      "bootstrap ATT histogram"),
    el("p", { class: "caption" },
      "Each bar counts bootstrap re-estimates of the ATT; a tight, " +
      "single-peaked shape around the point estimate indicates a stable result."),
    el("nav", {},
      el("a", { href: `#/model/${runId}` }, "Model validation"), " · ",
      el("a", { href: `#/matching/${runId}` }, "Matching validation")),
  );
}
