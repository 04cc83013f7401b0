/** The display-only contract: every number the UI renders is a server
 * value, never a client-side computation. All data numbers enter the DOM
 * through the data-verbatim helper; here every such span across all three
 * data-bearing pages must parse back to a value present in the fixture
 * documents. */

import { describe, expect, it } from "vitest";

import { renderLoaded as renderMatching } from "../src/pages/matching_validation.js";
import { renderLoaded as renderModel } from "../src/pages/model_validation.js";
import { renderResults } from "../src/pages/treatment.js";
import { collectNumbers, fixture, verbatimSpans } from "./helpers.js";

const results = fixture("results");
const previewOk = fixture("preview_ok");

const corpus = collectNumbers(results);
collectNumbers(previewOk, corpus);

function checkAll(render: (root: HTMLElement) => void): number {
  document.body.innerHTML = '<main id="app"></main>';
  const app = document.getElementById("app")!;
  render(app);
  const spans = verbatimSpans(app);
  expect(spans.length).toBeGreaterThan(0);
  for (const text of spans) {
    if (text === "–") continue; // null placeholder
    const value = JSON.parse(text);
    expect(corpus.has(value), `rendered number ${text} not found in any API fixture`)
      .toBe(true);
  }
  return spans.length;
}

describe("every displayed number appears in the recorded API responses", () => {
  it("treatment results panel", () => {
    const count = checkAll((root) => renderResults(root, "id", results));
    expect(count).toBeGreaterThan(8); // tiles + axis labels
  });

  it("model validation page", () => {
    checkAll((root) => renderModel(root, results));
  });

  it("matching validation page", () => {
    const count = checkAll((root) => renderMatching(root, results));
    expect(count).toBeGreaterThan(15); // balance table + histogram edges + sweep
  });
});
