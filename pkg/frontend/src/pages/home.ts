/** Static homepage: method overview, ATE vs ATT, query structure, knobs.
 * Performs no API calls. */

import { el } from "../format.js";

export function renderHome(container: HTMLElement): void {
  container.replaceChildren(
    el("section", { class: "prose", id: "home" },
      el("h1", {}, "Propensity score matching workbench"),
      el("p", {},
        "This tool estimates the causal effect of a treatment from " +
        "observational data. It matches each treated unit to control units " +
        "with a similar propensity score (the estimated probability of " +
        "receiving the treatment given observed characteristics), then " +
        "compares outcomes inside the matched sample."),

      el("h2", {}, "Counterfactuals, ATE and ATT"),
      el("p", {},
        "Each unit has two potential outcomes: with and without treatment. " +
        "Only one is ever observed; matching builds a stand-in for the " +
        "missing one from similar control units."),
      el("ul", {},
        el("li", {}, el("strong", {}, "ATE"),
          " is the average treatment effect over the whole population."),
        el("li", {}, el("strong", {}, "ATT"),
          " is the average effect on the treated units only, which is what " +
          "this workbench reports: every matched contrast is anchored at a " +
          "treated unit.")),

      el("h2", {}, "Treatment expressions"),
      el("p", {},
        "A bespoke treatment is a boolean expression over dataset columns: " +
        "comparisons combined with NOT, AND, OR (tightest binding first). " +
        "Categorical columns compare against quoted strings with == and !=; " +
        "numeric columns compare against numbers with any operator."),
      el("pre", {}, "age > 30 AND country == 'NL'\nNOT (sessions < 3 OR bookings < 1)"),
      el("p", {},
        "Columns used in the expression define the treatment, so they are " +
        "excluded from the propensity model automatically."),

      el("h2", {}, "Adjustable settings"),
      el("ul", {},
        el("li", {}, el("strong", {}, "Historical days"),
          ": restricts the analysis to observations within the chosen window " +
          "before the reference date."),
        el("li", {}, el("strong", {}, "Bootstrap samples"),
          ": how many resampled re-estimates build the confidence interval; " +
          "more samples give a steadier interval and a longer run."),
        el("li", {}, el("strong", {}, "Primary metric"),
          ": the outcome column whose treated-vs-matched-control difference " +
          "is reported."),
        el("li", {}, el("strong", {}, "Seed"),
          ": fixed random seed; identical settings and seed reproduce " +
          "results exactly.")),

      el("h2", {}, "Workflow pages"),
      el("nav", {},
        el("ul", {},
          el("li", {}, el("a", { href: "#/treatment" }, "Treatment: define and run an analysis")),
          el("li", {}, el("a", { href: "#/model" }, "Model validation: propensity model quality")),
          el("li", {}, el("a", { href: "#/matching" }, "Matching validation: balance diagnostics")))),
    ),
  );
}
