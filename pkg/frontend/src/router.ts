/** Hash router for the four pages. */

import { renderHome } from "./pages/home.js";
import { renderMatchingValidation } from "./pages/matching_validation.js";
import { renderModelValidation } from "./pages/model_validation.js";
import { renderTreatment } from "./pages/treatment.js";

export function route(container: HTMLElement, hash: string): void {
  const parts = hash.replace(/^#\/?/, "").split("/");
  switch (parts[0]) {
    case "treatment":
      renderTreatment(container);
      return;
    case "model":
      renderModelValidation(container, parts[1] ?? null);
      return;
    case "matching":
      renderMatchingValidation(container, parts[1] ?? null);
      return;
    default:
      renderHome(container);
  }
}

export function startRouter(container: HTMLElement): void {
  const rerender = () => route(container, window.location.hash);
  window.addEventListener("hashchange", rerender);
  rerender();
}
