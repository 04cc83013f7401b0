/** Display helpers enforcing the display-only contract.
 *
 * Every data number entering the DOM goes through `num()`, which renders
 * the server value verbatim (JSON literal text, no rounding) inside a
 * span marked `data-verbatim`. The test suite asserts that the text of
 * every such span appears verbatim in the recorded API fixtures, which
 * is what rules out client-side recomputation.
 */

export function numText(value: number | null | undefined): string {
  if (value === null || value === undefined) return "–";
  return JSON.stringify(value);
}

export function num(value: number | null | undefined): HTMLSpanElement {
  const span = document.createElement("span");
  span.dataset.verbatim = "1";
  span.textContent = numText(value);
  return span;
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

/** A labelled big-number tile (the results-page "icons"). */
export function statTile(label: string, value: Node | string): HTMLElement {
  return el("div", { class: "tile" },
    el("div", { class: "tile-value" }, value),
    el("div", { class: "tile-label" }, label));
}
