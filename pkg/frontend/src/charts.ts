/** Dependency-free SVG charts over pre-binned server data.
 *
 * Geometry (pixel scaling) is the only client-side arithmetic; every
 * numeric label is the server value verbatim. No client-side binning.
 */

import type { BalanceRow, GroupedHistogram } from "./types.js";
import { numText } from "./format.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl(tag: string, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, String(value));
  }
  return node;
}

function svgRoot(width: number, height: number, label: string): SVGElement {
  const svg = svgEl("svg", {
    viewBox: `0 0 ${width} ${height}`, width, height,
    role: "img", "aria-label": label,
  });
  return svg;
}

function verbatimLabel(value: number, x: number, y: number,
                       anchor = "middle"): SVGElement {
  const text = svgEl("text", {
    x, y, "text-anchor": anchor, class: "axis-label", "data-verbatim": "1",
  });
  text.textContent = numText(value);
  return text;
}

export interface BarSeries {
  counts: number[];
  cssClass: string;
}

/** Shared-edge histogram with one vertical bar group per bin. */
export function histogram(edges: number[], series: BarSeries[], title: string,
                          width = 420, height = 180): SVGElement {
  const svg = svgRoot(width, height, title);
  const pad = { left: 10, right: 10, top: 8, bottom: 22 };
  const plotW = width - pad.left - pad.right;
  const plotH = height - pad.top - pad.bottom;
  const nBins = edges.length - 1;
  const maxCount = Math.max(1, ...series.flatMap((s) => s.counts));
  const binW = plotW / nBins;
  const barW = binW / series.length;

  series.forEach((s, si) => {
    s.counts.forEach((count, bin) => {
      const h = (count / maxCount) * plotH;
      svg.appendChild(svgEl("rect", {
        x: pad.left + bin * binW + si * barW,
        y: pad.top + plotH - h,
        width: Math.max(barW - 0.5, 0.5),
        height: h,
        class: s.cssClass,
        "data-count": count,
      }));
    });
  });
  svg.appendChild(svgEl("line", {
    x1: pad.left, y1: pad.top + plotH, x2: pad.left + plotW, y2: pad.top + plotH,
    class: "axis",
  }));
  svg.appendChild(verbatimLabel(edges[0], pad.left, height - 6, "start"));
  svg.appendChild(verbatimLabel(edges[nBins], pad.left + plotW, height - 6, "end"));
  return svg;
}

/** Before/after panel pair for a treated-vs-control grouped histogram. */
export function beforeAfterHistograms(hist: GroupedHistogram, title: string): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "chart-pair";
  const before = document.createElement("figure");
  before.appendChild(histogram(hist.edges, [
    { counts: hist.treated_before, cssClass: "bar-treated" },
    { counts: hist.control_before, cssClass: "bar-control" },
  ], `${title} before matching`));
  before.appendChild(captionEl(`${title}: before matching`));
  const after = document.createElement("figure");
  after.appendChild(histogram(hist.edges, [
    { counts: hist.treated_after, cssClass: "bar-treated" },
    { counts: hist.control_after, cssClass: "bar-control" },
  ], `${title} after matching`));
  after.appendChild(captionEl(`${title}: after matching`));
  wrap.append(before, after);
  return wrap;
}

function captionEl(text: string): HTMLElement {
  const caption = document.createElement("figcaption");
  caption.textContent = text;
  return caption;
}

/** Precision-recall polyline with the threshold-0.5 point highlighted. */
export function prCurve(points: Array<[number, number]>,
                        highlight: [number, number] | null,
                        width = 300, height = 260): SVGElement {
  const svg = svgRoot(width, height, "precision-recall curve");
  const pad = 28;
  const plotW = width - 2 * pad;
  const plotH = height - 2 * pad;
  const x = (recall: number) => pad + recall * plotW;
  const y = (precision: number) => pad + (1 - precision) * plotH;

  svg.appendChild(svgEl("rect", {
    x: pad, y: pad, width: plotW, height: plotH, class: "plot-bg",
  }));
  const path = points.map(([r, p], i) => `${i ? "L" : "M"}${x(r)},${y(p)}`).join(" ");
  svg.appendChild(svgEl("path", { d: path, class: "pr-line", fill: "none" }));
  if (highlight) {
    svg.appendChild(svgEl("circle", {
      cx: x(highlight[0]), cy: y(highlight[1]), r: 4, class: "pr-highlight",
    }));
  }
  const axis = svgEl("text", { x: width / 2, y: height - 6, "text-anchor": "middle", class: "axis-label" });
  axis.textContent = "recall";
  svg.appendChild(axis);
  const axisY = svgEl("text", { x: 10, y: height / 2, class: "axis-label", transform: `rotate(-90 10 ${height / 2})`, "text-anchor": "middle" });
  axisY.textContent = "precision";
  svg.appendChild(axisY);
  return svg;
}

/** Love plot: one row per feature, SMD before (open) and after (filled),
 * with reference lines at +/- threshold. */
export function lovePlot(rows: BalanceRow[], threshold: number,
                         width = 460): HTMLElement {
  const rowH = 22;
  const pad = { left: 150, right: 16, top: 10, bottom: 24 };
  const height = pad.top + pad.bottom + rows.length * rowH;
  const svg = svgRoot(width, height, "love plot of standardized mean differences");
  const plotW = width - pad.left - pad.right;

  const values = rows.flatMap((r) => [r.smd_before, r.smd_after])
    .filter((v): v is number => v !== null)
    .map(Math.abs);
  const maxAbs = Math.max(threshold * 1.5, ...values) * 1.1;
  const x = (smd: number) => pad.left + ((smd + maxAbs) / (2 * maxAbs)) * plotW;

  svg.appendChild(svgEl("line", {
    x1: x(0), y1: pad.top, x2: x(0), y2: height - pad.bottom, class: "axis",
  }));
  for (const sign of [-1, 1]) {
    svg.appendChild(svgEl("line", {
      x1: x(sign * threshold), y1: pad.top,
      x2: x(sign * threshold), y2: height - pad.bottom,
      class: "ref-line",
    }));
  }
  rows.forEach((row, i) => {
    const cy = pad.top + i * rowH + rowH / 2;
    const name = svgEl("text", { x: pad.left - 8, y: cy + 4, "text-anchor": "end", class: "row-label" });
    name.textContent = row.name;
    svg.appendChild(name);
    if (row.smd_before !== null) {
      const dot = svgEl("circle", { cx: x(row.smd_before), cy, r: 5, class: "smd-before" });
      dot.appendChild(titleEl(`before: ${numText(row.smd_before)}`));
      svg.appendChild(dot);
    }
    if (row.smd_after !== null) {
      const dot = svgEl("circle", { cx: x(row.smd_after), cy, r: 5, class: "smd-after" });
      dot.appendChild(titleEl(`after: ${numText(row.smd_after)}`));
      svg.appendChild(dot);
    }
  });
  svg.appendChild(verbatimLabel(threshold, x(threshold), height - 8));
  const container = document.createElement("div");
  container.appendChild(svg);
  return container;
}

function titleEl(text: string): SVGElement {
  const title = document.createElementNS(SVG_NS, "title");
  title.textContent = text;
  return title;
}

/** Horizontal bars; lengths scale with |value|, labels show the signed
 * coefficient verbatim. Items must arrive pre-sorted. */
export function coefficientBars(items: Array<{ name: string; value: number }>,
                                width = 440): HTMLElement {
  const table = document.createElement("table");
  table.className = "coef-bars";
  const maxAbs = Math.max(1e-12, ...items.map((item) => Math.abs(item.value)));
  for (const item of items) {
    const row = table.insertRow();
    row.insertCell().textContent = item.name;
    const barCell = row.insertCell();
    const bar = document.createElement("div");
    bar.className = item.value >= 0 ? "bar-pos" : "bar-neg";
    bar.style.width = `${(Math.abs(item.value) / maxAbs) * (width / 2)}px`;
    barCell.appendChild(bar);
    const valueCell = row.insertCell();
    valueCell.dataset.verbatim = "1";
    valueCell.textContent = numText(item.value);
  }
  return table;
}

/** Line chart of server-sent (x, y) pairs, e.g. coefficient vs mix weight. */
export function lineChart(xs: number[], ys: Array<number | null>, title: string,
                          width = 420, height = 200): SVGElement {
  const svg = svgRoot(width, height, title);
  const pad = 30;
  const plotW = width - 2 * pad;
  const plotH = height - 2 * pad;
  const defined = ys.filter((v): v is number => v !== null);
  const yMin = Math.min(0, ...defined);
  const yMax = Math.max(0, ...defined);
  const span = yMax - yMin || 1;
  const px = (x: number) => pad + ((x - xs[0]) / ((xs[xs.length - 1] - xs[0]) || 1)) * plotW;
  const py = (y: number) => pad + (1 - (y - yMin) / span) * plotH;

  svg.appendChild(svgEl("line", {
    x1: pad, y1: py(0), x2: pad + plotW, y2: py(0), class: "axis",
  }));
  let d = "";
  xs.forEach((xv, i) => {
    const yv = ys[i];
    if (yv === null) return;
    d += `${d ? "L" : "M"}${px(xv)},${py(yv)} `;
    const dot = svgEl("circle", { cx: px(xv), cy: py(yv), r: 3, class: "line-dot" });
    dot.appendChild(titleEl(`w=${numText(xv)}: ${numText(yv)}`));
    svg.appendChild(dot);
  });
  svg.appendChild(svgEl("path", { d: d.trim(), class: "line-path", fill: "none" }));
  svg.appendChild(verbatimLabel(xs[0], pad, height - 8, "start"));
  svg.appendChild(verbatimLabel(xs[xs.length - 1], pad + plotW, height - 8, "end"));
  return svg;
}
