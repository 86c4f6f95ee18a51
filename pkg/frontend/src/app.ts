/** Explorer wiring: upload, chart, Numeric Template, report export. */

import { ApiClient } from "./api.js";
import {
  clickValue,
  criticalMarkers,
  fitPixelMap,
  sampleFrontier,
  svgPath,
  tangentLine,
} from "./chart.js";
import { downloadText, exportReport } from "./report.js";
import {
  NumericTemplate,
  ROW_LABELS,
  STATUS_LABELS,
  rowCells,
} from "./template.js";
import type { FrontierPayload, SelectBy } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const COLUMNS = ["eta", "e", "v", "s", "rate", "k", "l", "status"];

const client = new ApiClient("");
let template: NumericTemplate | null = null;
let modelId: string | null = null;
let frontier: FrontierPayload | null = null;
let activeRow = 0;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function setStatus(message: string, isError = false): void {
  const bar = document.getElementById("status")!;
  bar.textContent = message;
  bar.className = isError ? "status error" : "status";
}

async function handleUpload(): Promise<void> {
  const pick = (id: string): File | undefined =>
    (document.getElementById(id) as HTMLInputElement).files?.[0] ?? undefined;
  const model = pick("file-model");
  const moments = pick("file-moments");
  const correl = pick("file-correl");
  if (!model || !moments || !correl) {
    setStatus("choose model, moments and correlation files first", true);
    return;
  }
  setStatus("compiling and sweeping…");
  try {
    const out = await client.uploadModel({
      model,
      moments,
      correl,
      deriv: pick("file-deriv"),
    });
    modelId = out.id;
    frontier = await client.frontier(modelId);
    template = new NumericTemplate(client, modelId);
    setStatus(`model ${out.id}: ${out.assets.length} assets, `
      + `${frontier.critical_points.length} critical points`);
    renderChart();
    renderTemplate();
  } catch (err) {
    setStatus(err instanceof Error ? err.message : String(err), true);
  }
}

function renderChart(): void {
  const host = document.getElementById("chart")!;
  host.textContent = "";
  if (!frontier) return;
  const width = 640;
  const height = 420;
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));

  if (frontier.critical_points.length === 0) {
    host.append(el("p", {}, "empty frontier"));
    return;
  }
  const pts = sampleFrontier(frontier);
  const map = fitPixelMap(pts, width, height);

  if (pts.length > 1) {
    const path = document.createElementNS(SVG_NS, "path");
    path.setAttribute("d", svgPath(pts, map));
    path.setAttribute("class", "frontier-path");
    path.setAttribute("fill", "none");
    svg.append(path);
  }

  // tangent line for the active row when it was selected by rate
  const row = template?.rows[activeRow];
  if (row && row.dirtyField === "r" && row.status !== "not_computed"
      && row.dirtyValue !== null && row.e !== null && row.s !== null) {
    const line = tangentLine(
      { e: row.e, s: row.s },
      row.dirtyValue,
      Math.max(...pts.map((p) => p.s)) * 1.05,
    );
    if (line) {
      const tangent = document.createElementNS(SVG_NS, "line");
      tangent.setAttribute("x1", String(map.toX(line[0].s)));
      tangent.setAttribute("y1", String(map.toY(line[0].e)));
      tangent.setAttribute("x2", String(map.toX(line[1].s)));
      tangent.setAttribute("y2", String(map.toY(line[1].e)));
      tangent.setAttribute("class", "tangent-line");
      svg.append(tangent);
    }
  }

  for (const cp of criticalMarkers(frontier)) {
    const marker = document.createElementNS(SVG_NS, "text");
    marker.setAttribute("x", String(map.toX(cp.s)));
    marker.setAttribute("y", String(map.toY(cp.e) + 4));
    marker.setAttribute("class", "critical-marker");
    marker.setAttribute("text-anchor", "middle");
    marker.textContent = "+";
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `critical point: e=${cp.e.toPrecision(4)} s=${cp.s.toPrecision(4)}`;
    marker.append(title);
    svg.append(marker);
  }

  // selected rows appear as circles on the curve
  if (template) {
    for (const r of template.rows) {
      if (r.status === "not_computed" || r.e === null || r.s === null) continue;
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(map.toX(r.s)));
      dot.setAttribute("cy", String(map.toY(r.e)));
      dot.setAttribute("r", "5");
      dot.setAttribute("class", "selection-dot");
      svg.append(dot);
    }
  }

  const fill = (button: "left" | "right", ev: MouseEvent) => {
    const rect = svg.getBoundingClientRect();
    const px = ((ev.clientX - rect.left) / rect.width) * width;
    const py = ((ev.clientY - rect.top) / rect.height) * height;
    const { field, value } = clickValue(map, px, py, button);
    template?.enterValue(activeRow, field, value);
    renderTemplate();
    setStatus(`row ${ROW_LABELS[activeRow]}: ${field} ← ${value.toPrecision(6)}`
      + " (press Recalculate)");
  };
  svg.addEventListener("click", (ev) => fill("left", ev));
  svg.addEventListener("contextmenu", (ev) => {
    ev.preventDefault();
    fill("right", ev);
  });
  host.append(svg);
}

function renderTemplate(): void {
  const host = document.getElementById("template")!;
  host.textContent = "";
  if (!template) return;

  const table = el("table", { class: "numeric-template" });
  const head = el("tr");
  head.append(el("th", {}, "row"));
  for (const c of COLUMNS) head.append(el("th", {}, c));
  head.append(el("th", {}, ""));
  table.append(head);

  template.rows.forEach((row, i) => {
    const tr = el("tr", { class: i === activeRow ? "active-row" : "" });
    const pick = el("td", {}, row.label);
    pick.addEventListener("click", () => {
      activeRow = i;
      renderTemplate();
      renderChart();
    });
    tr.append(pick);
    const cells = rowCells(row);
    cells.forEach((text, col) => {
      const td = el("td");
      // entry columns are eta, e, s and rate; v, k, l and status are outputs
      const field = ["eta", "e", null, "s", "r", null, null, null][col] as SelectBy | null;
      if (field) {
        const input = el("input", {
          value: row.dirtyField === field && row.dirtyValue !== null
            ? String(row.dirtyValue)
            : text === "—" ? "" : text,
          "aria-label": `${field} for row ${row.label}`,
          class: row.dirtyField === field ? "dirty" : "",
        }) as HTMLInputElement;
        input.addEventListener("change", () => {
          const value = Number(input.value);
          if (Number.isFinite(value)) {
            activeRow = i;
            template!.enterValue(i, field, value);
            renderTemplate();
          }
        });
        td.append(input);
      } else if (col === 7) {
        const glyph = el("span", {
          class: "glyph",
          role: "img",
          "aria-label": STATUS_LABELS[row.status] ?? row.status,
          title: STATUS_LABELS[row.status] ?? row.status,
        }, text);
        td.append(glyph);
      } else {
        td.textContent = text;
      }
      tr.append(td);
    });
    const actions = el("td");
    const recalc = el("button", {}, "Recalculate");
    recalc.addEventListener("click", async () => {
      activeRow = i;
      try {
        await template!.recalculate(i);
        setStatus(`row ${row.label} recalculated`);
      } catch (err) {
        setStatus(err instanceof Error ? err.message : String(err), true);
      }
      renderTemplate();
      renderChart();
      renderComposition(i);
    });
    actions.append(recalc);
    tr.append(actions);
    table.append(tr);
  });
  host.append(table);
  if (row_has_error(template)) {
    host.append(el("p", { class: "error" }, row_has_error(template) ?? ""));
  }
}

function row_has_error(t: NumericTemplate): string | null {
  for (const r of t.rows) if (r.error) return `row ${r.label}: ${r.error}`;
  return null;
}

function renderComposition(rowIndex: number): void {
  const host = document.getElementById("composition")!;
  host.textContent = "";
  const row = template?.rows[rowIndex];
  if (!row || row.status === "not_computed") return;
  host.append(el("h3", {}, `Composition of selection ${row.label}`));
  const list = el("ul");
  for (const [name, w] of Object.entries(row.composition).sort((a, b) => b[1] - a[1])) {
    list.append(el("li", {}, `${w.toExponential(2).toUpperCase()} @ ${name}`));
  }
  host.append(list);
}

async function handleReport(): Promise<void> {
  if (!template || !modelId) {
    setStatus("upload a model first", true);
    return;
  }
  try {
    const text = await exportReport(client, modelId, template);
    downloadText("REPORT.CP", text);
    setStatus("report downloaded");
  } catch (err) {
    setStatus(err instanceof Error ? err.message : String(err), true);
  }
}

export function start(): void {
  document.getElementById("upload")!.addEventListener("click", () => void handleUpload());
  document.getElementById("report")!.addEventListener("click", () => void handleReport());
  setStatus("choose the model files and press Compile");
}

if (typeof document !== "undefined" && document.getElementById("upload")) {
  start();
}
