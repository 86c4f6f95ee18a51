/** The Numeric Template: six selection rows A..F, eight columns.
 *
 * A row takes one typed entry column (eta, e, s or r); Recalculate
 * sends it to the service and copies the returned eight columns back
 * verbatim.  Recalculations on one row are serialized: a second request
 * waits for the first to settle.
 */

import type { ApiClient } from "./api.js";
import type { SelectBy, Selection } from "./types.js";

export const ROW_LABELS = ["A", "B", "C", "D", "E", "F"] as const;
export type RowLabel = (typeof ROW_LABELS)[number];

export const STATUS_GLYPHS: Record<string, string> = {
  not_computed: "∅",
  critical: "+",
  interior: "√",
  out_of_range_high: "↑",
  out_of_range_low: "↓",
};

/** Accessible descriptions rendered alongside the manual's symbols. */
export const STATUS_LABELS: Record<string, string> = {
  not_computed: "not recalculated yet",
  critical: "on a critical point",
  interior: "on the frontier between critical points",
  out_of_range_high: "input above the frontier range",
  out_of_range_low: "input below the frontier range",
};

export interface TemplateRow {
  label: RowLabel;
  dirtyField: SelectBy | null;
  dirtyValue: number | null;
  eta: number | null;
  e: number | null;
  v: number | null;
  s: number | null;
  r: number | null;
  k: number | null;
  l: number | null;
  status: string;
  glyph: string;
  composition: Record<string, number>;
  error: string | null;
}

export function emptyRow(label: RowLabel): TemplateRow {
  return {
    label,
    dirtyField: null,
    dirtyValue: null,
    eta: null,
    e: null,
    v: null,
    s: null,
    r: null,
    k: null,
    l: null,
    status: "not_computed",
    glyph: STATUS_GLYPHS.not_computed,
    composition: {},
    error: null,
  };
}

export function applySelection(row: TemplateRow, sel: Selection): TemplateRow {
  return {
    ...row,
    eta: sel.eta,
    e: sel.e,
    v: sel.v,
    s: sel.s,
    r: sel.r,
    k: sel.k,
    l: sel.l,
    status: sel.status,
    glyph: sel.glyph,
    composition: { ...sel.composition },
    error: null,
  };
}

export class NumericTemplate {
  rows: TemplateRow[];
  private chains: Promise<unknown>[];

  constructor(
    private client: ApiClient,
    private modelId: string,
  ) {
    this.rows = ROW_LABELS.map((label) => emptyRow(label));
    this.chains = this.rows.map(() => Promise.resolve());
  }

  setModel(modelId: string): void {
    this.modelId = modelId;
    this.rows = ROW_LABELS.map((label) => emptyRow(label));
    this.chains = this.rows.map(() => Promise.resolve());
  }

  /** Exactly one entry column is dirty per recalculation. */
  enterValue(rowIndex: number, field: SelectBy, value: number): void {
    const row = this.rows[rowIndex];
    this.rows[rowIndex] = { ...row, dirtyField: field, dirtyValue: value };
  }

  /** Recalculate the row from its dirty column; serialized per row. */
  recalculate(rowIndex: number): Promise<TemplateRow> {
    const run = async (): Promise<TemplateRow> => {
      const row = this.rows[rowIndex];
      if (row.dirtyField === null || row.dirtyValue === null) {
        throw new Error(`row ${row.label}: type a value into eta, e, s or r first`);
      }
      try {
        const sel = await this.client.select(this.modelId, {
          by: row.dirtyField,
          value: row.dirtyValue,
        });
        this.rows[rowIndex] = applySelection(this.rows[rowIndex], sel);
      } catch (err) {
        this.rows[rowIndex] = {
          ...this.rows[rowIndex],
          status: "not_computed",
          glyph: STATUS_GLYPHS.not_computed,
          error: err instanceof Error ? err.message : String(err),
        };
        throw err;
      }
      return this.rows[rowIndex];
    };
    const next = this.chains[rowIndex].then(run, run);
    this.chains[rowIndex] = next.catch(() => undefined);
    return next;
  }

  /** Rows that have been computed, with the requests that produced them. */
  computedRequests(): { by: SelectBy; value: number }[] {
    return this.rows
      .filter((r) => r.status !== "not_computed" && r.dirtyField !== null
        && r.dirtyValue !== null)
      .map((r) => ({ by: r.dirtyField as SelectBy, value: r.dirtyValue as number }));
  }
}

const NUM = (x: number | null): string =>
  x === null ? "—" : x.toExponential(2).toUpperCase();

/** Display strings for the eight columns of one row. */
export function rowCells(row: TemplateRow): string[] {
  return [
    NUM(row.eta),
    NUM(row.e),
    NUM(row.v),
    NUM(row.s),
    NUM(row.r),
    row.k === null ? "—" : String(row.k),
    NUM(row.l),
    row.glyph,
  ];
}
