import { readFileSync } from "node:fs";
import { describe, expect, it, vi } from "vitest";

import type { ApiClient } from "../src/api.js";
import {
  NumericTemplate,
  ROW_LABELS,
  STATUS_GLYPHS,
  STATUS_LABELS,
  emptyRow,
  rowCells,
} from "../src/template.js";
import type { Selection } from "../src/types.js";

const fixtures = JSON.parse(
  readFileSync(new URL("./fixtures/selections.json", import.meta.url), "utf-8"),
) as Record<string, { request: { by: string; value: number }; response: Selection }>;

function mockClient(responder: (req: { by: string; value: number }) => Promise<Selection>) {
  return { select: vi.fn((_id: string, req: { by: string; value: number }) => responder(req)) } as unknown as ApiClient;
}

describe("NumericTemplate", () => {
  it("has six rows labeled A through F, all empty", () => {
    const t = new NumericTemplate(mockClient(async () => fixtures.interior.response), "m1");
    expect(t.rows.map((r) => r.label)).toEqual(["A", "B", "C", "D", "E", "F"]);
    for (const row of t.rows) {
      expect(row.status).toBe("not_computed");
      expect(row.glyph).toBe("∅");
    }
  });

  it("recalculated row carries the service JSON in all eight columns", async () => {
    const fx = fixtures.interior;
    const client = mockClient(async () => fx.response);
    const t = new NumericTemplate(client, "m1");
    t.enterValue(0, fx.request.by as never, fx.request.value);
    const row = await t.recalculate(0);
    expect(row.eta).toBe(fx.response.eta);
    expect(row.e).toBe(fx.response.e);
    expect(row.v).toBe(fx.response.v);
    expect(row.s).toBe(fx.response.s);
    expect(row.r).toBe(fx.response.r);
    expect(row.k).toBe(fx.response.k);
    expect(row.l).toBe(fx.response.l);
    expect(row.status).toBe(fx.response.status);
    expect(row.glyph).toBe(fx.response.glyph);
    expect(row.composition).toEqual(fx.response.composition);
    expect(client.select).toHaveBeenCalledWith("m1", fx.request);
  });

  it("renders the manual's status glyph set", async () => {
    expect(Object.values(STATUS_GLYPHS).sort()).toEqual(
      ["+", "↑", "↓", "∅", "√"].sort(),
    );
    for (const key of ["interior", "critical", "high", "low", "rate"] as const) {
      const fx = fixtures[key];
      const t = new NumericTemplate(mockClient(async () => fx.response), "m1");
      t.enterValue(0, fx.request.by as never, fx.request.value);
      const row = await t.recalculate(0);
      expect(row.glyph).toBe(STATUS_GLYPHS[fx.response.status]);
      expect(STATUS_LABELS[row.status]).toBeTruthy();
    }
  });

  it("critical eta entry shows the + glyph", async () => {
    const fx = fixtures.critical;
    const t = new NumericTemplate(mockClient(async () => fx.response), "m1");
    t.enterValue(2, "eta", fx.request.value);
    const row = await t.recalculate(2);
    expect(row.glyph).toBe("+");
  });

  it("value above the frontier clamps with the up arrow", async () => {
    const fx = fixtures.high;
    const t = new NumericTemplate(mockClient(async () => fx.response), "m1");
    t.enterValue(1, "e", fx.request.value);
    const row = await t.recalculate(1);
    expect(row.glyph).toBe("↑");
    expect(row.l).toBe(fx.response.l);
  });

  it("recalculating twice without edits is idempotent", async () => {
    const fx = fixtures.interior;
    const client = mockClient(async () => fx.response);
    const t = new NumericTemplate(client, "m1");
    t.enterValue(0, fx.request.by as never, fx.request.value);
    const first = await t.recalculate(0);
    const second = await t.recalculate(0);
    expect(second).toEqual(first);
    expect(client.select).toHaveBeenCalledTimes(2);
    expect((client.select as ReturnType<typeof vi.fn>).mock.calls[0]).toEqual(
      (client.select as ReturnType<typeof vi.fn>).mock.calls[1],
    );
  });

  it("serializes concurrent recalculations on one row", async () => {
    const order: string[] = [];
    let release1: (sel: Selection) => void = () => undefined;
    const first = new Promise<Selection>((resolve) => {
      release1 = resolve;
    });
    let calls = 0;
    const client = mockClient(async () => {
      calls += 1;
      if (calls === 1) {
        order.push("start1");
        return first;
      }
      order.push("start2");
      return fixtures.critical.response;
    });
    const t = new NumericTemplate(client, "m1");
    t.enterValue(0, "eta", 0.2);
    const p1 = t.recalculate(0);
    const p2 = t.recalculate(0);
    // the second request must not start before the first resolves
    await new Promise((r) => setTimeout(r, 10));
    expect(order).toEqual(["start1"]);
    release1(fixtures.interior.response);
    await p1;
    await p2;
    expect(order).toEqual(["start1", "start2"]);
  });

  it("failed recalculation flags the row with the empty-set glyph", async () => {
    const client = mockClient(async () => {
      throw new Error("boom");
    });
    const t = new NumericTemplate(client, "m1");
    t.enterValue(0, "e", 0.1);
    await expect(t.recalculate(0)).rejects.toThrow("boom");
    expect(t.rows[0].glyph).toBe("∅");
    expect(t.rows[0].error).toContain("boom");
  });

  it("recalculate without a typed value is rejected", async () => {
    const t = new NumericTemplate(mockClient(async () => fixtures.interior.response), "m1");
    await expect(t.recalculate(0)).rejects.toThrow(/type a value/);
  });

  it("rowCells renders eight display columns", () => {
    const row = emptyRow(ROW_LABELS[0]);
    const cells = rowCells(row);
    expect(cells).toHaveLength(8);
    expect(cells[7]).toBe("∅");
    const fx = fixtures.low;
    const t = new NumericTemplate(mockClient(async () => fx.response), "m1");
    t.enterValue(0, "s", 0.0);
    return t.recalculate(0).then(() => {
      const filled = rowCells(t.rows[0]);
      expect(filled[7]).toBe("↓");
      // null tangency rate at the minimum-variance point renders as a dash
      expect(filled[4]).toBe("—");
    });
  });
});
