import { readFileSync } from "node:fs";
import { describe, expect, it, vi } from "vitest";

import type { ApiClient } from "../src/api.js";
import { exportReport } from "../src/report.js";
import { NumericTemplate } from "../src/template.js";
import type { Selection } from "../src/types.js";

const reportFixture = readFileSync(
  new URL("./fixtures/report.txt", import.meta.url),
  "utf-8",
);

const selections = JSON.parse(
  readFileSync(new URL("./fixtures/selections.json", import.meta.url), "utf-8"),
) as Record<string, { request: { by: string; value: number }; response: Selection }>;

function clientWith(reportText: string) {
  const select = vi.fn(async (_id: string, req: { by: string; value: number }) => {
    for (const fx of Object.values(selections)) {
      if (fx.request.by === req.by && fx.request.value === req.value) return fx.response;
    }
    throw new Error(`no fixture for ${JSON.stringify(req)}`);
  });
  const report = vi.fn(async () => reportText);
  return { client: { select, report } as unknown as ApiClient, select, report };
}

describe("report export", () => {
  it("is byte-identical to the server text for the same selections", async () => {
    // the fixture was produced by the service for eta=0.2 and r=0.01,
    // and the CLI equality test on the Python side pins service == CLI
    const { client, report } = clientWith(reportFixture);
    const t = new NumericTemplate(client, "m1");
    t.enterValue(0, "eta", 0.2);
    await t.recalculate(0);
    t.enterValue(1, "r", 0.01);
    await t.recalculate(1);
    const text = await exportReport(client, "m1", t);
    expect(text).toBe(reportFixture);
    expect(report).toHaveBeenCalledWith("m1", [
      { by: "eta", value: 0.2 },
      { by: "r", value: 0.01 },
    ]);
    expect(text.startsWith("Selected Portfolios")).toBe(true);
    // comma-decimal scientific fields straight from the server
    expect(text).toMatch(/-?\d,\d{2}E[+-]\d{2}/);
  });

  it("filters rows that were never computed", async () => {
    const { client, report } = clientWith(reportFixture);
    const t = new NumericTemplate(client, "m1");
    t.enterValue(3, "eta", 0.2);
    await t.recalculate(3);
    // rows 0-2, 4, 5 untouched
    await exportReport(client, "m1", t);
    expect(report).toHaveBeenCalledWith("m1", [{ by: "eta", value: 0.2 }]);
  });

  it("rejects when no rows are computed", async () => {
    const { client } = clientWith(reportFixture);
    const t = new NumericTemplate(client, "m1");
    await expect(exportReport(client, "m1", t)).rejects.toThrow(/no computed rows/);
  });
});
