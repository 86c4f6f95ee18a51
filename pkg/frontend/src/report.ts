/** Report export: the text always comes from the service so it is
 * byte-identical to the command-line report for the same selections. */

import type { ApiClient } from "./api.js";
import type { NumericTemplate } from "./template.js";

export async function exportReport(
  client: ApiClient,
  modelId: string,
  template: NumericTemplate,
): Promise<string> {
  const selections = template.computedRequests();
  if (selections.length === 0) {
    throw new Error("no computed rows to report");
  }
  return client.report(modelId, selections);
}

export function downloadText(filename: string, text: string): void {
  const blob = new Blob([text], { type: "text/plain" });
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = filename;
  a.click();
  URL.revokeObjectURL(url);
}
