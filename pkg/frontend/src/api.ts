/** Thin typed client over the service; every number shown in the UI
 * originates here — no portfolio math happens in the browser. */

import type { FrontierPayload, SelectRequest, Selection } from "./types.js";

export interface ServiceError {
  code: string;
  message: string;
  line?: number;
}

export class ApiError extends Error {
  constructor(public status: number, public body: ServiceError) {
    super(`${body.code}: ${body.message}`);
  }
}

async function parseError(resp: Response): Promise<never> {
  let body: ServiceError;
  try {
    body = (await resp.json()) as ServiceError;
  } catch {
    body = { code: "http_error", message: resp.statusText };
  }
  throw new ApiError(resp.status, body);
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  async uploadModel(files: {
    model: Blob;
    moments: Blob;
    correl: Blob;
    deriv?: Blob;
  }): Promise<{ id: string; assets: string[] }> {
    const form = new FormData();
    form.append("model", files.model, "MODEL.CP");
    form.append("moments", files.moments, "MODPS.CP");
    form.append("correl", files.correl, "CORREL.M");
    if (files.deriv) form.append("deriv", files.deriv, "DERIV.CP");
    const resp = await this.fetchFn(`${this.base}/api/models`, {
      method: "POST",
      body: form,
    });
    if (!resp.ok) await parseError(resp);
    return resp.json();
  }

  async frontier(modelId: string): Promise<FrontierPayload> {
    const resp = await this.fetchFn(`${this.base}/api/models/${modelId}/frontier`);
    if (!resp.ok) await parseError(resp);
    return resp.json();
  }

  async select(modelId: string, req: SelectRequest): Promise<Selection> {
    const resp = await this.fetchFn(`${this.base}/api/models/${modelId}/select`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!resp.ok) await parseError(resp);
    return resp.json();
  }

  async report(modelId: string, selections: SelectRequest[]): Promise<string> {
    const resp = await this.fetchFn(`${this.base}/api/models/${modelId}/report`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ selections }),
    });
    if (!resp.ok) await parseError(resp);
    return resp.text();
  }
}
