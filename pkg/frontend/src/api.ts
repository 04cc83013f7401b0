/** Thin typed client over the /api/v1 surface. One base-URL setting. */

import type {
  ApiErrorBody, DatasetInfo, DatasetSchema, DiagnosticsBundle,
  PreviewCounts, RunResults, RunState,
} from "./types.js";

let baseUrl = "";

export function setBaseUrl(url: string): void {
  baseUrl = url.replace(/\/$/, "");
}

export class ApiError extends Error {
  status: number;
  body: ApiErrorBody;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.status = status;
    this.body = body;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(baseUrl + path, init);
  const text = await response.text();
  const body = text ? JSON.parse(text) : null;
  if (!response.ok) {
    throw new ApiError(response.status, body as ApiErrorBody);
  }
  return body as T;
}

export function listDatasets(): Promise<{ datasets: DatasetInfo[] }> {
  return request("/api/v1/datasets");
}

export function getSchema(datasetId: string): Promise<DatasetSchema> {
  return request(`/api/v1/datasets/${datasetId}/schema`);
}

export function previewTreatment(datasetId: string, expression: string): Promise<PreviewCounts> {
  return request(`/api/v1/datasets/${datasetId}/treatment-preview`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ expression }),
  });
}

export function submitRun(manifest: Record<string, unknown>): Promise<{ run_id: string }> {
  return request("/api/v1/runs", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(manifest),
  });
}

export function getRunState(runId: string): Promise<RunState> {
  return request(`/api/v1/runs/${runId}`);
}

export function getResults(runId: string): Promise<RunResults> {
  return request(`/api/v1/runs/${runId}/results`);
}

export function getDiagnostics(runId: string): Promise<DiagnosticsBundle> {
  return request(`/api/v1/runs/${runId}/diagnostics`);
}

export function cancelRun(runId: string): Promise<RunState> {
  return request(`/api/v1/runs/${runId}/cancel`, { method: "POST" });
}
