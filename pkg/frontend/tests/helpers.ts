/** Shared test scaffolding: fixture loading and a routed fetch mock. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { vi } from "vitest";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "..", "fixtures");

export function fixture<T = any>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, `${name}.json`), "utf-8")) as T;
}

export interface RouteResponse {
  status?: number;
  body: unknown;
}

export type Router = (url: string, init?: RequestInit) => RouteResponse | undefined;

export function installFetchMock(router: Router): { calls: string[] } {
  const calls: string[] = [];
  const mock = vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    calls.push(url);
    const matched = router(url, init);
    if (!matched) {
      return new Response(JSON.stringify({ code: "run_not_found", message: "no such resource", field_errors: null }),
        { status: 404, headers: { "content-type": "application/json" } });
    }
    return new Response(JSON.stringify(matched.body), {
      status: matched.status ?? 200,
      headers: { "content-type": "application/json" },
    });
  });
  vi.stubGlobal("fetch", mock);
  return { calls };
}

/** Drain pending microtasks so awaited fetches settle. */
export async function flush(times = 6): Promise<void> {
  for (let i = 0; i < times; i += 1) {
    await Promise.resolve();
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

/** Every numeric value in a JSON document, for value-level verbatim checks. */
export function collectNumbers(doc: unknown, into = new Set<number>()): Set<number> {
  if (typeof doc === "number") into.add(doc);
  else if (Array.isArray(doc)) doc.forEach((v) => collectNumbers(v, into));
  else if (doc && typeof doc === "object") {
    Object.values(doc).forEach((v) => collectNumbers(v, into));
  }
  return into;
}

export function verbatimSpans(root: HTMLElement): string[] {
  return Array.from(root.querySelectorAll("[data-verbatim]"))
    .map((node) => node.textContent ?? "");
}
