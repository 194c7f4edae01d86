/**
 * Test support: fixtures captured from a live bundle server (24-subject,
 * 11-state, three-segment demo cohort) and a fetch stand-in that routes
 * requests to them the way the real server would.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

import type {
  DwellResponse,
  StatesSummaryResponse,
  SubgroupResponse,
  TimelinesResponse,
  TransitionsResponse,
} from "../src/api.js";

const FIXTURE_DIR = join(process.cwd(), "test", "fixtures");

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURE_DIR, `${name}.json`), "utf8")) as T;
}

export const SEG0_FILTER = "visited-set equals {0, 1, 2}";
export const STARTS0_FILTER = "starts-in(0)";
export const CONJ_FILTER = "starts-in(0) and dwell-in-state(1) > 1 years";
export const BAD_FILTER = "visited-set near {1}";

interface ParseErrorBody {
  detail: { message: string; position: number };
}

/** Timelines for a filter without its own fixture: the full map cut down to the member ids. */
function restrictTimelines(ids: string[]): TimelinesResponse {
  const all = fixture<TimelinesResponse>("timelines_all");
  const sorted = [...ids].sort();
  return {
    subject_ids: sorted,
    timelines: Object.fromEntries(sorted.map((id) => [id, all.timelines[id]])),
  };
}

function filterTable(): Map<string, { subgroups: SubgroupResponse; timelines: TimelinesResponse }> {
  const seg0 = fixture<SubgroupResponse>("subgroups_seg0");
  const starts0 = fixture<SubgroupResponse>("subgroups_starts0");
  const conj = fixture<SubgroupResponse>("subgroups_conj");
  return new Map([
    [
      "",
      {
        subgroups: fixture<SubgroupResponse>("subgroups_all"),
        timelines: fixture<TimelinesResponse>("timelines_all"),
      },
    ],
    [SEG0_FILTER, { subgroups: seg0, timelines: fixture<TimelinesResponse>("timelines_seg0") }],
    [STARTS0_FILTER, { subgroups: starts0, timelines: restrictTimelines(starts0.subject_ids) }],
    [CONJ_FILTER, { subgroups: conj, timelines: restrictTimelines(conj.subject_ids) }],
  ]);
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
  signal: AbortSignal | null;
}

export type FetchStub = (input: string, init?: RequestInit) => Promise<Response>;

export interface Router {
  fetchFn: FetchStub;
  requests: RecordedRequest[];
}

/** Routes ApiClient requests to the captured fixtures; unknown filters parse-fail at position 0. */
export function apiRouter(): Router {
  const filters = filterTable();
  const requests: RecordedRequest[] = [];

  const respondForFilter = (
    filter: string,
    kind: "subgroups" | "timelines",
  ): Response => {
    if (filter === BAD_FILTER) {
      return jsonResponse(fixture<ParseErrorBody>("error_parse"), 400);
    }
    const entry = filters.get(filter);
    if (entry === undefined) {
      return jsonResponse({ detail: { message: "unknown token (at position 0)", position: 0 } }, 400);
    }
    return jsonResponse(entry[kind]);
  };

  const fetchFn: FetchStub = (input, init) => {
    const method = init?.method ?? "GET";
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    requests.push({ url: input, method, body, signal: init?.signal ?? null });
    const url = new URL(input, "http://test.local");
    const path = url.pathname;

    if (method === "GET" && path === "/api/model") {
      return Promise.resolve(jsonResponse(fixture("model")));
    }
    if (method === "GET" && path === "/api/states/summary") {
      return Promise.resolve(jsonResponse(fixture<StatesSummaryResponse>("states_summary")));
    }
    if (method === "GET" && path === "/api/dwell") {
      return Promise.resolve(jsonResponse(fixture<DwellResponse>("dwell")));
    }
    if (method === "GET" && path === "/api/transitions") {
      const horizon = url.searchParams.get("horizon") ?? "";
      if (["0", "24", "60"].includes(horizon)) {
        return Promise.resolve(
          jsonResponse(fixture<TransitionsResponse>(`transitions_${horizon}`)),
        );
      }
      return Promise.resolve(jsonResponse({ detail: { message: "no fixture" } }, 404));
    }
    if (method === "GET" && path === "/api/timelines") {
      return Promise.resolve(respondForFilter(url.searchParams.get("filter") ?? "", "timelines"));
    }
    if (method === "POST" && path === "/api/subgroups") {
      return Promise.resolve(
        respondForFilter((body as { filter?: string }).filter ?? "", "subgroups"),
      );
    }
    return Promise.resolve(jsonResponse({ detail: { message: "not found" } }, 404));
  };

  return { fetchFn, requests };
}

/** A fetch stand-in for an unreachable server. */
export function downFetch(): FetchStub {
  return () => Promise.reject(new TypeError("fetch failed"));
}

export function resetLocation(): void {
  window.history.replaceState(null, "", window.location.pathname);
}
