/**
 * Typed client for the bundle server. Response shapes mirror the server's
 * documented fields one to one; nothing is recomputed on this side.
 */

export interface RateEdge {
  from: number;
  to: number;
  rate: number;
}

export interface ModelDoc {
  schema_version: number;
  n_states: number;
  marker_names: string[];
  mask: string;
  pi: number[];
  rates: RateEdge[];
  emissions: number[][];
}

export interface DwellRow {
  state: number;
  exit_rate: number;
  mean_years: number | null;
  is_sink: boolean;
}

/** Per-state auxiliary summary: mean for numeric/binary, frequency map for categorical. */
export type AuxCell = number | Record<string, number> | null;

export interface StateSummaryTable {
  emissions: number[][];
  marker_names: string[];
  visit_counts: number[];
  mean_age: (number | null)[];
  marker_positive_rate: (number | null)[][];
  aux: Record<string, AuxCell[]>;
}

export interface SegmentDoc {
  states: number[];
  member_ids: string[];
  entry_ages: Record<string, Record<string, number>>;
}

export interface StatesSummaryResponse {
  n_states: number;
  state_summary: StateSummaryTable;
  segments: SegmentDoc[] | null;
  discrepancies: { total: number };
}

export interface DwellResponse {
  dwell: DwellRow[];
}

export interface TransitionsResponse {
  horizon_months: number;
  matrix: number[][];
}

export interface TimelineBand {
  state: number;
  start: number;
  end: number;
}

export interface TimelinesResponse {
  subject_ids: string[];
  timelines: Record<string, TimelineBand[]>;
}

export interface PerStateSummary {
  visit_counts: number[];
  mean_age: (number | null)[];
  aux: Record<string, AuxCell[]>;
}

export interface SubgroupResponse {
  filter: string;
  subject_ids: string[];
  n_subjects: number;
  per_state: PerStateSummary;
}

/** A filter the server's parser rejected; position is a 0-based character offset. */
export class FilterParseError extends Error {
  constructor(message: string, readonly position: number) {
    super(message);
    this.name = "FilterParseError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  model(): Promise<ModelDoc> {
    return this.getJson("/api/model");
  }

  statesSummary(): Promise<StatesSummaryResponse> {
    return this.getJson("/api/states/summary");
  }

  dwell(): Promise<DwellResponse> {
    return this.getJson("/api/dwell");
  }

  transitions(horizonMonths: number, signal?: AbortSignal): Promise<TransitionsResponse> {
    return this.getJson(`/api/transitions?horizon=${encodeURIComponent(horizonMonths)}`, signal);
  }

  timelines(filter: string, signal?: AbortSignal): Promise<TimelinesResponse> {
    return this.getJson(`/api/timelines?filter=${encodeURIComponent(filter)}`, signal);
  }

  async subgroups(filter: string, signal?: AbortSignal): Promise<SubgroupResponse> {
    const response = await this.fetchFn(this.base + "/api/subgroups", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ filter }),
      signal,
    });
    if (!response.ok) throw await toError(response);
    return response.json() as Promise<SubgroupResponse>;
  }

  private async getJson<T>(path: string, signal?: AbortSignal): Promise<T> {
    const response = await this.fetchFn(this.base + path, { signal });
    if (!response.ok) throw await toError(response);
    return response.json() as Promise<T>;
  }
}

async function toError(response: Response): Promise<Error> {
  try {
    const body = (await response.json()) as { detail?: { message?: string; position?: number } };
    const detail = body.detail;
    if (detail && typeof detail.message === "string") {
      if (typeof detail.position === "number") {
        return new FilterParseError(detail.message, detail.position);
      }
      return new Error(detail.message);
    }
  } catch {
    // non-JSON error body; fall through to the generic message
  }
  return new Error(`request failed with status ${response.status}`);
}
