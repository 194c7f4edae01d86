/**
 * ViewState and its URL-fragment encoding. The whole exploration state
 * lives in the fragment so any view is shareable and reload-stable.
 */

export interface ViewState {
  /** Active subgroup filter expression; empty string means the full cohort. */
  filter: string;
  /** Selected states, highlighted across every view. Sorted, deduplicated. */
  selectedStates: number[];
  /** Transition horizon in months. */
  horizon: number;
  /** Linked-highlight set of subject ids. Sorted, deduplicated. */
  highlighted: string[];
}

export const DEFAULT_HORIZON = 24;

export function defaultViewState(): ViewState {
  return { filter: "", selectedStates: [], horizon: DEFAULT_HORIZON, highlighted: [] };
}

function sortedUniqueNumbers(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}

function sortedUniqueStrings(values: string[]): string[] {
  return [...new Set(values)].sort();
}

export function normalizeViewState(state: ViewState): ViewState {
  return {
    filter: state.filter,
    selectedStates: sortedUniqueNumbers(state.selectedStates),
    horizon: state.horizon,
    highlighted: sortedUniqueStrings(state.highlighted),
  };
}

/** Encode as "#q=..&s=..&h=..&ids=.."; parameters for empty fields are omitted. */
export function encodeFragment(state: ViewState): string {
  const normalized = normalizeViewState(state);
  const params = new URLSearchParams();
  if (normalized.filter !== "") params.set("q", normalized.filter);
  if (normalized.selectedStates.length > 0) params.set("s", normalized.selectedStates.join(","));
  params.set("h", String(normalized.horizon));
  if (normalized.highlighted.length > 0) params.set("ids", normalized.highlighted.join("|"));
  return "#" + params.toString();
}

/** Inverse of encodeFragment; malformed pieces fall back to defaults. */
export function decodeFragment(fragment: string): ViewState {
  const state = defaultViewState();
  const raw = fragment.startsWith("#") ? fragment.slice(1) : fragment;
  if (raw === "") return state;
  const params = new URLSearchParams(raw);
  state.filter = params.get("q") ?? "";
  const states = params.get("s");
  if (states !== null && states !== "") {
    state.selectedStates = sortedUniqueNumbers(
      states
        .split(",")
        .map((piece) => Number.parseInt(piece, 10))
        .filter((value) => Number.isInteger(value) && value >= 0),
    );
  }
  const horizon = Number.parseInt(params.get("h") ?? "", 10);
  if (Number.isInteger(horizon) && horizon >= 0) state.horizon = horizon;
  const ids = params.get("ids");
  if (ids !== null && ids !== "") {
    state.highlighted = sortedUniqueStrings(ids.split("|").filter((piece) => piece !== ""));
  }
  return state;
}
