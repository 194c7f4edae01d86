import { describe, expect, it } from "vitest";

import {
  DEFAULT_HORIZON,
  decodeFragment,
  defaultViewState,
  encodeFragment,
  normalizeViewState,
  type ViewState,
} from "../src/state.js";

describe("fragment encoding", () => {
  it("round-trips the default state", () => {
    const state = defaultViewState();
    expect(decodeFragment(encodeFragment(state))).toEqual(state);
  });

  it("round-trips a fully populated state", () => {
    const state: ViewState = {
      filter: "visited-set equals {0, 1, 2} and dwell-in-state(1) > 1.5 years",
      selectedStates: [0, 2, 7],
      horizon: 60,
      highlighted: ["S000005", "S000021"],
    };
    expect(decodeFragment(encodeFragment(state))).toEqual(state);
  });

  it("round-trips horizon 0", () => {
    const state = { ...defaultViewState(), horizon: 0 };
    expect(decodeFragment(encodeFragment(state)).horizon).toBe(0);
  });

  it("normalizes unsorted and duplicated selections", () => {
    const state: ViewState = {
      filter: "",
      selectedStates: [5, 1, 5, 1],
      horizon: 24,
      highlighted: ["b", "a", "b"],
    };
    const decoded = decodeFragment(encodeFragment(state));
    expect(decoded.selectedStates).toEqual([1, 5]);
    expect(decoded.highlighted).toEqual(["a", "b"]);
    expect(decoded).toEqual(normalizeViewState(state));
  });

  it("omits parameters for empty fields", () => {
    const encoded = encodeFragment(defaultViewState());
    expect(encoded).toBe(`#h=${DEFAULT_HORIZON}`);
  });

  it("decodes an empty or absent fragment to the defaults", () => {
    expect(decodeFragment("")).toEqual(defaultViewState());
    expect(decodeFragment("#")).toEqual(defaultViewState());
  });

  it("accepts fragments without the leading #", () => {
    expect(decodeFragment("h=48").horizon).toBe(48);
  });

  it("falls back to defaults on malformed pieces", () => {
    const decoded = decodeFragment("#s=x,-3,2&h=banana&ids=");
    expect(decoded.selectedStates).toEqual([2]);
    expect(decoded.horizon).toBe(DEFAULT_HORIZON);
    expect(decoded.highlighted).toEqual([]);
    expect(decodeFragment("#zzz").filter).toBe("");
  });

  it("round-trips across many generated states", () => {
    for (let i = 0; i < 100; i++) {
      const state: ViewState = {
        filter: i % 3 === 0 ? `dwell-in-state(${i % 7}) >= ${i / 4} years` : "",
        selectedStates: Array.from({ length: i % 5 }, (_, j) => (i * 3 + j * j) % 11),
        horizon: (i * 6) % 126,
        highlighted: Array.from({ length: i % 4 }, (_, j) => `S${(i + j) % 24}`),
      };
      const decoded = decodeFragment(encodeFragment(state));
      expect(decoded).toEqual(normalizeViewState(state));
      expect(decodeFragment(encodeFragment(decoded))).toEqual(decoded);
    }
  });
});
