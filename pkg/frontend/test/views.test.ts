import { beforeEach, describe, expect, it } from "vitest";

import type {
  DwellResponse,
  StatesSummaryResponse,
  SubgroupResponse,
  TimelinesResponse,
  TransitionsResponse,
} from "../src/api.js";
import { DwellView } from "../src/views/dwell.js";
import { HorizonView } from "../src/views/horizon.js";
import { SummaryView } from "../src/views/summary.js";
import { TimelineView } from "../src/views/timeline.js";
import { fixture } from "./helpers.js";

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="root"></div>';
  root = document.getElementById("root") as HTMLElement;
});

const noop = () => undefined;

describe("state summary matrix", () => {
  const summary = fixture<StatesSummaryResponse>("states_summary");
  const cohort = fixture<SubgroupResponse>("subgroups_all");

  function render(subgroup: SubgroupResponse = cohort, selected = new Set<number>()) {
    const view = new SummaryView(root, noop);
    view.render({
      table: summary.state_summary,
      subgroup,
      cohort,
      discrepancyTotal: 3,
      selected,
    });
  }

  it("renders one probability cell per state and marker", () => {
    render();
    expect(root.querySelectorAll("tbody td.prob-cell")).toHaveLength(
      summary.n_states * summary.state_summary.marker_names.length,
    );
  });

  it("summarizes a categorical aux column by its modal share", () => {
    render();
    const siteRow = [...root.querySelectorAll("tbody tr")].find(
      (row) => row.querySelector("th")?.textContent === "site",
    ) as HTMLElement;
    const firstCell = siteRow.querySelector("td") as HTMLElement;
    const shares = cohort.per_state.aux.site[0] as Record<string, number>;
    const best = Object.entries(shares).sort((a, b) => b[1] - a[1])[0];
    expect(firstCell.textContent).toBe(`${best[0]} ${Math.round(best[1] * 100)}%`);
  });

  it("leaves unvisited states blank in the aggregate rows", () => {
    const seg0 = fixture<SubgroupResponse>("subgroups_seg0");
    render(seg0);
    const ageRow = [...root.querySelectorAll("tbody tr")].find(
      (row) => row.querySelector("th")?.textContent === "mean age",
    ) as HTMLElement;
    const cells = [...ageRow.querySelectorAll("td")];
    expect(cells[3].textContent).toBe("");
    expect(cells[0].textContent).toBe((seg0.per_state.mean_age[0] as number).toFixed(1));
  });

  it("counts the subgroup and smoothing revisions in the note", () => {
    render();
    expect(root.querySelector(".view-note")?.textContent).toBe(
      "24 of 24 subjects in subgroup; 3 visits where smoothing revises the real-time state",
    );
  });
});

describe("dwell time bars", () => {
  it("marks absorbing states as sinks and scales the rest", () => {
    const dwell = fixture<DwellResponse>("dwell");
    const view = new DwellView(root, noop);
    view.render(dwell.dwell, new Set());
    const sinkBars = root.querySelectorAll("g.dwell-bar.sink");
    expect(sinkBars).toHaveLength(dwell.dwell.filter((row) => row.is_sink).length);
    expect(sinkBars).toHaveLength(3);
    const sinkLabels = [...sinkBars].map((bar) => bar.querySelector("text.bar-value")?.textContent);
    expect(new Set(sinkLabels)).toEqual(new Set(["sink"]));
    const finite = dwell.dwell.find((row) => !row.is_sink) as { state: number; mean_years: number };
    const finiteBar = root.querySelector(`g.dwell-bar[data-state="${finite.state}"]`) as Element;
    expect(finiteBar.querySelector("text.bar-value")?.textContent).toBe(
      finite.mean_years.toFixed(1),
    );
  });
});

describe("horizon heatmap", () => {
  it("configures the slider range in months", () => {
    const transitions = fixture<TransitionsResponse>("transitions_24");
    const view = new HorizonView(root, noop, noop);
    view.render(transitions, new Set());
    const slider = root.querySelector<HTMLInputElement>(".horizon-slider") as HTMLInputElement;
    expect(slider.min).toBe("0");
    expect(slider.max).toBe("120");
    expect(slider.step).toBe("6");
    expect(slider.value).toBe("24");
    expect(root.querySelector(".horizon-value")?.textContent).toBe("24");
  });

  it("writes each probability into its from/to cell", () => {
    const transitions = fixture<TransitionsResponse>("transitions_24");
    const view = new HorizonView(root, noop, noop);
    view.render(transitions, new Set());
    const cell = root.querySelector('td.prob-cell[data-from="0"][data-to="1"]') as HTMLElement;
    expect(cell.textContent).toBe(transitions.matrix[0][1].toFixed(2));
  });
});

describe("subject timelines", () => {
  it("renders a note and no rows for an empty subgroup", () => {
    const empty: TimelinesResponse = { subject_ids: [], timelines: {} };
    const view = new TimelineView(root, noop, noop);
    view.render(empty, new Set(), new Set());
    expect(root.querySelector(".view-note")?.textContent).toBe("0 subjects in subgroup");
    expect(root.querySelectorAll("g.timeline-row")).toHaveLength(0);
  });

  it("draws one band per state interval with years on the axis", () => {
    const timelines = fixture<TimelinesResponse>("timelines_all");
    const view = new TimelineView(root, noop, noop);
    view.render(timelines, new Set(), new Set());
    const firstId = timelines.subject_ids[0];
    const bands = timelines.timelines[firstId];
    const row = root.querySelector(`.row-label[data-subject="${firstId}"]`)?.closest("g") as Element;
    expect(row.querySelectorAll("rect.band")).toHaveLength(bands.length);
    const axisLabels = [...root.querySelectorAll("text.axis-label")].map((t) => t.textContent);
    expect(axisLabels.length).toBeGreaterThan(1);
    for (const label of axisLabels) expect(label).toMatch(/^\d+y$/);
  });
});
