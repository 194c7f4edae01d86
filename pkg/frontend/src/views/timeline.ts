/**
 * Subject timelines: one row per subject in the active subgroup, a
 * horizontal age axis in years, and one colored band per dwell period of
 * the decoded state path. Clicking a row label toggles the subject in
 * the linked-highlight set; clicking a band selects its state.
 */

import type { TimelinesResponse } from "../api.js";
import { clear, el, stateColor, svgEl } from "../dom.js";

const LABEL_BAND = 84;
const PLOT_WIDTH = 440;
const ROW_HEIGHT = 16;
const BAND_HEIGHT = 11;
const AXIS_BAND = 24;

export class TimelineView {
  constructor(
    readonly root: HTMLElement,
    onSubjectClick: (subjectId: string) => void,
    onStateClick: (state: number) => void,
  ) {
    root.addEventListener("click", (event) => {
      const target = event.target as Element;
      const subject = target.closest("[data-subject]");
      if (subject instanceof Element) {
        onSubjectClick(subject.getAttribute("data-subject") as string);
        return;
      }
      const band = target.closest("[data-state]");
      if (band instanceof Element) {
        onStateClick(Number(band.getAttribute("data-state")));
      }
    });
  }

  render(response: TimelinesResponse, selected: Set<number>, highlighted: Set<string>): void {
    clear(this.root);
    const ids = response.subject_ids;
    this.root.append(
      el("p", { class: "view-note" }, [`${ids.length} subjects in subgroup`]),
    );
    if (ids.length === 0) return;

    let maxAge = 0;
    for (const id of ids) {
      for (const band of response.timelines[id]) maxAge = Math.max(maxAge, band.end);
    }
    maxAge = Math.max(maxAge, 1e-9);
    const x = (age: number) => LABEL_BAND + (PLOT_WIDTH * age) / maxAge;

    const height = ids.length * ROW_HEIGHT + AXIS_BAND;
    const svg = svgEl("svg", {
      width: LABEL_BAND + PLOT_WIDTH + 8,
      height,
      class: "timeline-chart",
      role: "img",
    });

    ids.forEach((id, i) => {
      const y = i * ROW_HEIGHT;
      const classes = ["timeline-row"];
      if (highlighted.has(id)) classes.push("highlighted");
      else if (highlighted.size > 0) classes.push("dimmed");
      const row = svgEl("g", { class: classes.join(" ") });
      row.append(
        svgEl(
          "text",
          { x: LABEL_BAND - 6, y: y + BAND_HEIGHT, class: "row-label", "data-subject": id },
          [id],
        ),
      );
      for (const band of response.timelines[id]) {
        const rect = svgEl("rect", {
          x: x(band.start),
          y,
          width: Math.max(0.5, x(band.end) - x(band.start)),
          height: BAND_HEIGHT,
          fill: stateColor(band.state),
          "data-state": band.state,
          class: selected.has(band.state) ? "band selected" : "band",
        });
        rect.append(
          svgEl("title", {}, [
            `${id} state ${band.state}: ${band.start.toFixed(1)} to ${band.end.toFixed(1)} years`,
          ]),
        );
        row.append(rect);
      }
      svg.append(row);
    });

    const axisY = ids.length * ROW_HEIGHT + 4;
    svg.append(
      svgEl("line", {
        x1: LABEL_BAND,
        y1: axisY,
        x2: LABEL_BAND + PLOT_WIDTH,
        y2: axisY,
        class: "axis",
      }),
    );
    for (const tick of [0, maxAge / 2, maxAge]) {
      svg.append(
        svgEl("text", { x: x(tick), y: axisY + 14, class: "axis-label" }, [
          `${tick.toFixed(0)}y`,
        ]),
      );
    }
    this.root.append(svg);
  }
}
