/**
 * Dwell-time bar chart: expected sojourn per state in years. Sink states
 * (no outgoing rate) have no finite mean and render as hatched columns.
 */

import type { DwellRow } from "../api.js";
import { clear, el, stateColor, svgEl } from "../dom.js";

const BAR_WIDTH = 30;
const BAR_GAP = 14;
const PLOT_HEIGHT = 150;
const LABEL_BAND = 34;

export class DwellView {
  constructor(
    readonly root: HTMLElement,
    onStateClick: (state: number) => void,
  ) {
    root.addEventListener("click", (event) => {
      const target = (event.target as Element).closest("[data-state]");
      if (target instanceof Element) {
        onStateClick(Number(target.getAttribute("data-state")));
      }
    });
  }

  render(rows: DwellRow[], selected: Set<number>): void {
    clear(this.root);
    const finite = rows.filter((row) => !row.is_sink && row.mean_years !== null);
    const maxYears = Math.max(1e-12, ...finite.map((row) => row.mean_years as number));
    const width = rows.length * (BAR_WIDTH + BAR_GAP) + BAR_GAP;
    const svg = svgEl("svg", {
      width,
      height: PLOT_HEIGHT + LABEL_BAND,
      class: "dwell-chart",
      role: "img",
    });

    rows.forEach((row, i) => {
      const x = BAR_GAP + i * (BAR_WIDTH + BAR_GAP);
      const sink = row.is_sink || row.mean_years === null;
      const barHeight = sink
        ? PLOT_HEIGHT
        : Math.max(2, (PLOT_HEIGHT * (row.mean_years as number)) / maxYears);
      const group = svgEl("g", {
        "data-state": row.state,
        class: ["dwell-bar", sink ? "sink" : "", selected.has(row.state) ? "selected" : ""]
          .filter(Boolean)
          .join(" "),
      });
      group.append(
        svgEl("rect", {
          x,
          y: PLOT_HEIGHT - barHeight,
          width: BAR_WIDTH,
          height: barHeight,
          fill: stateColor(row.state),
          "fill-opacity": sink ? 0.25 : 0.9,
        }),
      );
      const title = sink
        ? `state ${row.state}: sink (exit rate ${row.exit_rate})`
        : `state ${row.state}: mean dwell ${(row.mean_years as number).toFixed(2)} years`;
      group.append(svgEl("title", {}, [title]));
      group.append(
        svgEl(
          "text",
          { x: x + BAR_WIDTH / 2, y: PLOT_HEIGHT - barHeight - 4, class: "bar-value" },
          [sink ? "sink" : (row.mean_years as number).toFixed(1)],
        ),
        svgEl(
          "text",
          { x: x + BAR_WIDTH / 2, y: PLOT_HEIGHT + 16, class: "bar-label" },
          [String(row.state)],
        ),
      );
      svg.append(group);
    });

    this.root.append(
      el("p", { class: "view-note" }, ["mean years in state before leaving"]),
      svg,
    );
  }
}
