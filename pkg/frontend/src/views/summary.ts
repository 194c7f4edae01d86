/**
 * State-summary matrix: one column per state, rows for per-state marker
 * onset probabilities and the subgroup's recomputed aggregates, plus a
 * subgroup-vs-cohort comparison strip of per-state visit counts.
 */

import type { AuxCell, StateSummaryTable, SubgroupResponse } from "../api.js";
import { clear, el, probabilityShade, stateColor } from "../dom.js";

export interface SummaryRenderArgs {
  table: StateSummaryTable;
  subgroup: SubgroupResponse;
  cohort: SubgroupResponse;
  discrepancyTotal: number;
  selected: Set<number>;
}

const STRIP_BAR_WIDTH = 120;

function formatAuxCell(value: AuxCell): string {
  if (value === null) return "";
  if (typeof value === "number") return value.toFixed(2);
  let bestKey = "";
  let bestShare = -1;
  for (const [key, share] of Object.entries(value)) {
    if (share > bestShare) {
      bestKey = key;
      bestShare = share;
    }
  }
  return `${bestKey} ${Math.round(bestShare * 100)}%`;
}

export class SummaryView {
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

  render(args: SummaryRenderArgs): void {
    const { table, subgroup, cohort, selected } = args;
    const K = table.visit_counts.length;
    clear(this.root);

    this.root.append(
      el("p", { class: "view-note" }, [
        `${subgroup.n_subjects} of ${cohort.n_subjects} subjects in subgroup; ` +
          `${args.discrepancyTotal} visits where smoothing revises the real-time state`,
      ]),
    );

    const header = el("tr", {}, [el("th", {}, [""])]);
    for (let k = 0; k < K; k++) {
      header.append(
        el(
          "th",
          {
            "data-state": k,
            class: selected.has(k) ? "state-col selected" : "state-col",
            style: `border-top: 3px solid ${stateColor(k)}`,
          },
          [String(k)],
        ),
      );
    }

    const body = el("tbody");
    table.marker_names.forEach((marker, m) => {
      const row = el("tr", {}, [el("th", { class: "row-label" }, [marker])]);
      for (let k = 0; k < K; k++) {
        const p = table.emissions[k][m];
        const observed = table.marker_positive_rate[k][m];
        row.append(
          el(
            "td",
            {
              "data-state": k,
              class: selected.has(k) ? "prob-cell selected" : "prob-cell",
              style: `background: ${probabilityShade(p)}`,
              title:
                `${marker} in state ${k}: model ${p.toFixed(2)}` +
                (observed === null ? "" : `, observed ${observed.toFixed(2)}`),
            },
            [p.toFixed(2)],
          ),
        );
      }
      body.append(row);
    });

    body.append(
      this.aggregateRow("visits", K, selected, (k) => String(subgroup.per_state.visit_counts[k])),
      this.aggregateRow("mean age", K, selected, (k) => {
        const age = subgroup.per_state.mean_age[k];
        return age === null ? "" : age.toFixed(1);
      }),
    );
    for (const column of Object.keys(subgroup.per_state.aux).sort()) {
      body.append(
        this.aggregateRow(column, K, selected, (k) =>
          formatAuxCell(subgroup.per_state.aux[column][k]),
        ),
      );
    }

    const matrix = el("table", { class: "summary-matrix" }, [el("thead", {}, [header]), body]);
    this.root.append(matrix, this.comparisonStrip(subgroup, cohort, selected));
  }

  private aggregateRow(
    label: string,
    K: number,
    selected: Set<number>,
    cellText: (state: number) => string,
  ): HTMLTableRowElement {
    const row = el("tr", { class: "aggregate-row" }, [el("th", { class: "row-label" }, [label])]);
    for (let k = 0; k < K; k++) {
      row.append(
        el("td", { "data-state": k, class: selected.has(k) ? "selected" : "" }, [cellText(k)]),
      );
    }
    return row;
  }

  private comparisonStrip(
    subgroup: SubgroupResponse,
    cohort: SubgroupResponse,
    selected: Set<number>,
  ): HTMLElement {
    const strip = el("div", { class: "compare-strip" }, [
      el("h4", {}, ["subgroup vs cohort visits"]),
    ]);
    const maxCount = Math.max(1, ...cohort.per_state.visit_counts);
    cohort.per_state.visit_counts.forEach((cohortCount, k) => {
      const subgroupCount = subgroup.per_state.visit_counts[k];
      const row = el(
        "div",
        { class: selected.has(k) ? "compare-row selected" : "compare-row", "data-state": k },
        [el("span", { class: "compare-label" }, [String(k)])],
      );
      row.append(
        el("span", {
          class: "bar subgroup-bar",
          "data-count": subgroupCount,
          style:
            `width: ${Math.round((STRIP_BAR_WIDTH * subgroupCount) / maxCount)}px; ` +
            `background: ${stateColor(k)}`,
          title: `state ${k}: ${subgroupCount} subgroup visits`,
        }),
        el("span", {
          class: "bar cohort-bar",
          "data-count": cohortCount,
          style: `width: ${Math.round((STRIP_BAR_WIDTH * cohortCount) / maxCount)}px`,
          title: `state ${k}: ${cohortCount} cohort visits`,
        }),
        el("span", { class: "compare-count" }, [`${subgroupCount} / ${cohortCount}`]),
      );
      strip.append(row);
    });
    return strip;
  }
}
