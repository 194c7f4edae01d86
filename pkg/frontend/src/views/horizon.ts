/**
 * Transition heatmap at an adjustable horizon: cell (i, j) is the
 * probability of being in state j a fixed number of months after being
 * in state i, straight from the transitions endpoint.
 */

import type { TransitionsResponse } from "../api.js";
import { clear, el, probabilityShade, stateColor } from "../dom.js";

const MAX_HORIZON_MONTHS = 120;
const SLIDER_STEP = 6;

export class HorizonView {
  constructor(
    readonly root: HTMLElement,
    private readonly onStateClick: (state: number) => void,
    private readonly onHorizonChange: (horizonMonths: number) => void,
  ) {
    root.addEventListener("click", (event) => {
      const target = (event.target as Element).closest("th[data-state]");
      if (target instanceof Element) {
        this.onStateClick(Number(target.getAttribute("data-state")));
      }
    });
  }

  render(response: TransitionsResponse, selected: Set<number>): void {
    clear(this.root);
    const K = response.matrix.length;

    const slider = el("input", {
      type: "range",
      min: 0,
      max: MAX_HORIZON_MONTHS,
      step: SLIDER_STEP,
      value: response.horizon_months,
      class: "horizon-slider",
      "aria-label": "horizon in months",
    });
    slider.addEventListener("input", () => {
      this.onHorizonChange(Number(slider.value));
    });
    this.root.append(
      el("p", { class: "view-note" }, [
        "P(state in ",
        el("output", { class: "horizon-value" }, [String(response.horizon_months)]),
        " months | state now)",
      ]),
      el("div", { class: "slider-row" }, ["0", slider, `${MAX_HORIZON_MONTHS}`]),
    );

    const header = el("tr", {}, [el("th", {}, ["from \\ to"])]);
    for (let j = 0; j < K; j++) {
      header.append(
        el(
          "th",
          {
            "data-state": j,
            class: selected.has(j) ? "state-col selected" : "state-col",
            style: `border-top: 3px solid ${stateColor(j)}`,
          },
          [String(j)],
        ),
      );
    }
    const body = el("tbody");
    response.matrix.forEach((row, i) => {
      const tr = el("tr", {}, [
        el(
          "th",
          {
            "data-state": i,
            class: selected.has(i) ? "state-row selected" : "state-row",
            style: `border-left: 3px solid ${stateColor(i)}`,
          },
          [String(i)],
        ),
      ]);
      row.forEach((p, j) => {
        tr.append(
          el(
            "td",
            {
              class: "prob-cell",
              "data-from": i,
              "data-to": j,
              style: `background: ${probabilityShade(p)}`,
              title: `${i} to ${j} in ${response.horizon_months} months: ${p.toFixed(3)}`,
            },
            [p.toFixed(2)],
          ),
        );
      });
      body.append(tr);
    });
    this.root.append(
      el("table", { class: "horizon-grid" }, [el("thead", {}, [header]), body]),
    );
  }
}
