/**
 * Dashboard wiring: one ViewState drives four linked views, every number
 * comes from the API, and the whole state round-trips through the URL
 * fragment. At most one subgroup request is in flight; superseded
 * requests are aborted.
 */

import {
  ApiClient,
  FilterParseError,
  type DwellResponse,
  type StatesSummaryResponse,
  type SubgroupResponse,
  type TimelinesResponse,
  type TransitionsResponse,
} from "./api.js";
import { clear, el } from "./dom.js";
import { decodeFragment, encodeFragment, type ViewState } from "./state.js";
import { DwellView } from "./views/dwell.js";
import { HorizonView } from "./views/horizon.js";
import { SummaryView } from "./views/summary.js";
import { TimelineView } from "./views/timeline.js";

export class App {
  private state: ViewState;
  private summaryData!: StatesSummaryResponse;
  private dwellData!: DwellResponse;
  private cohortBaseline!: SubgroupResponse;
  private subgroupData!: SubgroupResponse;
  private timelinesData!: TimelinesResponse;
  private transitionsData!: TransitionsResponse;

  private summaryView!: SummaryView;
  private dwellView!: DwellView;
  private horizonView!: HorizonView;
  private timelineView!: TimelineView;
  private filterInput!: HTMLInputElement;
  private filterError!: HTMLElement;

  private subgroupAbort: AbortController | null = null;
  private horizonAbort: AbortController | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly win: Window = window,
  ) {
    this.state = decodeFragment(this.win.location.hash);
  }

  /** Fetch everything for the initial ViewState; on failure render only an error banner. */
  async start(): Promise<void> {
    let summary: StatesSummaryResponse;
    let dwell: DwellResponse;
    let transitions: TransitionsResponse;
    let timelines: TimelinesResponse;
    let baseline: SubgroupResponse;
    let subgroup: SubgroupResponse;
    try {
      [summary, dwell, transitions, timelines, baseline] = await Promise.all([
        this.api.statesSummary(),
        this.api.dwell(),
        this.api.transitions(this.state.horizon),
        this.api.timelines(this.state.filter),
        this.api.subgroups(""),
      ]);
      subgroup = this.state.filter === "" ? baseline : await this.api.subgroups(this.state.filter);
    } catch (err) {
      clear(this.root);
      this.root.append(
        el("div", { class: "error-banner", role: "alert" }, [
          `could not load the report: ${err instanceof Error ? err.message : String(err)}`,
        ]),
      );
      return;
    }
    this.summaryData = summary;
    this.dwellData = dwell;
    this.transitionsData = transitions;
    this.timelinesData = timelines;
    this.cohortBaseline = baseline;
    this.subgroupData = subgroup;
    this.buildLayout();
    this.renderAll();
    this.syncHash();
  }

  private buildLayout(): void {
    clear(this.root);
    this.filterInput = el("input", {
      type: "text",
      class: "filter-input",
      placeholder: "e.g. visited-set equals {0, 1, 2}  or  dwell-in-state(1) > 2 years",
      "aria-label": "subgroup filter",
    });
    this.filterInput.value = this.state.filter;
    this.filterError = el("pre", { class: "filter-error", hidden: "" });

    const form = el("form", { class: "filter-form" }, [
      el("label", {}, ["subgroup"]),
      this.filterInput,
      el("button", { type: "submit" }, ["apply"]),
    ]);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.applyFilter(this.filterInput.value);
    });

    const summaryRoot = el("div", { class: "view-body" });
    const dwellRoot = el("div", { class: "view-body" });
    const horizonRoot = el("div", { class: "view-body" });
    const timelineRoot = el("div", { class: "view-body" });

    this.root.append(
      el("header", {}, [
        el("h1", {}, ["trajectory explorer"]),
        el("p", { class: "cohort-line" }, [
          `${this.cohortBaseline.n_subjects} subjects, ${this.summaryData.n_states} states`,
        ]),
        form,
        this.filterError,
      ]),
      el("main", { class: "views" }, [
        el("section", { class: "view summary-view" }, [el("h2", {}, ["state summary"]), summaryRoot]),
        el("section", { class: "view dwell-view" }, [el("h2", {}, ["dwell times"]), dwellRoot]),
        el("section", { class: "view horizon-view" }, [
          el("h2", {}, ["transition horizon"]),
          horizonRoot,
        ]),
        el("section", { class: "view timeline-view" }, [el("h2", {}, ["timelines"]), timelineRoot]),
      ]),
    );

    const toggleState = (state: number) => this.toggleState(state);
    this.summaryView = new SummaryView(summaryRoot, toggleState);
    this.dwellView = new DwellView(dwellRoot, toggleState);
    this.horizonView = new HorizonView(horizonRoot, toggleState, (h) => void this.setHorizon(h));
    this.timelineView = new TimelineView(
      timelineRoot,
      (id) => this.toggleSubject(id),
      toggleState,
    );
  }

  private renderAll(): void {
    const selected = new Set(this.state.selectedStates);
    this.summaryView.render({
      table: this.summaryData.state_summary,
      subgroup: this.subgroupData,
      cohort: this.cohortBaseline,
      discrepancyTotal: this.summaryData.discrepancies.total,
      selected,
    });
    this.dwellView.render(this.dwellData.dwell, selected);
    this.horizonView.render(this.transitionsData, selected);
    this.timelineView.render(this.timelinesData, selected, new Set(this.state.highlighted));
  }

  /** Swap the active subgroup; on a parse error keep the previous ViewState. */
  async applyFilter(expression: string): Promise<void> {
    this.subgroupAbort?.abort();
    const control = new AbortController();
    this.subgroupAbort = control;
    let subgroup: SubgroupResponse;
    let timelines: TimelinesResponse;
    try {
      [subgroup, timelines] = await Promise.all([
        this.api.subgroups(expression, control.signal),
        this.api.timelines(expression, control.signal),
      ]);
    } catch (err) {
      if (control.signal.aborted) return;
      this.showFilterError(expression, err);
      return;
    }
    if (this.subgroupAbort !== control) return;
    this.subgroupData = subgroup;
    this.timelinesData = timelines;
    this.state.filter = expression;
    this.filterInput.value = expression;
    this.hideFilterError();
    this.renderAll();
    this.syncHash();
  }

  async setHorizon(horizonMonths: number): Promise<void> {
    this.horizonAbort?.abort();
    const control = new AbortController();
    this.horizonAbort = control;
    let transitions: TransitionsResponse;
    try {
      transitions = await this.api.transitions(horizonMonths, control.signal);
    } catch (err) {
      if (control.signal.aborted) return;
      this.showFilterError(`horizon ${horizonMonths}`, err);
      return;
    }
    if (this.horizonAbort !== control) return;
    this.transitionsData = transitions;
    this.state.horizon = horizonMonths;
    this.renderAll();
    this.syncHash();
  }

  toggleState(state: number): void {
    const selected = new Set(this.state.selectedStates);
    if (selected.has(state)) selected.delete(state);
    else selected.add(state);
    this.state.selectedStates = [...selected];
    this.renderAll();
    this.syncHash();
  }

  toggleSubject(subjectId: string): void {
    const highlighted = new Set(this.state.highlighted);
    if (highlighted.has(subjectId)) highlighted.delete(subjectId);
    else highlighted.add(subjectId);
    this.state.highlighted = [...highlighted];
    this.renderAll();
    this.syncHash();
  }

  viewState(): ViewState {
    return decodeFragment(encodeFragment(this.state));
  }

  private showFilterError(expression: string, err: unknown): void {
    if (err instanceof FilterParseError) {
      this.filterError.textContent =
        expression + "\n" + " ".repeat(Math.max(0, err.position)) + "^ " + err.message;
    } else {
      this.filterError.textContent = err instanceof Error ? err.message : String(err);
    }
    this.filterError.removeAttribute("hidden");
  }

  private hideFilterError(): void {
    this.filterError.textContent = "";
    this.filterError.setAttribute("hidden", "");
  }

  private syncHash(): void {
    const encoded = encodeFragment(this.state);
    if (this.win.location.hash !== encoded) {
      this.win.location.hash = encoded;
    }
  }
}
