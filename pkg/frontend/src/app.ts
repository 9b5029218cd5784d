import { ApiClient, ApiRequestError, type FetchLike } from "./api.js";
import type {
  Color,
  ProfilePayload,
  SuggestionPayload,
  VerdictEntry,
} from "./types.js";
import {
  COLORS,
  DECISION_KINDS,
  SCENARIOS,
  SCHEDULES,
  type VerdictChoice,
  buildGrid,
  canSubmit,
  choiceComplete,
  choiceToEntry,
  formatSeconds,
  parseTimingCsv,
  phaseHeading,
  ratioBadge,
  sessionHash,
  sessionIdFromHash,
  timingRows,
  validateStartForm,
} from "./viewmodel.js";

export const DEFAULT_BASE_URL = "http://127.0.0.1:8077";

const BASE_URL_STORAGE_KEY = "inspection-console-base-url";

export interface AppOptions {
  baseUrl?: string;
  fetchImpl?: FetchLike;
}

export interface AppHandle {
  root: HTMLElement;
  /** Resolves once every action queued so far has finished. */
  settled(): Promise<void>;
  api(): ApiClient;
}

interface AppState {
  sessionId: string | null;
  profile: ProfilePayload | null;
  suggestion: SuggestionPayload | null;
  timingCsv: string | null;
  choices: Map<string, VerdictChoice>;
  autosave: boolean;
  emphasis: "sequential" | "concurrent";
  emphasisFor: string | null;
  decisionNote: string;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") {
      node.className = value;
    } else if (key === "text") {
      node.textContent = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function option(doc: Document, value: string, label?: string): HTMLOptionElement {
  return el(doc, "option", { value, text: label ?? (value === "" ? "none" : value) });
}

export function mountApp(root: HTMLElement, options: AppOptions = {}): AppHandle {
  const doc = root.ownerDocument;
  const maybeWin = doc.defaultView;
  if (maybeWin === null) {
    throw new Error("the console root must live in a window-backed document");
  }
  const win: Window & typeof globalThis = maybeWin;

  const storedBase = win.localStorage?.getItem(BASE_URL_STORAGE_KEY) ?? null;
  let baseUrl = options.baseUrl ?? storedBase ?? DEFAULT_BASE_URL;
  let client = new ApiClient(baseUrl, options.fetchImpl);

  const state: AppState = {
    sessionId: null,
    profile: null,
    suggestion: null,
    timingCsv: null,
    choices: new Map(),
    autosave: false,
    emphasis: "sequential",
    emphasisFor: null,
    decisionNote: "",
  };

  root.replaceChildren();
  const banner = el(doc, "div", { id: "error-banner", hidden: "" });
  const view = el(doc, "main", { id: "view" });
  root.append(
    el(doc, "header", {}, [
      el(doc, "h1", { text: "Yard inspection console" }),
      banner,
    ]),
    view,
  );

  // Actions run one at a time; settled() lets callers await the queue.
  let queue: Promise<void> = Promise.resolve();
  function enqueue(action: () => Promise<void>): Promise<void> {
    const run = queue.then(async () => {
      hideError();
      await action();
    });
    queue = run.catch((err) => {
      showError(err);
    });
    return queue;
  }

  function showError(err: unknown): void {
    banner.replaceChildren();
    if (err instanceof ApiRequestError) {
      banner.append(el(doc, "strong", { text: `${err.code}: ` }), `${err.message}`);
      if (err.details.length > 0) {
        banner.append(
          el(doc, "ul", {}, err.details.map((d) => el(doc, "li", { text: d }))),
        );
      }
    } else {
      banner.append(String(err));
    }
    banner.removeAttribute("hidden");
  }

  function hideError(): void {
    banner.setAttribute("hidden", "");
    banner.replaceChildren();
  }

  function configFlag(name: string): boolean {
    return state.profile?.config?.[name] === true;
  }

  function configString(name: string): string | null {
    const value = state.profile?.config?.[name];
    return typeof value === "string" ? value : null;
  }

  async function loadSession(sessionId: string): Promise<void> {
    state.sessionId = sessionId;
    const profile = await client.profile(sessionId);
    state.profile = profile;
    state.choices = new Map();
    if (state.emphasisFor !== sessionId) {
      state.emphasis = profile.timing.mode === "concurrent" ? "concurrent" : "sequential";
      state.emphasisFor = sessionId;
    }
    const wantsSuggestion =
      !profile.terminal && !profile.read_only && configFlag("sdd_only") === false;
    state.suggestion = wantsSuggestion ? await client.suggestions(sessionId) : null;
    state.timingCsv = profile.terminal ? await client.timingCsv(sessionId) : null;
    render();
  }

  function currentSessionEntries(): VerdictEntry[] {
    const labels = panelLabels();
    return labels
      .filter((label) => choiceComplete(state.choices.get(label)))
      .map((label) => choiceToEntry(label, state.choices.get(label)!));
  }

  /** Labels offered in the scan panel: the suggestion's picks, or — on a
   * surface-scan-only session — every container still unclassified. */
  function panelLabels(): string[] {
    if (state.suggestion) {
      return [...state.suggestion.labels];
    }
    if (state.profile && configFlag("sdd_only")) {
      return state.profile.labels.filter((e) => e.status === null).map((e) => e.label);
    }
    return [];
  }

  function submitReady(): boolean {
    if (!state.profile) {
      return false;
    }
    if (configFlag("sdd_only")) {
      return currentSessionEntries().length > 0;
    }
    return state.suggestion !== null && canSubmit(state.suggestion.labels, state.choices);
  }

  async function submitVerdicts(): Promise<void> {
    if (!state.sessionId || !submitReady()) {
      return;
    }
    const body = configFlag("sdd_only")
      ? { verdicts: currentSessionEntries() }
      : { phase: state.suggestion!.phase, verdicts: currentSessionEntries() };
    await client.submitVerdicts(state.sessionId, body);
    await loadSession(state.sessionId);
  }

  function maybeAutosave(): void {
    if (state.autosave && submitReady()) {
      void enqueue(submitVerdicts);
    } else {
      render();
    }
  }

  async function decide(kind: string): Promise<void> {
    if (!state.sessionId) {
      return;
    }
    await client.decide(state.sessionId, { kind, note: state.decisionNote });
    await loadSession(state.sessionId);
  }

  // ----------------------------------------------------------------- views

  function render(): void {
    view.replaceChildren();
    if (state.sessionId === null || state.profile === null) {
      view.append(renderStart());
    } else {
      view.append(renderSession());
    }
  }

  function renderStart(): HTMLElement {
    const section = el(doc, "section", { id: "start-view" });
    const form = el(doc, "form", { id: "start-form" });
    const problems = el(doc, "ul", { id: "form-problems", hidden: "" });

    const field = (labelText: string, input: HTMLElement): HTMLElement =>
      el(doc, "label", { class: "field" }, [
        el(doc, "span", { text: labelText }),
        input,
      ]);

    const baseInput = el(doc, "input", { id: "base-url", value: baseUrl });
    const population = el(doc, "input", {
      id: "population",
      type: "number",
      value: "48",
    });
    const cols = el(doc, "input", { id: "cols", type: "number", value: "4" });
    const schedule = el(doc, "select", { id: "schedule" });
    schedule.append(...SCHEDULES.map((s) => option(doc, s)));
    const sampler = el(doc, "select", { id: "sampler" });
    sampler.append(option(doc, "uniform"), option(doc, "quasi"));
    const seed = el(doc, "input", { id: "seed", type: "number", value: "0" });
    const scenario = el(doc, "select", { id: "scenario" });
    scenario.append(option(doc, "", "none"), ...SCENARIOS.map((s) => option(doc, s)));
    const scanMode = el(doc, "select", { id: "scan-mode" });
    scanMode.append(option(doc, "sequential"), option(doc, "concurrent"));
    const sddOnly = el(doc, "input", { id: "sdd-only", type: "checkbox" });

    form.append(
      field("Service URL", baseInput),
      field("Containers", population),
      field("Columns", cols),
      field("Schedule", schedule),
      field("Sampler", sampler),
      field("Seed", seed),
      field("Scenario", scenario),
      field("Scan mode", scanMode),
      el(doc, "label", { class: "field check" }, [sddOnly, "Surface-scan only"]),
      el(doc, "button", { id: "start-button", type: "submit", text: "Start session" }),
      problems,
    );

    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const check = validateStartForm({
        population: population.value,
        cols: cols.value,
        schedule: schedule.value,
        sampler: sampler.value,
        seed: seed.value,
        scenario: scenario.value,
        scanMode: scanMode.value,
        sddOnly: sddOnly.checked,
      });
      if (!check.ok) {
        problems.replaceChildren(...check.problems.map((p) => el(doc, "li", { text: p })));
        problems.removeAttribute("hidden");
        return;
      }
      problems.setAttribute("hidden", "");
      const nextBase = baseInput.value.trim() || DEFAULT_BASE_URL;
      if (nextBase !== baseUrl) {
        baseUrl = nextBase;
        client = new ApiClient(baseUrl, options.fetchImpl);
        win.localStorage?.setItem(BASE_URL_STORAGE_KEY, baseUrl);
      }
      void enqueue(async () => {
        const created = await client.createSession(check.body);
        win.location.hash = sessionHash(created.id);
        await loadSession(created.id);
      });
    });

    section.append(form);
    return section;
  }

  function renderSession(): HTMLElement {
    const profile = state.profile!;
    const section = el(doc, "section", { id: "session-view" });

    const flags: string[] = [];
    if (profile.read_only) {
      flags.push("read-only");
    }
    if (profile.replayed) {
      flags.push("replayed from knowledge");
    }
    section.append(
      el(doc, "div", { class: "session-head" }, [
        el(doc, "span", { id: "session-id", text: profile.session }),
        el(doc, "span", { id: "phase-heading", text: phaseHeading(profile) }),
        el(doc, "span", { id: "ratio-badge", text: ratioBadge(profile.ratio) }),
        ...(flags.length > 0
          ? [el(doc, "span", { id: "session-flags", text: flags.join(" · ") })]
          : []),
      ]),
    );

    section.append(renderGrid(profile));
    section.append(renderTimingPanel(profile));

    if (profile.terminal) {
      section.append(renderProfilePanel(profile));
    } else if (profile.read_only) {
      section.append(
        el(doc, "p", {
          id: "progress-note",
          text: "This recovered run never reached its final phase; it is shown for reference only.",
        }),
      );
    } else {
      section.append(renderScanPanel());
    }
    return section;
  }

  function renderGrid(profile: ProfilePayload): HTMLElement {
    const grid = el(doc, "div", { id: "grid" });
    grid.style.gridTemplateColumns = `repeat(${profile.grid.cols}, 3rem)`;
    for (const row of buildGrid(profile.labels, profile.grid.cols, state.suggestion)) {
      for (const cell of row) {
        const classes = ["cell", cell.tone];
        if (cell.suggested) {
          classes.push("suggested");
        }
        const cellEl = el(doc, "div", {
          class: classes.join(" "),
          "data-label": cell.label,
        });
        if (cell.p !== null) {
          cellEl.setAttribute("data-p", String(cell.p));
        }
        cellEl.append(el(doc, "span", { class: "cell-label", text: cell.label }));
        if (cell.badges.length > 0) {
          cellEl.append(
            el(doc, "span", { class: "cell-badges", text: cell.badges.join("") }),
          );
        }
        grid.append(cellEl);
      }
    }
    return grid;
  }

  function renderTimingPanel(profile: ProfilePayload): HTMLElement {
    const panel = el(doc, "aside", { id: "timing-panel" });
    panel.append(el(doc, "h2", { text: "Time accounting" }));
    const toggle = el(doc, "select", { id: "mode-toggle" });
    toggle.append(option(doc, "sequential"), option(doc, "concurrent"));
    toggle.value = state.emphasis;
    toggle.addEventListener("change", () => {
      state.emphasis = toggle.value === "concurrent" ? "concurrent" : "sequential";
      render();
    });
    panel.append(el(doc, "label", { class: "field" }, ["Scan discipline", toggle]));
    for (const row of timingRows(profile.timing, state.emphasis)) {
      panel.append(
        el(
          doc,
          "div",
          { class: row.active ? "timing-row active" : "timing-row", "data-id": row.id },
          [
            el(doc, "span", { class: "timing-name", text: row.name }),
            el(doc, "span", { class: "timing-value", text: formatSeconds(row.seconds) }),
          ],
        ),
      );
    }
    return panel;
  }

  function renderScanPanel(): HTMLElement {
    const panel = el(doc, "section", { id: "scan-panel" });
    const labels = panelLabels();
    const sddOnly = configFlag("sdd_only");
    const scenario = configString("scenario");
    const heading = state.suggestion
      ? `Phase ${state.suggestion.phase} verdicts`
      : "Surface scans";
    panel.append(el(doc, "h2", { text: heading }));

    const rows = el(doc, "div", { id: "scan-rows" });
    for (const label of labels) {
      const choice = state.choices.get(label) ?? {};
      const row = el(doc, "div", { class: "scan-row", "data-label": label });
      row.append(el(doc, "span", { class: "scan-label", text: label }));

      const pick = el(doc, "select", { class: "color-pick", "data-label": label });
      pick.append(option(doc, "", "pick…"), ...COLORS.map((c) => option(doc, c)));
      pick.value = choice.color ?? "";
      pick.disabled = choice.scan === true;
      pick.addEventListener("change", () => {
        const color = pick.value === "" ? undefined : (pick.value as Color);
        state.choices.set(label, { color });
        maybeAutosave();
      });
      row.append(pick);

      if (scenario !== null) {
        const scan = el(doc, "input", {
          class: "scan-pick",
          type: "checkbox",
          "data-label": label,
        });
        scan.checked = choice.scan === true;
        scan.addEventListener("change", () => {
          state.choices.set(label, scan.checked ? { scan: true } : {});
          maybeAutosave();
        });
        row.append(el(doc, "label", { class: "check" }, [scan, "simulated scan"]));
      }
      rows.append(row);
    }
    panel.append(rows);

    const autosave = el(doc, "input", { id: "autosave", type: "checkbox" });
    autosave.checked = state.autosave;
    autosave.addEventListener("change", () => {
      state.autosave = autosave.checked;
      maybeAutosave();
    });

    const save = el(doc, "button", { id: "save-verdicts", type: "button", text: "Save" });
    save.disabled = !submitReady();
    save.addEventListener("click", () => {
      void enqueue(submitVerdicts);
    });

    panel.append(
      el(doc, "div", { class: "scan-actions" }, [
        save,
        el(doc, "label", { class: "check" }, [autosave, "AutoSave"]),
      ]),
    );
    if (sddOnly) {
      panel.append(
        el(doc, "p", {
          class: "hint",
          text: "Surface-scan-only session: scan any remaining containers in any order.",
        }),
      );
    }
    return panel;
  }

  function renderProfilePanel(profile: ProfilePayload): HTMLElement {
    const panel = el(doc, "section", { id: "profile-view" });
    panel.append(el(doc, "h2", { text: "Final profile" }));

    const list = (id: string, title: string, labels: string[]): HTMLElement =>
      el(doc, "div", { class: "status-list" }, [
        el(doc, "h3", { text: `${title} (${labels.length})` }),
        el(doc, "ul", { id }, labels.map((l) => el(doc, "li", { text: l }))),
      ]);
    panel.append(
      el(doc, "div", { class: "status-lists" }, [
        list("reds-list", "Red", profile.reds),
        list("oranges-list", "Orange", profile.oranges),
        list("greens-list", "Green", profile.greens),
      ]),
    );

    if (state.timingCsv !== null) {
      panel.append(renderTimingChart(doc, state.timingCsv));
    }

    const decisionPanel = el(doc, "div", { id: "decision-panel" });
    decisionPanel.append(el(doc, "h3", { text: "Disposition" }));
    if (profile.decision) {
      decisionPanel.append(
        el(doc, "p", {
          id: "decision-echo",
          text: profile.decision.note
            ? `Recorded: ${profile.decision.kind} — ${profile.decision.note}`
            : `Recorded: ${profile.decision.kind}`,
        }),
      );
    }
    const problem = el(doc, "p", { id: "decision-problem", hidden: "" });
    const note = el(doc, "input", {
      id: "decision-note",
      placeholder: "note (required for 'else')",
      value: state.decisionNote,
    });
    note.addEventListener("input", () => {
      state.decisionNote = note.value;
    });
    const buttons = el(doc, "div", { class: "decision-buttons" });
    for (const kind of DECISION_KINDS) {
      const button = el(doc, "button", {
        class: "decision-btn",
        type: "button",
        "data-kind": kind,
        text: kind,
      });
      button.addEventListener("click", () => {
        if (kind === "else" && note.value.trim() === "") {
          problem.textContent = "an 'else' disposition needs a note";
          problem.removeAttribute("hidden");
          return;
        }
        problem.setAttribute("hidden", "");
        void enqueue(() => decide(kind));
      });
      buttons.append(button);
    }
    decisionPanel.append(buttons, note, problem);
    panel.append(decisionPanel);
    return panel;
  }

  // ----------------------------------------------------------------- boot

  win.addEventListener("hashchange", () => {
    const fromHash = sessionIdFromHash(win.location.hash);
    if (fromHash !== null && fromHash !== state.sessionId) {
      void enqueue(() => loadSession(fromHash));
    } else if (fromHash === null && state.sessionId !== null) {
      state.sessionId = null;
      state.profile = null;
      state.suggestion = null;
      render();
    }
  });

  const initial = sessionIdFromHash(win.location.hash);
  if (initial !== null) {
    void enqueue(() => loadSession(initial));
  } else {
    render();
  }

  return {
    root,
    settled: () => queue,
    api: () => client,
  };
}

function renderTimingChart(doc: Document, csv: string): HTMLElement {
  const chart = parseTimingCsv(csv);
  const wrap = el(doc, "div", { id: "timing-chart" });
  wrap.append(el(doc, "h3", { text: "Time savings" }));
  if (chart.rows.length === 0) {
    wrap.append(el(doc, "p", { text: "no timing series recorded" }));
    return wrap;
  }
  const row = chart.rows[0];
  const byName = new Map(chart.header.map((name, i) => [name, row[i]]));
  const scale = Math.max(byName.get("t_other") ?? 0, 1e-9);
  const bars = el(doc, "div", { class: "bars" });
  for (const name of ["t_other", "t_d_seq", "t_d_conc", "t_saved"]) {
    const value = byName.get(name);
    if (value === undefined || Number.isNaN(value)) {
      continue;
    }
    const bar = el(doc, "div", { class: "bar-row", "data-name": name });
    const fill = el(doc, "div", { class: "bar" });
    fill.style.width = `${Math.max((value / scale) * 100, 0.5)}%`;
    bar.append(
      el(doc, "span", { class: "bar-name", text: name }),
      fill,
      el(doc, "span", { class: "bar-value", text: formatSeconds(value) }),
    );
    bars.append(bar);
  }
  wrap.append(bars);
  return wrap;
}
