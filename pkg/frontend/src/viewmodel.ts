import type {
  Color,
  CreateSessionBody,
  LabelEntry,
  ProfilePayload,
  Status,
  SuggestionPayload,
  TimingPayload,
  VerdictEntry,
} from "./types.js";

/** Visual tone of one container cell. */
export type CellTone = "red" | "orange" | "green" | "unclassified";

export interface CellView {
  label: string;
  tone: CellTone;
  p: number | null;
  suggested: boolean;
  /** Sampling-side glyphs this cell was suggested for, e.g. ["α", "β"]. */
  badges: string[];
}

export const DECISION_KINDS = ["reject", "isolate", "control", "accept", "else"] as const;

export const SCHEDULES = ["inset1", "paper48", "paper56"] as const;

export const SCENARIOS = ["pristine", "rust_oxidation", "puncture"] as const;

export const COLORS: readonly Color[] = ["green", "orange", "red"];

/**
 * Reference banding of a damage probability, mirroring the service's
 * thresholds. Rendering always uses the status carried by the payload;
 * this local copy exists for legends and for cross-checks in tests.
 */
export function band(p: number): Status {
  if (p < 0.2) {
    return "Green";
  }
  if (p <= 0.5) {
    return "Orange";
  }
  return "Red";
}

export function toneFor(status: Status | null): CellTone {
  switch (status) {
    case "Red":
      return "red";
    case "Orange":
      return "orange";
    case "Green":
      return "green";
    default:
      return "unclassified";
  }
}

/**
 * Arrange per-label entries into display rows. The wire order is row-major
 * starting at row 1, but row 1 is the bottom of the yard, so display rows
 * run top-first.
 */
export function buildGrid(
  labels: LabelEntry[],
  cols: number,
  suggestion: SuggestionPayload | null,
): CellView[][] {
  const rows: CellView[][] = [];
  for (let start = 0; start < labels.length; start += cols) {
    rows.push(
      labels.slice(start, start + cols).map((entry) => {
        const badges: string[] = [];
        if (suggestion) {
          if (entry.label === suggestion.alpha) {
            badges.push("α");
          }
          if (entry.label === suggestion.beta) {
            badges.push("β");
          }
          if (entry.label === suggestion.gamma) {
            badges.push("γ");
          }
        }
        return {
          label: entry.label,
          tone: toneFor(entry.status),
          p: entry.p,
          suggested: badges.length > 0,
          badges,
        };
      }),
    );
  }
  rows.reverse();
  return rows;
}

/** "6.25%" style percentage with up to two decimals, trailing zeros dropped. */
export function ratioBadge(ratio: number): string {
  const percent = Math.round(ratio * 10000) / 100;
  return `${percent}%`;
}

export function phaseHeading(profile: ProfilePayload): string {
  if (profile.terminal) {
    return `Classification complete — ${profile.phase_step} phases, ${profile.inspections} inspections`;
  }
  return `Phase ${profile.phase_step + 1} — ${profile.inspections} inspections so far`;
}

export function formatSeconds(seconds: number): string {
  return `${seconds.toFixed(2)} s`;
}

export interface TimingRow {
  id: string;
  name: string;
  seconds: number;
  active: boolean;
}

/**
 * Rows for the timing panel. Both scan disciplines are always listed; the
 * emphasis toggle only changes which one is highlighted.
 */
export function timingRows(
  timing: TimingPayload,
  emphasis: "sequential" | "concurrent",
): TimingRow[] {
  return [
    { id: "t_other", name: "Inspect-everything baseline", seconds: timing.t_other, active: false },
    {
      id: "t_d_sequential",
      name: "Targeted, sequential scans",
      seconds: timing.t_d_sequential,
      active: emphasis === "sequential",
    },
    {
      id: "t_d_concurrent",
      name: "Targeted, concurrent scans",
      seconds: timing.t_d_concurrent,
      active: emphasis === "concurrent",
    },
    { id: "t_saved", name: "Time saved", seconds: timing.t_saved, active: false },
  ];
}

export interface TimingChart {
  header: string[];
  rows: number[][];
}

export function parseTimingCsv(text: string): TimingChart {
  const lines = text.split(/\r?\n/).filter((line) => line.trim() !== "");
  if (lines.length === 0) {
    return { header: [], rows: [] };
  }
  return {
    header: lines[0].split(","),
    rows: lines.slice(1).map((line) => line.split(",").map(Number)),
  };
}

/** What the operator has picked for one suggested container. */
export interface VerdictChoice {
  color?: Color;
  scan?: boolean;
}

export function choiceComplete(choice: VerdictChoice | undefined): boolean {
  return choice !== undefined && (choice.color !== undefined || choice.scan === true);
}

export function canSubmit(
  labels: readonly string[],
  choices: ReadonlyMap<string, VerdictChoice>,
): boolean {
  return labels.length > 0 && labels.every((label) => choiceComplete(choices.get(label)));
}

export function choiceToEntry(label: string, choice: VerdictChoice): VerdictEntry {
  if (choice.scan) {
    return { label, scan: true };
  }
  if (choice.color !== undefined) {
    return { label, color: choice.color };
  }
  throw new Error(`no verdict picked for ${label}`);
}

export function sessionIdFromHash(hash: string): string | null {
  const match = /^#\/session\/([A-Za-z0-9_-]+)$/.exec(hash);
  return match ? match[1] : null;
}

export function sessionHash(sessionId: string): string {
  return `#/session/${sessionId}`;
}

export interface StartFormValues {
  population: string;
  cols: string;
  schedule: string;
  sampler: string;
  seed: string;
  scenario: string;
  scanMode: string;
  sddOnly: boolean;
}

export type StartFormCheck =
  | { ok: true; body: CreateSessionBody }
  | { ok: false; problems: string[] };

/**
 * Client-side start-form validation: nothing is sent to the service unless
 * this passes. Triangulation needs at least three containers; a
 * surface-scan-only yard may be smaller.
 */
export function validateStartForm(values: StartFormValues): StartFormCheck {
  const problems: string[] = [];
  const population = Number(values.population);
  const cols = Number(values.cols);
  const seed = Number(values.seed);
  if (!Number.isInteger(population) || population < 1) {
    problems.push("population must be a positive whole number");
  }
  if (!Number.isInteger(cols) || cols < 1) {
    problems.push("columns must be a positive whole number");
  }
  if (Number.isInteger(population) && Number.isInteger(cols) && cols > population) {
    problems.push("columns cannot exceed the population");
  }
  if (!Number.isInteger(seed)) {
    problems.push("seed must be a whole number");
  }
  if (!values.sddOnly && Number.isInteger(population) && population >= 1 && population < 3) {
    problems.push("triangulated sampling needs at least 3 containers (or tick surface-scan only)");
  }
  if (values.sddOnly && values.scenario === "") {
    problems.push("surface-scan-only sessions need a scenario to draw scans from");
  }
  if (problems.length > 0) {
    return { ok: false, problems };
  }
  const body: CreateSessionBody = {
    population,
    cols,
    schedule: values.schedule,
    sampler: values.sampler,
    seed,
    scenario: values.scenario === "" ? null : values.scenario,
    scan_mode: values.scanMode,
    sdd_only: values.sddOnly,
  };
  return { ok: true, body };
}
