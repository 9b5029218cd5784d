/** Wire shapes exchanged with the inspection service. */

export type Status = "Red" | "Orange" | "Green";

export type Color = "green" | "orange" | "red";

export interface ErrorBody {
  code: string;
  message: string;
  details: string[];
}

export interface HealthPayload {
  status: string;
  sessions: number;
}

export interface SuggestionPayload {
  phase: number;
  alpha: string;
  beta: string;
  gamma: string;
  labels: string[];
  frame: {
    population: number;
    alpha_side: string[];
    beta_side: string[];
    gamma_side: string[];
  };
}

export interface LabelEntry {
  label: string;
  p: number | null;
  status: Status | null;
}

export interface TimingPayload {
  mode: "sequential" | "concurrent" | null;
  t_other: number;
  t_d: number;
  t_saved: number;
  t_d_sequential: number;
  t_d_concurrent: number;
  per_phase: { sorting_seconds: number | null; detection_seconds: number | null }[];
}

export interface DecisionPayload {
  kind: string;
  note: string;
}

export interface ProfilePayload {
  session: string;
  read_only: boolean;
  replayed: boolean;
  terminal: boolean;
  phase_step: number;
  inspections: number;
  detections: number | null;
  decision: DecisionPayload | null;
  grid: { cols: number; rows: number };
  config: Record<string, unknown> | null;
  ratio: number;
  reds: string[];
  oranges: string[];
  greens: string[];
  labels: LabelEntry[];
  timing: TimingPayload;
}

export interface CreateSessionBody {
  population: number;
  cols: number;
  schedule?: string;
  sampler?: string;
  seed?: number;
  scenario?: string | null;
  scan_mode?: string;
  sdd_only?: boolean;
}

export interface CreatePayload {
  id: string;
  replayed: boolean;
  terminal: boolean;
  phase_step: number;
  grid: { cols: number; rows: number; labels: string[] };
  config: Record<string, unknown>;
  suggestion?: SuggestionPayload;
}

export interface VerdictEntry {
  label: string;
  color?: Color;
  scan?: boolean;
  image_ref?: string;
  surface_ref?: string;
}

export interface VerdictsBody {
  phase?: number;
  verdicts: VerdictEntry[];
}

export interface SubmitResult {
  phase?: number;
  alpha?: string[];
  beta?: string[];
  gamma?: string[];
  ratio?: number;
  scanned?: string[];
}

export interface SubmitPayload {
  result: SubmitResult;
  terminal: boolean;
  phase_step: number;
  profile: ProfilePayload;
  next_suggestion?: SuggestionPayload;
}

export interface DecisionBody {
  kind: string;
  note?: string;
}

export interface DecisionResponse {
  decision: DecisionPayload;
}
