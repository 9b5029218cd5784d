import type {
  CreatePayload,
  CreateSessionBody,
  DecisionBody,
  DecisionResponse,
  ErrorBody,
  HealthPayload,
  ProfilePayload,
  SubmitPayload,
  SuggestionPayload,
  VerdictsBody,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Error raised for any non-2xx service response, carrying the wire error body. */
export class ApiRequestError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: string[];

  constructor(status: number, body: Partial<ErrorBody>) {
    super(body.message ?? `request failed with status ${status}`);
    this.name = "ApiRequestError";
    this.status = status;
    this.code = body.code ?? "unknown";
    this.details = body.details ?? [];
  }
}

/** Thin typed wrapper over the service's JSON routes. */
export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const text = await response.text();
    if (!response.ok) {
      let parsed: Partial<ErrorBody> = { message: text };
      try {
        parsed = JSON.parse(text) as Partial<ErrorBody>;
      } catch {
        // non-JSON error body; keep the raw text as the message
      }
      throw new ApiRequestError(response.status, parsed);
    }
    const contentType = response.headers.get("content-type") ?? "";
    if (contentType.includes("application/json")) {
      return JSON.parse(text) as T;
    }
    return text as unknown as T;
  }

  health(): Promise<HealthPayload> {
    return this.request("GET", "/healthz");
  }

  createSession(body: CreateSessionBody): Promise<CreatePayload> {
    return this.request("POST", "/sessions", body);
  }

  suggestions(sessionId: string): Promise<SuggestionPayload> {
    return this.request("GET", `/sessions/${sessionId}/suggestions`);
  }

  submitVerdicts(sessionId: string, body: VerdictsBody): Promise<SubmitPayload> {
    return this.request("POST", `/sessions/${sessionId}/verdicts`, body);
  }

  profile(sessionId: string): Promise<ProfilePayload> {
    return this.request("GET", `/sessions/${sessionId}/profile`);
  }

  decide(sessionId: string, body: DecisionBody): Promise<DecisionResponse> {
    return this.request("POST", `/sessions/${sessionId}/decision`, body);
  }

  dbText(sessionId: string): Promise<string> {
    return this.request("GET", `/sessions/${sessionId}/db`);
  }

  timingCsv(sessionId: string): Promise<string> {
    return this.request("GET", `/sessions/${sessionId}/timing.csv`);
  }
}
