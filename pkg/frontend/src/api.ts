/**
 * Typed client for the feedback service.  Every call goes through plain
 * fetch so the UI stays decoupled from the service internals; tests inject
 * a fake fetch via `fetchImpl`.
 */

export interface ShownOutcome {
  kind: string;
  wall_time_ms?: number;
  value_text?: string;
  exception_name?: string;
  exception_message?: string;
  detail?: string;
}

export interface ProposedRow {
  index: number;
  input: string;
  doctest: string | null;
  shown_outcome: ShownOutcome;
  is_given: boolean;
  default_verdict: string;
}

export interface CreationResponse {
  session_id: string;
  state: string;
  function_name: string;
  proposed_doctests: ProposedRow[];
  given_doctest_failures: string[];
}

export interface SessionDocument {
  id: string;
  state: string;
  spec_text: string;
  proposed_views: ProposedRow[];
  revealed_code: string | null;
  [extra: string]: unknown;
}

export interface FeedbackResponse {
  status: string;
  revealed_code: string | null;
  attempts_used: number;
  failure_reason: string;
}

export interface ResultResponse {
  state: string;
  code?: string;
  provenance?: string;
  failure_reason?: string;
  attempts_used: number;
}

export type CorrectionPayload =
  | { kind: "value"; text: string }
  | { kind: "exception"; name: string; message: string };

export interface VerdictPayload {
  input: string;
  verdict: "accept" | "reject";
  correction?: CorrectionPayload;
}

export interface FeedbackPayload {
  verdicts: VerdictPayload[];
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly detail: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface ClientOptions {
  fetchImpl?: typeof fetch;
}

export class ServiceClient {
  private readonly fetcher: typeof fetch;

  constructor(
    readonly baseUrl: string = "",
    options: ClientOptions = {},
  ) {
    this.fetcher = options.fetchImpl ?? ((input, init) => fetch(input, init));
  }

  async createSession(
    specText: string,
    config?: Record<string, number>,
  ): Promise<CreationResponse> {
    const body: Record<string, unknown> = { spec_text: specText };
    if (config !== undefined) {
      body.config = config;
    }
    return (await this.request("POST", "/sessions", body)) as CreationResponse;
  }

  async getSession(sessionId: string): Promise<SessionDocument> {
    const path = `/sessions/${encodeURIComponent(sessionId)}`;
    return (await this.request("GET", path)) as SessionDocument;
  }

  async submitFeedback(
    sessionId: string,
    payload: FeedbackPayload,
  ): Promise<FeedbackResponse> {
    const path = `/sessions/${encodeURIComponent(sessionId)}/feedback`;
    return (await this.request("POST", path, payload)) as FeedbackResponse;
  }

  async getResult(sessionId: string): Promise<ResultResponse> {
    const path = `/sessions/${encodeURIComponent(sessionId)}/result`;
    return (await this.request("GET", path)) as ResultResponse;
  }

  private async request(
    method: "GET" | "POST",
    path: string,
    body?: unknown,
  ): Promise<unknown> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetcher(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      const payload = (await response.json().catch(() => ({}))) as {
        detail?: unknown;
      };
      const detail =
        typeof payload.detail === "string" ? payload.detail : response.statusText;
      throw new ApiError(
        `${method} ${path} failed with ${response.status}: ${detail}`,
        response.status,
        detail,
      );
    }
    return response.json();
  }
}
