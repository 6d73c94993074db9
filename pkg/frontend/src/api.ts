/** Typed client for the screener service HTTP API. */

let baseUrl = "";

/** Point the client at a service origin; "" means same-origin requests. */
export function configureApi(url: string): void {
  baseUrl = url.replace(/\/$/, "");
}

export interface Opportunity {
  opportunity_id: string;
  title: string;
  requirements: string;
}

export interface Decision {
  eligible: boolean;
  rationale: string[];
  predicted: boolean;
}

export interface SessionView {
  session_id: string;
  turns_used: number;
  max_turns: number;
  state: "awaiting_answer" | "concluded";
  current_question?: string | null;
  decisions?: Record<string, Decision>;
  fallback_warning?: boolean;
}

/** Error body the service returns alongside a non-2xx status. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(baseUrl + path, init);
  if (!res.ok) {
    let code = "unknown_error";
    let message = `Unexpected response ${res.status}`;
    try {
      const body = await res.json();
      if (typeof body.code === "string") code = body.code;
      if (typeof body.message === "string") message = body.message;
    } catch {
      // non-JSON error body; keep the status-based message
    }
    throw new ApiError(res.status, code, message);
  }
  return (await res.json()) as T;
}

function post<T>(path: string, payload: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
}

/** List every opportunity the service can screen for. */
export function listOpportunities(): Promise<Opportunity[]> {
  return request<Opportunity[]>("/v1/opportunities");
}

/** Open a screening session over the chosen opportunities. */
export function createSession(opportunityIds: string[]): Promise<SessionView> {
  return post<SessionView>("/v1/sessions", { opportunity_ids: opportunityIds });
}

/** Submit one free-text answer to the session's current question. */
export function sendAnswer(sessionId: string, answer: string): Promise<SessionView> {
  return post<SessionView>(`/v1/sessions/${sessionId}/answers`, { answer });
}

/** Re-read the current state of an existing session. */
export function getSession(sessionId: string): Promise<SessionView> {
  return request<SessionView>(`/v1/sessions/${sessionId}`);
}
