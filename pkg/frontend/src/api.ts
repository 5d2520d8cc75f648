import type { FeedbackRequest, MetricsPayload, QueryPayload } from "./types.js";

export class ApiConflict extends Error {
  constructor(public code: string, message: string) {
    super(message);
  }
}

/** Thin typed client over the session service; no client-side inference. */
export class SessionApi {
  constructor(private base: string, private fetchFn: typeof fetch = fetch) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(`${this.base}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    const body = await res.json();
    if (res.status === 409) {
      throw new ApiConflict(body.code ?? "conflict", body.message ?? "conflict");
    }
    if (!res.ok) {
      throw new Error(`${res.status}: ${body.message ?? JSON.stringify(body)}`);
    }
    return body as T;
  }

  createSession(config: unknown): Promise<{ session_id: string }> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ config }),
    });
  }

  listSessions(): Promise<{ sessions: { session_id: string; status: string }[] }> {
    return this.request("/sessions");
  }

  getQuery(sessionId: string): Promise<QueryPayload> {
    return this.request(`/sessions/${sessionId}/query`);
  }

  postFeedback(sessionId: string, feedback: FeedbackRequest):
      Promise<{ status: string; done: boolean }> {
    return this.request(`/sessions/${sessionId}/feedback`, {
      method: "POST",
      body: JSON.stringify(feedback),
    });
  }

  getMetrics(sessionId: string): Promise<MetricsPayload> {
    return this.request(`/sessions/${sessionId}/metrics`);
  }

  simulate(config: unknown): Promise<{ status: string; history: unknown[] }> {
    return this.request("/simulate", {
      method: "POST",
      body: JSON.stringify({ config }),
    });
  }
}
