// HTTP client for the evaluation service.
//
// All network traffic goes through the injected fetch function, so tests
// can stand in a fake transport without touching a real server.

import type {
  PagePayload,
  SessionSummary,
  SubmitBody,
  SubmitResult,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Non-2xx response from the service, carrying its error document. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly field?: string,
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

const ALREADY_ANSWERED = 409;

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchFn?: FetchLike,
    private readonly maxAttempts: number = 3,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  openSession(studyId: string, takerId: string): Promise<SessionSummary> {
    const query = new URLSearchParams({ taker: takerId, study: studyId });
    return this.getJson(`/sessions/next?${query}`);
  }

  fetchSession(sessionId: string): Promise<SessionSummary> {
    return this.getJson(`/sessions/${encodeURIComponent(sessionId)}`);
  }

  fetchPage(sessionId: string, pageIndex: number): Promise<PagePayload> {
    return this.getJson(
      `/sessions/${encodeURIComponent(sessionId)}/pages/${pageIndex}`,
    );
  }

  /**
   * Post one page response (or skip).
   *
   * Network failures are retried. A retry may hit "already answered" when
   * the first attempt landed but its response was lost; that outcome is
   * recovered from the session summary instead of being surfaced as an
   * error, so resubmitting is safe.
   */
  async submitPage(
    sessionId: string,
    pageIndex: number,
    body: SubmitBody,
  ): Promise<SubmitResult> {
    const path = `/sessions/${encodeURIComponent(sessionId)}/pages/${pageIndex}`;
    let lastError: unknown = null;
    for (let attempt = 0; attempt < this.maxAttempts; attempt++) {
      let res: Response;
      try {
        res = await this.fetchFn(this.baseUrl + path, {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: JSON.stringify(body),
        });
      } catch (err) {
        lastError = err;
        continue;
      }
      if (res.status === ALREADY_ANSWERED && attempt > 0) {
        return this.recoverSubmit(sessionId);
      }
      if (!res.ok) {
        throw await toApiError(res);
      }
      return (await res.json()) as SubmitResult;
    }
    throw lastError instanceof Error
      ? lastError
      : new Error("submission failed after retries");
  }

  /** The vote landed on an earlier attempt; read the outcome back. */
  private async recoverSubmit(sessionId: string): Promise<SubmitResult> {
    const session = await this.fetchSession(sessionId);
    return {
      session_id: session.session_id,
      status: session.status,
      skips_used: session.skips_used,
      needs_review: session.status === "terminated",
      completed: session.completed,
    };
  }

  private async getJson<T>(path: string): Promise<T> {
    let lastError: unknown = null;
    for (let attempt = 0; attempt < this.maxAttempts; attempt++) {
      let res: Response;
      try {
        res = await this.fetchFn(this.baseUrl + path);
      } catch (err) {
        lastError = err;
        continue;
      }
      if (!res.ok) {
        throw await toApiError(res);
      }
      return (await res.json()) as T;
    }
    throw lastError instanceof Error
      ? lastError
      : new Error("request failed after retries");
  }
}

async function toApiError(res: Response): Promise<ApiError> {
  let detail = res.statusText || `HTTP ${res.status}`;
  let field: string | undefined;
  try {
    const doc = await res.json();
    if (typeof doc?.detail === "string") detail = doc.detail;
    if (typeof doc?.field === "string") field = doc.field;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(res.status, detail, field);
}
