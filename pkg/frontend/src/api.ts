// Thin client for the session service. fetch is injectable for tests.

import type { CandidatesPayload, SessionPayload } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClientError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiClientError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class SessionApi {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  createSession(config: Record<string, unknown>): Promise<SessionPayload> {
    return this.fetchImpl(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ config }),
    }).then((r) => parseOrThrow<SessionPayload>(r));
  }

  getSession(id: string): Promise<SessionPayload> {
    return this.fetchImpl(`${this.baseUrl}/sessions/${id}`).then((r) =>
      parseOrThrow<SessionPayload>(r),
    );
  }

  getCandidates(id: string): Promise<CandidatesPayload> {
    return this.fetchImpl(`${this.baseUrl}/sessions/${id}/candidates`).then((r) =>
      parseOrThrow<CandidatesPayload>(r),
    );
  }

  submitRanking(id: string, ranks: number[]): Promise<SessionPayload> {
    return this.fetchImpl(`${this.baseUrl}/sessions/${id}/ranking`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ ranks }),
    }).then((r) => parseOrThrow<SessionPayload>(r));
  }
}
