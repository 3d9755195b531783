// Thin client for the judgment service HTTP API.
//
// The fetch implementation is injectable so sessions can be scripted
// and traffic inspected in tests without a browser or a live server.

import type { ChoiceSubmission, NextResponse, ResultsTable } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class DuplicateSubmissionError extends Error {
  constructor(public readonly itemId: string) {
    super(`item ${itemId} was already judged by this participant`);
    this.name = "DuplicateSubmissionError";
  }
}

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async fetchNext(participantId: string): Promise<NextResponse> {
    const url = `${this.baseUrl}/api/stimuli/next?participant=${encodeURIComponent(participantId)}`;
    const resp = await this.fetchFn(url);
    if (!resp.ok) {
      throw new ApiError(resp.status, `fetch-next failed (${resp.status})`);
    }
    return (await resp.json()) as NextResponse;
  }

  /**
   * Record one choice. Resolves on 201; rejects with
   * DuplicateSubmissionError on 409 so the caller can surface it
   * instead of silently dropping the event.
   */
  async submit(submission: ChoiceSubmission): Promise<void> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/judgments`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(submission),
    });
    if (resp.status === 409) {
      throw new DuplicateSubmissionError(submission.item_id);
    }
    if (resp.status !== 201) {
      throw new ApiError(resp.status, `judgment rejected (${resp.status})`);
    }
  }

  async fetchResults(): Promise<ResultsTable> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/results`);
    if (!resp.ok) {
      throw new ApiError(resp.status, `results unavailable (${resp.status})`);
    }
    return (await resp.json()) as ResultsTable;
  }
}
