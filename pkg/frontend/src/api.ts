/** Thin typed client over the session service; transport is injectable so
 * tests can run against a scripted in-memory service. */

import type {
  CreateSessionBody,
  EventsResponse,
  Ratings,
  SessionView,
  TurnBody,
} from "./types.js";

export interface HttpResponse {
  status: number;
  body: unknown;
}

export type Transport = (
  method: "GET" | "POST",
  path: string,
  body?: unknown,
) => Promise<HttpResponse>;

export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.status = status;
    this.detail = detail;
  }
}

export function fetchTransport(baseUrl: string, fetchFn: typeof fetch = fetch): Transport {
  return async (method, path, body) => {
    const response = await fetchFn(baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let parsed: unknown = null;
    try {
      parsed = await response.json();
    } catch {
      parsed = null;
    }
    return { status: response.status, body: parsed };
  };
}

function unwrap<T>(response: HttpResponse): T {
  if (response.status >= 400) {
    const detail =
      response.body && typeof response.body === "object" && "detail" in response.body
        ? (response.body as { detail: unknown }).detail
        : response.body;
    throw new ApiError(response.status, detail);
  }
  return response.body as T;
}

export class SessionApi {
  private readonly transport: Transport;

  constructor(transport: Transport) {
    this.transport = transport;
  }

  async createSession(body: CreateSessionBody): Promise<SessionView> {
    return unwrap(await this.transport("POST", "/sessions", body));
  }

  async getSession(sessionId: string): Promise<SessionView> {
    return unwrap(await this.transport("GET", `/sessions/${sessionId}`));
  }

  async getEvents(sessionId: string, after: number, waitS = 0): Promise<EventsResponse> {
    const query = `after=${after}&wait_s=${waitS}`;
    return unwrap(await this.transport("GET", `/sessions/${sessionId}/events?${query}`));
  }

  async submitTurn(sessionId: string, body: TurnBody): Promise<void> {
    unwrap(await this.transport("POST", `/sessions/${sessionId}/turn`, body));
  }

  async submitRatings(sessionId: string, ratings: Ratings): Promise<void> {
    unwrap(await this.transport("POST", `/sessions/${sessionId}/ratings`, ratings));
  }
}
