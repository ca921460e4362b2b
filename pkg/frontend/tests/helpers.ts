/** A scripted in-memory session service implementing the HTTP contract,
 * used as the transport for client tests. */

import type { HttpResponse, Transport } from "../src/api.js";
import type { Ratings, SessionEvent } from "../src/types.js";

export interface FakeServiceOptions {
  /** release events at most this many per poll to simulate liveness */
  chunkSize?: number;
  /** phases driving the turn-endpoint guards, keyed by current event cursor */
  failGetEventsTimes?: number;
}

export function sessionEventScript(humanId = "You"): SessionEvent[] {
  let index = 0;
  const event = (
    type: string,
    round: number,
    payload: Record<string, unknown>,
  ): SessionEvent => ({ index: index++, type, round, payload });
  return [
    event("session_created", 0, {
      session_id: "case-1234",
      case_id: "wrist-01",
      cohort: ["Mary", "Robert", humanId],
    }),
    event("patient_statement", 1, { text: "I fell and my wrist looks crooked." }),
    event("phase", 1, { phase: "StudentAnalysis" }),
    event("analysis", 1, { student_id: humanId, text: "Could be a distal fracture." }),
    event("awaiting_human", 1, { kind: "analysis", student_id: humanId }),
    event("phase", 1, { phase: "TutorReview" }),
    event("guidance", 1, { text: "What would the lateral film tell us first?" }),
    event("phase", 1, { phase: "QueryExploration" }),
    event("awaiting_human", 1, { kind: "action", student_id: humanId }),
    event("action", 1, { student_id: humanId, query_for_expert: "What is angulation?" }),
    event("expert_answer", 1, { student_id: humanId, text: "Angulation is the tilt of fragments." }),
    event("patient_response", 1, { text: "It hurt right away, the bend was obvious." }),
    event("round_completed", 1, { flags: [] }),
    event("session_completed", 1, { rounds: 1 }),
  ];
}

export class FakeService {
  events: SessionEvent[];
  phase = "StudentAnalysis";
  ratings: Ratings | null = null;
  released: number;
  chunkSize: number;
  failGetEventsTimes: number;
  turnSubmissions: Array<Record<string, unknown>> = [];

  constructor(events: SessionEvent[], options: FakeServiceOptions = {}) {
    this.events = events;
    this.chunkSize = options.chunkSize ?? events.length;
    this.released = 0;
    this.failGetEventsTimes = options.failGetEventsTimes ?? 0;
  }

  transport(): Transport {
    return async (method, path, body): Promise<HttpResponse> => {
      if (method === "GET" && path.includes("/events")) {
        if (this.failGetEventsTimes > 0) {
          this.failGetEventsTimes -= 1;
          throw new Error("connection dropped");
        }
        const after = Number(new URLSearchParams(path.split("?")[1]).get("after") ?? -1);
        this.released = Math.min(this.events.length, this.released + this.chunkSize);
        const visible = this.events.slice(0, this.released).filter((e) => e.index > after);
        const nextCursor = this.released > 0 ? this.events[this.released - 1]!.index : after;
        return { status: 200, body: { events: visible, next_cursor: nextCursor } };
      }
      if (method === "POST" && path.endsWith("/turn")) {
        const turn = body as Record<string, unknown>;
        const isAnalysis = "analysis" in turn;
        if (isAnalysis && this.phase !== "StudentAnalysis") {
          return { status: 409, body: { detail: `not accepting analyses in phase ${this.phase}` } };
        }
        if (!isAnalysis && this.phase !== "QueryExploration") {
          return { status: 409, body: { detail: `not accepting queries in phase ${this.phase}` } };
        }
        this.turnSubmissions.push(turn);
        return { status: 200, body: { accepted: true } };
      }
      if (method === "POST" && path.endsWith("/ratings")) {
        const ratings = body as Ratings;
        for (const key of ["IQ", "IE", "OR"] as const) {
          const value = ratings[key];
          if (!Number.isInteger(value) || value < 1 || value > 10) {
            return { status: 422, body: { detail: `${key} out of range` } };
          }
        }
        if (this.ratings !== null) {
          return {
            status: 409,
            body: { detail: { message: "ratings already recorded", ratings: this.ratings } },
          };
        }
        this.ratings = ratings;
        return { status: 200, body: { recorded: true, ratings } };
      }
      if (method === "GET") {
        return {
          status: 200,
          body: {
            session_id: "case-1234",
            case_id: "wrist-01",
            phase: this.phase,
            current_round: 1,
            cohort: ["Mary", "Robert", "You"],
            human_student: "You",
            max_rounds: 1,
            visible_messages: [],
            error: null,
            ratings_recorded: this.ratings !== null,
          },
        };
      }
      return { status: 404, body: { detail: "unknown path" } };
    };
  }
}
