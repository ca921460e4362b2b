/** Pure event-feed reducer.
 *
 * The classroom view is a fold over the session's event feed and nothing
 * else: replaying the same events always rebuilds the identical view, which
 * is what makes reload/reconnect safe. Events are applied strictly in index
 * order; stale or duplicate indices are ignored.
 */

import type { SessionEvent } from "./types.js";
import { PHASES } from "./types.js";

export interface ViewItem {
  kind:
    | "patient"
    | "analysis"
    | "guidance"
    | "action"
    | "expert_answer"
    | "notice";
  round: number;
  speaker: string;
  text: string;
  /** present on guidance items only when the service runs in research mode */
  monologue?: string;
}

export interface ClassroomState {
  sessionId: string | null;
  caseId: string | null;
  cohort: string[];
  humanId: string | null;
  phase: string;
  round: number;
  items: ViewItem[];
  awaiting: "analysis" | "action" | null;
  analysisSubmittedRound: number;
  actionSubmittedRound: number;
  completed: boolean;
  aborted: boolean;
  ratingsRecorded: boolean;
  lastIndex: number;
}

export function initialState(): ClassroomState {
  return {
    sessionId: null,
    caseId: null,
    cohort: [],
    humanId: null,
    phase: PHASES.studentAnalysis,
    round: 1,
    items: [],
    awaiting: null,
    analysisSubmittedRound: 0,
    actionSubmittedRound: 0,
    completed: false,
    aborted: false,
    ratingsRecorded: false,
    lastIndex: -1,
  };
}

function str(value: unknown): string {
  return typeof value === "string" ? value : "";
}

export function applyEvent(state: ClassroomState, event: SessionEvent): ClassroomState {
  if (event.index <= state.lastIndex) {
    return state; // duplicate or stale delivery; the feed never reorders
  }
  const next: ClassroomState = { ...state, items: [...state.items], lastIndex: event.index };
  const p = event.payload;
  switch (event.type) {
    case "session_created":
      next.sessionId = str(p["session_id"]) || null;
      next.caseId = str(p["case_id"]) || null;
      next.cohort = Array.isArray(p["cohort"]) ? (p["cohort"] as string[]) : [];
      break;
    case "phase":
      next.phase = str(p["phase"]);
      next.round = event.round;
      if (next.phase !== PHASES.studentAnalysis && next.phase !== PHASES.queryExploration) {
        next.awaiting = null;
      }
      break;
    case "patient_statement":
    case "patient_response":
      next.items.push({ kind: "patient", round: event.round, speaker: "Patient", text: str(p["text"]) });
      break;
    case "analysis":
      next.items.push({
        kind: "analysis",
        round: event.round,
        speaker: str(p["student_id"]),
        text: str(p["text"]),
      });
      break;
    case "guidance": {
      const item: ViewItem = {
        kind: "guidance",
        round: event.round,
        speaker: "Tutor",
        text: str(p["text"]),
      };
      if (typeof p["internal_monologue"] === "string") {
        item.monologue = p["internal_monologue"];
      }
      next.items.push(item);
      break;
    }
    case "action": {
      const parts: string[] = [];
      if (typeof p["query_for_patient"] === "string" && p["query_for_patient"]) {
        parts.push(`(to patient) ${p["query_for_patient"]}`);
      }
      if (typeof p["query_for_expert"] === "string" && p["query_for_expert"]) {
        parts.push(`(to expert) ${p["query_for_expert"]}`);
      }
      if (parts.length > 0) {
        next.items.push({
          kind: "action",
          round: event.round,
          speaker: str(p["student_id"]),
          text: parts.join(" "),
        });
      }
      break;
    }
    case "expert_answer":
      next.items.push({
        kind: "expert_answer",
        round: event.round,
        speaker: "Expert",
        text: str(p["text"]),
      });
      break;
    case "awaiting_human":
      next.awaiting = p["kind"] === "action" ? "action" : "analysis";
      next.humanId = str(p["student_id"]) || next.humanId;
      break;
    case "human_timeout":
      next.awaiting = null;
      next.items.push({
        kind: "notice",
        round: event.round,
        speaker: "",
        text: "Turn timed out and was recorded as silence.",
      });
      break;
    case "session_completed":
      next.completed = true;
      next.awaiting = null;
      break;
    case "session_aborted":
      next.aborted = true;
      next.awaiting = null;
      next.items.push({
        kind: "notice",
        round: event.round,
        speaker: "",
        text: `Session aborted: ${str(p["error"])}`,
      });
      break;
    case "rating_recorded":
      next.ratingsRecorded = true;
      break;
    default:
      break; // unknown event types are ignored, not errors
  }
  return next;
}

export function replay(events: SessionEvent[], from?: ClassroomState): ClassroomState {
  let state = from ?? initialState();
  for (const event of events) {
    state = applyEvent(state, event);
  }
  return state;
}

/** Mark a locally accepted submission so inputs disable until the next phase. */
export function markSubmitted(
  state: ClassroomState,
  kind: "analysis" | "action",
): ClassroomState {
  if (kind === "analysis") {
    return { ...state, analysisSubmittedRound: state.round, awaiting: null };
  }
  return { ...state, actionSubmittedRound: state.round, awaiting: null };
}
