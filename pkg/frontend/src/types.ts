/** Wire types of the session service HTTP contract. */

export interface SessionEvent {
  index: number;
  type: string;
  round: number;
  payload: Record<string, unknown>;
}

export interface EventsResponse {
  events: SessionEvent[];
  next_cursor: number;
}

export interface SessionView {
  session_id: string;
  case_id: string;
  phase: string;
  current_round: number;
  cohort: string[];
  human_student: string | null;
  max_rounds: number;
  visible_messages: SessionEvent[];
  error: string | null;
  ratings_recorded: boolean;
}

export interface CreateSessionBody {
  case_id: string;
  n_students: number;
  human_slot?: boolean;
  human_name?: string;
  max_rounds?: number;
  seed?: number;
}

export interface TurnBody {
  analysis?: string | null;
  query_for_patient?: string | null;
  query_for_expert?: string | null;
}

export interface Ratings {
  IQ: number;
  IE: number;
  OR: number;
}

export const PHASES = {
  studentAnalysis: "StudentAnalysis",
  tutorReview: "TutorReview",
  queryExploration: "QueryExploration",
  completed: "Completed",
  aborted: "Aborted",
} as const;
