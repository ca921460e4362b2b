/** Which inputs are enabled, derived purely from the classroom state.
 * The server re-checks everything; this only prevents doomed submissions. */

import type { ClassroomState } from "./state.js";
import { PHASES } from "./types.js";

export interface InputGates {
  analysisEnabled: boolean;
  queryEnabled: boolean;
  ratingEnabled: boolean;
}

export function gatesFor(state: ClassroomState): InputGates {
  const isHumanSeat = state.humanId !== null;
  const live = !state.completed && !state.aborted;
  return {
    analysisEnabled:
      isHumanSeat &&
      live &&
      state.phase === PHASES.studentAnalysis &&
      state.analysisSubmittedRound < state.round,
    queryEnabled:
      isHumanSeat &&
      live &&
      state.phase === PHASES.queryExploration &&
      state.actionSubmittedRound < state.round,
    ratingEnabled: state.completed && !state.ratingsRecorded,
  };
}
