import { describe, expect, it } from "vitest";

import { gatesFor } from "../src/gating.js";
import { initialState, markSubmitted, replay, type ClassroomState } from "../src/state.js";
import { sessionEventScript } from "./helpers.js";

function humanState(overrides: Partial<ClassroomState>): ClassroomState {
  return { ...initialState(), humanId: "You", ...overrides };
}

describe("input gating", () => {
  it("enables only the analysis box during StudentAnalysis", () => {
    const gates = gatesFor(humanState({ phase: "StudentAnalysis", round: 1 }));
    expect(gates.analysisEnabled).toBe(true);
    expect(gates.queryEnabled).toBe(false);
    expect(gates.ratingEnabled).toBe(false);
  });

  it("blocks Phase-3 inputs during TutorReview", () => {
    const gates = gatesFor(humanState({ phase: "TutorReview", round: 1 }));
    expect(gates.queryEnabled).toBe(false);
    expect(gates.analysisEnabled).toBe(false);
  });

  it("enables query boxes only during QueryExploration", () => {
    const gates = gatesFor(humanState({ phase: "QueryExploration", round: 1 }));
    expect(gates.queryEnabled).toBe(true);
    expect(gates.analysisEnabled).toBe(false);
  });

  it("disables inputs after a submission until the next round", () => {
    let state = humanState({ phase: "StudentAnalysis", round: 1 });
    state = markSubmitted(state, "analysis");
    expect(gatesFor(state).analysisEnabled).toBe(false);
    // next round re-enables
    state = { ...state, round: 2 };
    expect(gatesFor(state).analysisEnabled).toBe(true);
  });

  it("spectator sessions never enable inputs", () => {
    const state = { ...initialState(), phase: "QueryExploration" };
    expect(gatesFor(state).queryEnabled).toBe(false);
  });

  it("rating form opens exactly when the session completes", () => {
    const completed = replay(sessionEventScript());
    const gates = gatesFor(completed);
    expect(gates.ratingEnabled).toBe(true);
    expect(gates.analysisEnabled).toBe(false);
    expect(gates.queryEnabled).toBe(false);
    const rated = { ...completed, ratingsRecorded: true };
    expect(gatesFor(rated).ratingEnabled).toBe(false);
  });

  it("aborted sessions disable everything except nothing", () => {
    const state = humanState({ phase: "StudentAnalysis", aborted: true });
    const gates = gatesFor(state);
    expect(gates.analysisEnabled).toBe(false);
    expect(gates.queryEnabled).toBe(false);
    expect(gates.ratingEnabled).toBe(false);
  });
});
