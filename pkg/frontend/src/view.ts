/** DOM rendering. Everything drawn here derives from ClassroomState, which
 * itself derives only from the event feed; there is no other view state. */

import type { InputGates } from "./gating.js";
import type { ClassroomState, ViewItem } from "./state.js";
import type { FeedStatus } from "./feed.js";

export interface ViewElements {
  banner: HTMLElement;
  feed: HTMLElement;
  analysisBox: HTMLTextAreaElement;
  analysisSend: HTMLButtonElement;
  patientBox: HTMLInputElement;
  expertBox: HTMLInputElement;
  querySend: HTMLButtonElement;
  passTurn: HTMLButtonElement;
  ratingPanel: HTMLElement;
  researchToggle: HTMLInputElement;
  status: HTMLElement;
}

function itemNode(item: ViewItem, research: boolean): HTMLElement {
  const node = document.createElement("div");
  node.className = `item item-${item.kind}`;
  const who = document.createElement("span");
  who.className = "speaker";
  who.textContent = item.speaker ? `${item.speaker} (r${item.round})` : `round ${item.round}`;
  const text = document.createElement("p");
  text.textContent = item.text;
  node.append(who, text);
  if (research && item.monologue) {
    const details = document.createElement("details");
    const summary = document.createElement("summary");
    summary.textContent = "tutor thinking (research mode)";
    const pre = document.createElement("pre");
    pre.textContent = item.monologue;
    details.append(summary, pre);
    node.append(details);
  }
  return node;
}

export function render(
  state: ClassroomState,
  gates: InputGates,
  elements: ViewElements,
  feedStatus: FeedStatus,
): void {
  const phaseLabel = state.aborted
    ? "Session aborted"
    : state.completed
      ? "Session complete - please rate your experience"
      : `Round ${state.round}: ${state.phase}`;
  elements.banner.textContent = phaseLabel;
  elements.status.textContent = feedStatus === "reconnecting" ? "reconnecting..." : "";

  elements.feed.replaceChildren(
    ...state.items.map((item) => itemNode(item, elements.researchToggle.checked)),
  );
  elements.feed.scrollTop = elements.feed.scrollHeight;

  elements.analysisBox.disabled = !gates.analysisEnabled;
  elements.analysisSend.disabled = !gates.analysisEnabled;
  elements.patientBox.disabled = !gates.queryEnabled;
  elements.expertBox.disabled = !gates.queryEnabled;
  elements.querySend.disabled = !gates.queryEnabled;
  elements.passTurn.disabled = !gates.queryEnabled;
  elements.ratingPanel.hidden = !gates.ratingEnabled;
}
