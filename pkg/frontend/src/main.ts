/** Browser entry point: joins (or creates) a session and wires the loop
 * feed -> state -> render, plus the submit handlers. */

import { ApiError, SessionApi, fetchTransport } from "./api.js";
import { EventFeed } from "./feed.js";
import { gatesFor } from "./gating.js";
import { RatingForm } from "./rating.js";
import {
  applyEvent,
  initialState,
  markSubmitted,
  type ClassroomState,
} from "./state.js";
import { render, type ViewElements } from "./view.js";

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? "";
  const api = new SessionApi(fetchTransport(base));

  let sessionId = params.get("session");
  if (!sessionId) {
    const created = await api.createSession({
      case_id: params.get("case") ?? "wrist-01",
      n_students: Number(params.get("students") ?? 2),
      human_slot: true,
      human_name: params.get("name") ?? "You",
      max_rounds: Number(params.get("rounds") ?? 2),
    });
    sessionId = created.session_id;
    const url = new URL(window.location.href);
    url.searchParams.set("session", sessionId);
    window.history.replaceState(null, "", url);
  }

  const elements: ViewElements = {
    banner: element("banner"),
    feed: element("feed"),
    analysisBox: element("analysis-box"),
    analysisSend: element("analysis-send"),
    patientBox: element("patient-box"),
    expertBox: element("expert-box"),
    querySend: element("query-send"),
    passTurn: element("pass-turn"),
    ratingPanel: element("rating-panel"),
    researchToggle: element("research-toggle"),
    status: element("status"),
  };

  let state: ClassroomState = initialState();
  const ratingForm = new RatingForm();
  const redraw = () => render(state, gatesFor(state), elements, feed.status);

  const feed = new EventFeed(
    api,
    sessionId,
    (event) => {
      state = applyEvent(state, event);
      redraw();
    },
    () => redraw(),
  );

  const surface = (err: unknown): void => {
    elements.status.textContent =
      err instanceof ApiError ? `rejected (${err.status}): ${err.message}` : String(err);
  };

  elements.analysisSend.addEventListener("click", async () => {
    const text = elements.analysisBox.value.trim();
    if (!text) {
      surface(new Error("analysis must be non-empty"));
      return;
    }
    try {
      await api.submitTurn(sessionId!, { analysis: text });
      state = markSubmitted(state, "analysis");
      elements.analysisBox.value = "";
      redraw();
    } catch (err) {
      surface(err);
    }
  });

  const sendAction = async (patient: string | null, expert: string | null) => {
    try {
      await api.submitTurn(sessionId!, {
        query_for_patient: patient,
        query_for_expert: expert,
      });
      state = markSubmitted(state, "action");
      elements.patientBox.value = "";
      elements.expertBox.value = "";
      redraw();
    } catch (err) {
      surface(err);
    }
  };
  elements.querySend.addEventListener("click", () =>
    sendAction(elements.patientBox.value.trim() || null, elements.expertBox.value.trim() || null),
  );
  elements.passTurn.addEventListener("click", () => sendAction(null, null));

  element<HTMLButtonElement>("rating-send").addEventListener("click", async () => {
    for (const key of ["IQ", "IE", "OR"] as const) {
      ratingForm.setValue(key, Number(element<HTMLInputElement>(`rate-${key}`).value));
    }
    const ok = await ratingForm.submit(api, sessionId!);
    element("rating-result").textContent = ok
      ? "Thank you! Your ratings were recorded."
      : (ratingForm.error ?? "submission failed");
    redraw();
  });

  elements.researchToggle.addEventListener("change", redraw);

  redraw();
  await feed.run(() => state.completed || state.aborted);
  redraw();
}

start().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner) banner.textContent = `failed to start: ${err}`;
});
