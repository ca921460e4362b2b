import { describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { EventFeed } from "../src/feed.js";
import { applyEvent, initialState, replay } from "../src/state.js";
import { FakeService, sessionEventScript } from "./helpers.js";

describe("classroom state reducer", () => {
  it("renders all events in feed order", () => {
    const events = sessionEventScript();
    const state = replay(events);
    const texts = state.items.map((item) => item.text);
    expect(texts).toEqual([
      "I fell and my wrist looks crooked.",
      "Could be a distal fracture.",
      "What would the lateral film tell us first?",
      "(to expert) What is angulation?",
      "Angulation is the tilt of fragments.",
      "It hurt right away, the bend was obvious.",
    ]);
    expect(state.completed).toBe(true);
    expect(state.cohort).toEqual(["Mary", "Robert", "You"]);
    expect(state.humanId).toBe("You");
  });

  it("reload reproduces the identical view from event replay", async () => {
    // live view: events arrive in small chunks through the long-poll feed
    const service = new FakeService(sessionEventScript(), { chunkSize: 3 });
    const api = new SessionApi(service.transport());
    let live = initialState();
    const feed = new EventFeed(api, "case-1234", (event) => {
      live = applyEvent(live, event);
    }, () => undefined, { waitS: 0, sleep: async () => undefined });
    await feed.run(() => live.completed);

    // forced reload: a fresh client replays the full feed from cursor -1
    const reloadService = new FakeService(sessionEventScript());
    const reloadApi = new SessionApi(reloadService.transport());
    let reloaded = initialState();
    const reloadFeed = new EventFeed(reloadApi, "case-1234", (event) => {
      reloaded = applyEvent(reloaded, event);
    }, () => undefined, { waitS: 0, sleep: async () => undefined });
    await reloadFeed.run(() => reloaded.completed);

    expect(reloaded).toEqual(live); // event-replay equality
  });

  it("ignores duplicate and stale deliveries without reordering", () => {
    const events = sessionEventScript();
    let state = replay(events.slice(0, 6));
    const itemsBefore = state.items.map((i) => i.text);
    state = applyEvent(state, events[2]!); // stale
    state = applyEvent(state, events[5]!); // duplicate of last applied
    expect(state.items.map((i) => i.text)).toEqual(itemsBefore);
    state = applyEvent(state, events[6]!); // next in order still applies
    expect(state.items.length).toBe(itemsBefore.length + 1);
  });

  it("guidance hides monologue unless the service included it", () => {
    const events = sessionEventScript();
    const plain = replay(events);
    const guidance = plain.items.find((i) => i.kind === "guidance");
    expect(guidance?.monologue).toBeUndefined();

    const research = events.map((e) =>
      e.type === "guidance"
        ? { ...e, payload: { ...e.payload, internal_monologue: "<think_history>h</think_history>" } }
        : e,
    );
    const withMono = replay(research);
    expect(withMono.items.find((i) => i.kind === "guidance")?.monologue).toContain("think_history");
  });

  it("session_aborted surfaces a notice and stops awaiting", () => {
    let state = replay(sessionEventScript().slice(0, 5));
    expect(state.awaiting).toBe("analysis");
    state = applyEvent(state, {
      index: state.lastIndex + 1,
      type: "session_aborted",
      round: 1,
      payload: { error: "backend unreachable" },
    });
    expect(state.aborted).toBe(true);
    expect(state.awaiting).toBeNull();
    expect(state.items.at(-1)?.text).toContain("backend unreachable");
  });
});
