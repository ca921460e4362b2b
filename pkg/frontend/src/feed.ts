/** Long-polling event feed with cursor resume.
 *
 * The cursor is the last applied event index; after any interruption the
 * loop resumes from it, so no event is lost or reordered. Consumers watch
 * `status` to render a reconnect banner.
 */

import type { SessionApi } from "./api.js";
import type { SessionEvent } from "./types.js";

export type FeedStatus = "idle" | "live" | "reconnecting" | "stopped";

export interface FeedOptions {
  waitS?: number;
  retryDelayMs?: number;
  /** test hook: await between reconnect attempts */
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class EventFeed {
  private readonly api: SessionApi;
  private readonly sessionId: string;
  private readonly onEvent: (event: SessionEvent) => void;
  private readonly onStatus: (status: FeedStatus) => void;
  private readonly waitS: number;
  private readonly retryDelayMs: number;
  private readonly sleep: (ms: number) => Promise<void>;

  cursor = -1;
  status: FeedStatus = "idle";
  private running = false;

  constructor(
    api: SessionApi,
    sessionId: string,
    onEvent: (event: SessionEvent) => void,
    onStatus: (status: FeedStatus) => void = () => undefined,
    options: FeedOptions = {},
  ) {
    this.api = api;
    this.sessionId = sessionId;
    this.onEvent = onEvent;
    this.onStatus = onStatus;
    this.waitS = options.waitS ?? 20;
    this.retryDelayMs = options.retryDelayMs ?? 1000;
    this.sleep = options.sleep ?? defaultSleep;
  }

  private setStatus(status: FeedStatus): void {
    this.status = status;
    this.onStatus(status);
  }

  /** Fetch whatever is queued past the cursor once; returns events applied. */
  async pollOnce(): Promise<number> {
    const response = await this.api.getEvents(this.sessionId, this.cursor, this.waitS);
    let applied = 0;
    for (const event of response.events) {
      if (event.index <= this.cursor) {
        continue;
      }
      this.cursor = event.index;
      this.onEvent(event);
      applied += 1;
    }
    return applied;
  }

  async run(isDone: () => boolean): Promise<void> {
    this.running = true;
    this.setStatus("live");
    while (this.running && !isDone()) {
      try {
        await this.pollOnce();
        if (this.status !== "live") {
          this.setStatus("live");
        }
      } catch {
        this.setStatus("reconnecting");
        await this.sleep(this.retryDelayMs);
      }
    }
    this.setStatus("stopped");
  }

  stop(): void {
    this.running = false;
  }
}
