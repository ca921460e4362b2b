/** Post-session rating form model: three 1-10 sliders, exactly one submit. */

import { ApiError, type SessionApi } from "./api.js";
import type { Ratings } from "./types.js";

export class RatingForm {
  values: Ratings = { IQ: 5, IE: 5, OR: 5 };
  submitted = false;
  pending = false;
  error: string | null = null;

  setValue(key: keyof Ratings, value: number): void {
    this.values = { ...this.values, [key]: value };
  }

  /** Client-side check mirroring the server's 1-10 integer constraint. */
  validate(): string | null {
    for (const key of ["IQ", "IE", "OR"] as const) {
      const value = this.values[key];
      if (!Number.isInteger(value) || value < 1 || value > 10) {
        return `${key} must be an integer between 1 and 10`;
      }
    }
    return null;
  }

  async submit(api: SessionApi, sessionId: string): Promise<boolean> {
    if (this.submitted || this.pending) {
      this.error = "ratings were already submitted";
      return false;
    }
    const invalid = this.validate();
    if (invalid !== null) {
      this.error = invalid;
      return false;
    }
    this.pending = true;
    try {
      await api.submitRatings(sessionId, this.values);
      this.submitted = true;
      this.error = null;
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        if (err.status === 409) {
          // someone (or this tab) already rated: lock the form, surface prior values
          this.submitted = true;
          this.error = "ratings were already submitted";
          const detail = err.detail as { ratings?: Ratings } | null;
          if (detail && detail.ratings) {
            this.values = detail.ratings;
          }
        } else {
          this.error = err.message;
        }
        return false;
      }
      this.error = String(err);
      return false;
    } finally {
      this.pending = false;
    }
  }
}
