import { describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { RatingForm } from "../src/rating.js";
import { FakeService, sessionEventScript } from "./helpers.js";

function makeApi(service: FakeService): SessionApi {
  return new SessionApi(service.transport());
}

describe("rating form", () => {
  it("accepts a valid submission once", async () => {
    const service = new FakeService(sessionEventScript());
    const form = new RatingForm();
    form.setValue("IQ", 9);
    form.setValue("IE", 8);
    form.setValue("OR", 9);
    const ok = await form.submit(makeApi(service), "case-1234");
    expect(ok).toBe(true);
    expect(form.submitted).toBe(true);
    expect(service.ratings).toEqual({ IQ: 9, IE: 8, OR: 9 });
  });

  it("rejects out-of-range values client-side before any request", async () => {
    const service = new FakeService(sessionEventScript());
    const form = new RatingForm();
    form.setValue("IQ", 11);
    const ok = await form.submit(makeApi(service), "case-1234");
    expect(ok).toBe(false);
    expect(form.error).toContain("IQ");
    expect(service.ratings).toBeNull(); // nothing reached the service
    form.setValue("IQ", 0.5 as number);
    expect(form.validate()).toContain("IQ");
  });

  it("surfaces a server 422 inline for tampered requests", async () => {
    const service = new FakeService(sessionEventScript());
    const form = new RatingForm();
    form.validate = () => null; // bypass the client check to simulate tampering
    form.setValue("OR", 42);
    const ok = await form.submit(makeApi(service), "case-1234");
    expect(ok).toBe(false);
    expect(form.error).toContain("OR");
    expect(form.submitted).toBe(false);
  });

  it("rejects double submission and shows prior values", async () => {
    const service = new FakeService(sessionEventScript());
    const api = makeApi(service);
    const first = new RatingForm();
    first.setValue("IQ", 9);
    first.setValue("IE", 8);
    first.setValue("OR", 9);
    await first.submit(api, "case-1234");

    // same form object: locked locally
    const again = await first.submit(api, "case-1234");
    expect(again).toBe(false);
    expect(first.error).toContain("already");

    // a fresh form (e.g. after reload) gets the server 409 and the prior values
    const second = new RatingForm();
    second.setValue("IQ", 1);
    second.setValue("IE", 1);
    second.setValue("OR", 1);
    const ok = await second.submit(api, "case-1234");
    expect(ok).toBe(false);
    expect(second.submitted).toBe(true); // locked: the session is already rated
    expect(second.values).toEqual({ IQ: 9, IE: 8, OR: 9 });
    expect(service.ratings).toEqual({ IQ: 9, IE: 8, OR: 9 });
  });
});
