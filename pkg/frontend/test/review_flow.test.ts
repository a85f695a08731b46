/**
 * End-to-end contract for the review screen against a scripted service:
 * the reviewer sees one row per proposed doctest with Accept pre-selected,
 * cannot submit a rejection without a valid correction, and the corrected
 * session reveals its implementation exactly as the service sent it.
 */

import { describe, expect, it } from "vitest";

import { ApiError, ServiceClient, type FeedbackResponse } from "../src/api.js";
import { renderBanner, renderReview, renderRevealed } from "../src/render.js";
import {
  buildFeedbackPayload,
  canSubmit,
  fromCreation,
  setCorrection,
  setVerdict,
} from "../src/viewmodel.js";
import { SPEC_TEXT, sampleCreation } from "./viewmodel.test.js";

const REVEALED_CODE = `def min_index(s: str) -> int:
    best = -1
    for i, c in enumerate(s):
        if c.isdigit() and (best < 0 or c < s[best]):
            best = i
    return best
`;

function scriptedSubmit(
  response: Response,
  bodies: unknown[],
): ServiceClient {
  return new ServiceClient("", {
    fetchImpl: async (_input, init) => {
      bodies.push(JSON.parse(String(init?.body)));
      return response;
    },
  });
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("review flow", () => {
  it("starts with every proposed doctest accepted and no correction editor", () => {
    const state = fromCreation(sampleCreation(), SPEC_TEXT);
    expect(state.rows).toHaveLength(3);
    expect(state.rows.every((row) => row.verdict === "accept")).toBe(true);
    const html = renderReview(state);
    expect(html.match(/<tr data-index=/g)).toHaveLength(3);
    expect(html).not.toContain('class="correction"');
    expect(canSubmit(state)).toBe(true);
  });

  it("an all-accept submission carries no corrections", () => {
    const state = fromCreation(sampleCreation(), SPEC_TEXT);
    const payload = buildFeedbackPayload(state);
    expect(payload.verdicts).toHaveLength(3);
    expect(payload.verdicts.some((v) => "correction" in v)).toBe(false);
  });

  it("blocks submission while a rejected row has no valid correction", () => {
    let state = fromCreation(sampleCreation(), SPEC_TEXT);
    state = setVerdict(state, 1, "reject");
    expect(canSubmit(state)).toBe(false);
    expect(renderReview(state)).toContain("disabled>Submit");

    state = setCorrection(state, 1, "0,,");
    expect(canSubmit(state)).toBe(false);
    expect(renderReview(state)).toContain("0,,");

    state = setCorrection(state, 1, "0");
    expect(canSubmit(state)).toBe(true);
  });

  it("submits reviewer corrections and reveals the returned code verbatim", async () => {
    let state = fromCreation(sampleCreation(), SPEC_TEXT);
    state = setVerdict(state, 1, "reject");
    state = setCorrection(state, 1, "0");
    state = setVerdict(state, 2, "reject");
    state = setCorrection(state, 2, "5");

    const payload = buildFeedbackPayload(state);
    expect(payload.verdicts).toEqual([
      { input: "('2025',)", verdict: "accept" },
      { input: "('',)", verdict: "reject", correction: { kind: "value", text: "0" } },
      {
        input: "('abcde',)",
        verdict: "reject",
        correction: { kind: "value", text: "5" },
      },
    ]);

    const bodies: unknown[] = [];
    const client = scriptedSubmit(
      jsonResponse(200, {
        status: "revealed",
        revealed_code: REVEALED_CODE,
        attempts_used: 1,
        failure_reason: "",
      }),
      bodies,
    );
    const response: FeedbackResponse = await client.submitFeedback(
      state.sessionId,
      payload,
    );
    expect(bodies).toEqual([payload]);
    expect(response.status).toBe("revealed");
    expect(response.revealed_code).toBe(REVEALED_CODE);

    const html = renderRevealed(response.revealed_code!, {
      attemptsUsed: response.attempts_used,
    });
    expect(html).toContain("best &lt; 0 or c &lt; s[best]");
    expect(html).not.toContain("best < 0");
  });

  it("prompts a reload when the submit conflicts with a finished session", async () => {
    const client = scriptedSubmit(
      jsonResponse(409, { detail: "session is revealed, not awaiting feedback" }),
      [],
    );
    const state = fromCreation(sampleCreation(), SPEC_TEXT);
    const error = await client
      .submitFeedback(state.sessionId, buildFeedbackPayload(state))
      .catch((e: unknown) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).status).toBe(409);

    const banner = renderBanner("error", "this session has moved on", {
      reload: true,
    });
    expect(banner).toContain('id="reload-btn"');
  });

  it("reports a failed correction round instead of revealing code", async () => {
    let state = fromCreation(sampleCreation(), SPEC_TEXT);
    state = setVerdict(state, 1, "reject");
    state = setCorrection(state, 1, "0");
    const client = scriptedSubmit(
      jsonResponse(200, {
        status: "failed",
        revealed_code: null,
        attempts_used: 1,
        failure_reason: "correction backend failed: fixture exhausted",
      }),
      [],
    );
    const response = await client.submitFeedback(
      state.sessionId,
      buildFeedbackPayload(state),
    );
    expect(response.status).toBe("failed");
    expect(response.revealed_code).toBeNull();
    expect(response.failure_reason).toContain("correction backend failed");
  });

  it("shows the empty state with the given doctests when nothing was proposed", () => {
    const creation = { ...sampleCreation(), proposed_doctests: [] };
    const state = fromCreation(creation, SPEC_TEXT);
    expect(canSubmit(state)).toBe(false);
    const html = renderReview(state);
    expect(html).toContain("no extra doctests were proposed");
    expect(html).toContain("&gt;&gt;&gt; min_index(&#39;2025&#39;)");
  });
});
