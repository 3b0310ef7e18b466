import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, DuplicateSubmission } from "../src/api.js";
import type { AnnotationPayload } from "../src/types.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

const PAYLOAD: AnnotationPayload = {
  annotator_id: "ann1",
  pair_id: "p1",
  spans: { src: [[0, 2, "Changed"]], tgt: [] },
  sentence_class: "SomeMeaningDifference",
  notes: null,
};

describe("ApiClient", () => {
  it("fetches the next pair from the session endpoint", async () => {
    const calls: string[] = [];
    const client = new ApiClient("http://x", async (url) => {
      calls.push(url);
      return jsonResponse(200, {
        pair_id: "p1",
        src_tokens: ["a"],
        tgt_tokens: ["b"],
        remaining: 3,
      });
    });
    const pair = await client.nextPair("ann1-s0");
    expect(calls).toEqual(["http://x/api/session/ann1-s0/next"]);
    expect(pair?.pair_id).toBe("p1");
  });

  it("returns null when the session is exhausted (204)", async () => {
    const client = new ApiClient("", async () => new Response(null, { status: 204 }));
    expect(await client.nextPair("s")).toBeNull();
  });

  it("posts the annotation as JSON and returns the server echo", async () => {
    let seen: { url: string; init?: RequestInit } | null = null;
    const client = new ApiClient("http://x", async (url, init) => {
      seen = { url, init };
      return jsonResponse(200, { ...PAYLOAD });
    });
    const echo = await client.submitAnnotation("ann1-s0", PAYLOAD);
    expect(seen!.url).toBe("http://x/api/session/ann1-s0/annotation");
    expect(seen!.init?.method).toBe("POST");
    expect(JSON.parse(seen!.init?.body as string)).toEqual(PAYLOAD);
    expect(echo.sentence_class).toBe("SomeMeaningDifference");
  });

  it("surfaces 400 validation errors with the field name", async () => {
    const client = new ApiClient("", async () =>
      jsonResponse(400, {
        detail: { message: "span (0,9) out of bounds", field: "spans" },
      }),
    );
    const err = await client
      .submitAnnotation("s", PAYLOAD)
      .then(() => null)
      .catch((e) => e as ApiError);
    expect(err).toBeInstanceOf(ApiError);
    expect(err?.status).toBe(400);
    expect(err?.field).toBe("spans");
    expect(err?.message).toMatch(/out of bounds/);
  });

  it("raises DuplicateSubmission on 409", async () => {
    const client = new ApiClient("", async () =>
      jsonResponse(409, { detail: { message: "already exists" } }),
    );
    await expect(client.submitAnnotation("s", PAYLOAD)).rejects.toBeInstanceOf(
      DuplicateSubmission,
    );
  });

  it("handles 404 with a plain-string detail", async () => {
    const client = new ApiClient("", async () =>
      jsonResponse(404, { detail: { message: "unknown session 'z'" } }),
    );
    const err = await client.nextPair("z").catch((e) => e as ApiError);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(404);
  });

  it("propagates network failures so the caller can keep the draft", async () => {
    const client = new ApiClient("", async () => {
      throw new TypeError("fetch failed");
    });
    await expect(client.submitAnnotation("s", PAYLOAD)).rejects.toThrow(
      /fetch failed/,
    );
  });
});
