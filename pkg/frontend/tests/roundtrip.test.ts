// Scripted end-to-end session against the real annotation service: one
// annotator highlights two spans (Changed + Added), picks a sentence class,
// and submits; two more scripted annotators complete the same pairs; the
// server-side record must equal the draft and the pair must appear in
// /api/iaa. Requires the Python package to be installed (python3 importable).

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, DuplicateSubmission } from "../src/api.js";
import { AnnotationDraft } from "../src/draft.js";
import { snapSelectionToTokens, tokenOffsets } from "../src/spans.js";
import type { SentenceClass, SpanLabel } from "../src/types.js";

const PORT = 18000 + Math.floor(Math.random() * 20000);
const BASE = `http://127.0.0.1:${PORT}`;
const ANNOTATORS = ["ann1", "ann2", "ann3"];

const PAIRS = [
  ["p1", "the quick brown fox jumps", "le renard brun rapide saute"],
  ["p2", "a cat sat on the mat", "un chat est assis sur le tapis"],
];

let server: ChildProcess;
const client = new ApiClient(BASE);

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${BASE}/api/progress`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error("annotation service did not start");
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "semdiv-ui-"));
  const bitext = join(dir, "bitext.tsv");
  writeFileSync(bitext, PAIRS.map((r) => r.join("\t") + "\n").join(""));
  server = spawn(
    "python3",
    [
      "-m", "semdiv.cli", "serve",
      "--bitext", bitext,
      "--annotators", ANNOTATORS.join(","),
      "--journal", join(dir, "journal.jsonl"),
      "--port", String(PORT),
    ],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 30_000);

afterAll(() => {
  server?.kill();
});

/** Drive one annotator's session to completion, like a browser would. */
async function runSession(
  annotator: string,
  cls: SentenceClass,
  highlight: boolean,
): Promise<Record<string, unknown>[]> {
  const sessionId = `${annotator}-s0`;
  const echoes: Record<string, unknown>[] = [];
  for (;;) {
    const pair = await client.nextPair(sessionId);
    if (pair === null) break;
    const draft = new AnnotationDraft(annotator, pair);
    if (highlight) {
      // simulate two drags over the rendered source text, one per label
      const offsets = tokenOffsets(pair.src_tokens);
      const drags: [number, number, SpanLabel][] = [
        [offsets[1][0] + 1, offsets[2][1], "Changed"], // mid-token 1 to token 2
        [offsets[4][0], offsets[4][1], "Added"],
      ];
      for (const [a, b, label] of drags) {
        const snapped = snapSelectionToTokens(pair.src_tokens, a, b);
        expect(snapped).not.toBeNull();
        expect(draft.addSpan("src", { ...snapped!, label })).toBeNull();
      }
      expect(draft.spans.src).toEqual([
        { start: 1, end: 3, label: "Changed" },
        { start: 4, end: 5, label: "Added" },
      ]);
    }
    draft.setSentenceClass(cls);
    expect(draft.canSubmit()).toBe(true);
    const payload = draft.toPayload();
    const echo = await client.submitAnnotation(sessionId, payload);
    // the server-side record equals the draft
    expect(echo).toEqual({ ...payload });
    echoes.push(echo);
  }
  return echoes;
}

describe("scripted annotation round trip", () => {
  it("submits drafts, resists duplicates, and surfaces IAA", async () => {
    const first = await runSession("ann1", "SomeMeaningDifference", true);
    expect(first).toHaveLength(PAIRS.length);

    // resubmitting the same record is rejected without data loss
    await expect(
      client.submitAnnotation("ann1-s0", {
        annotator_id: "ann1",
        pair_id: PAIRS[0][0],
        spans: { src: [], tgt: [] },
        sentence_class: "Unrelated",
        notes: null,
      }),
    ).rejects.toBeInstanceOf(DuplicateSubmission);

    // two more scripted annotators complete the pairs
    await runSession("ann2", "SomeMeaningDifference", true);
    await runSession("ann3", "SomeMeaningDifference", false);

    const progress = await client.progress();
    expect(progress.records).toBe(PAIRS.length * ANNOTATORS.length);

    const iaa = await client.iaa();
    expect(iaa.n_pairs).toBe(PAIRS.length);
    expect(iaa.krippendorff_alpha).toBe(1.0);
    for (const [id] of PAIRS) {
      expect(iaa.votes?.[id]).toBe("SomeMeaningDifference");
    }

    const stats = await client.datasetStats();
    expect(stats).toMatchObject({ nd: 0, sd: PAIRS.length, un: 0 });
  }, 30_000);
});
