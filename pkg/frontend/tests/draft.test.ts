import { beforeEach, describe, expect, it } from "vitest";

import { AnnotationDraft } from "../src/draft.js";
import type { PairResponse } from "../src/types.js";

const PAIR: PairResponse = {
  pair_id: "p1",
  src_tokens: ["a", "b", "c", "d", "e"],
  tgt_tokens: ["u", "v", "w"],
  remaining: 4,
};

describe("AnnotationDraft", () => {
  let draft: AnnotationDraft;

  beforeEach(() => {
    draft = new AnnotationDraft("ann1", PAIR);
  });

  it("cannot submit without a sentence class", () => {
    expect(draft.canSubmit()).toBe(false);
    expect(() => draft.toPayload()).toThrow(/sentence class/);
    draft.setSentenceClass("NoMeaningDifference");
    expect(draft.canSubmit()).toBe(true);
  });

  it("validates spans against the right side's token count", () => {
    expect(() =>
      draft.addSpan("tgt", { start: 0, end: 4, label: "Added" }),
    ).toThrow(/out of bounds/);
    expect(draft.addSpan("src", { start: 0, end: 4, label: "Added" })).toBeNull();
  });

  it("merges overlapping same-label spans and reports label conflicts", () => {
    draft.addSpan("src", { start: 0, end: 2, label: "Changed" });
    draft.addSpan("src", { start: 1, end: 3, label: "Changed" });
    expect(draft.spans.src).toEqual([{ start: 0, end: 3, label: "Changed" }]);
    const conflict = draft.addSpan("src", { start: 2, end: 5, label: "Added" });
    expect(conflict).toEqual({ start: 0, end: 3, label: "Changed" });
    expect(draft.spans.src).toHaveLength(1);
  });

  it("undo reverts edits in order and bottoms out", () => {
    draft.addSpan("src", { start: 0, end: 2, label: "Changed" });
    draft.setSentenceClass("Unrelated");
    draft.setNotes("odd pair");
    expect(draft.undo()).toBe(true);
    expect(draft.notes).toBe("");
    expect(draft.sentenceClass).toBe("Unrelated");
    expect(draft.undo()).toBe(true);
    expect(draft.sentenceClass).toBeNull();
    expect(draft.undo()).toBe(true);
    expect(draft.spans.src).toEqual([]);
    expect(draft.undo()).toBe(false);
  });

  it("removeSpan drops exactly one span and is undoable", () => {
    draft.addSpan("src", { start: 0, end: 1, label: "Added" });
    draft.addSpan("src", { start: 3, end: 5, label: "Changed" });
    draft.removeSpan("src", 0);
    expect(draft.spans.src).toEqual([{ start: 3, end: 5, label: "Changed" }]);
    draft.undo();
    expect(draft.spans.src).toHaveLength(2);
    expect(() => draft.removeSpan("src", 9)).toThrow(/no span/);
  });

  it("produces the wire payload, with empty notes sent as null", () => {
    draft.addSpan("src", { start: 1, end: 3, label: "Changed" });
    draft.addSpan("tgt", { start: 0, end: 2, label: "Added" });
    draft.setSentenceClass("SomeMeaningDifference");
    expect(draft.toPayload()).toEqual({
      annotator_id: "ann1",
      pair_id: "p1",
      spans: { src: [[1, 3, "Changed"]], tgt: [[0, 2, "Added"]] },
      sentence_class: "SomeMeaningDifference",
      notes: null,
    });
    draft.setNotes("tense differs");
    expect(draft.toPayload().notes).toBe("tense differs");
  });

  it("exposes copies, not internal state", () => {
    draft.addSpan("src", { start: 0, end: 2, label: "Changed" });
    const view = draft.spans;
    view.src[0].start = 99;
    expect(draft.spans.src[0].start).toBe(0);
  });
});
