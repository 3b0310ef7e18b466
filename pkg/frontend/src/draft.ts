import { addWithMerge, spanToTriple, validateSpan } from "./spans.js";
import type {
  AnnotationPayload,
  PairResponse,
  SentenceClass,
  Side,
  Span,
  SpanLabel,
} from "./types.js";

interface DraftState {
  spans: { src: Span[]; tgt: Span[] };
  sentenceClass: SentenceClass | null;
  notes: string;
}

function cloneState(s: DraftState): DraftState {
  return {
    spans: {
      src: s.spans.src.map((x) => ({ ...x })),
      tgt: s.spans.tgt.map((x) => ({ ...x })),
    },
    sentenceClass: s.sentenceClass,
    notes: s.notes,
  };
}

/**
 * Local annotation draft for one pair: span sets per side, sentence class,
 * notes, and an undo stack. The server stays authoritative; the draft is
 * only optimistic browser state.
 */
export class AnnotationDraft {
  private state: DraftState = {
    spans: { src: [], tgt: [] },
    sentenceClass: null,
    notes: "",
  };
  private undoStack: DraftState[] = [];

  constructor(
    readonly annotatorId: string,
    readonly pair: PairResponse,
  ) {}

  get spans(): { src: Span[]; tgt: Span[] } {
    return {
      src: this.state.spans.src.map((x) => ({ ...x })),
      tgt: this.state.spans.tgt.map((x) => ({ ...x })),
    };
  }

  get sentenceClass(): SentenceClass | null {
    return this.state.sentenceClass;
  }

  get notes(): string {
    return this.state.notes;
  }

  private tokenCount(side: Side): number {
    return side === "src"
      ? this.pair.src_tokens.length
      : this.pair.tgt_tokens.length;
  }

  private push(): void {
    this.undoStack.push(cloneState(this.state));
  }

  /**
   * Add a labeled token span; overlapping same-label spans merge into one.
   * Returns the conflicting span when the new one overlaps a span carrying a
   * different label (nothing is changed in that case).
   */
  addSpan(side: Side, span: Span): Span | null {
    validateSpan(span, this.tokenCount(side));
    const { spans, conflict } = addWithMerge(this.state.spans[side], span);
    if (conflict) return conflict;
    this.push();
    this.state.spans[side] = spans;
    return null;
  }

  removeSpan(side: Side, index: number): void {
    if (index < 0 || index >= this.state.spans[side].length) {
      throw new Error(`no span at index ${index}`);
    }
    this.push();
    this.state.spans[side].splice(index, 1);
  }

  setSentenceClass(cls: SentenceClass): void {
    this.push();
    this.state.sentenceClass = cls;
  }

  setNotes(notes: string): void {
    this.push();
    this.state.notes = notes;
  }

  /** Revert the most recent edit; returns false when there is nothing to undo. */
  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.state = prev;
    return true;
  }

  /** Submission requires a sentence class; span sets may be empty. */
  canSubmit(): boolean {
    return this.state.sentenceClass !== null;
  }

  toPayload(): AnnotationPayload {
    if (!this.state.sentenceClass) {
      throw new Error("cannot submit without a sentence class");
    }
    return {
      annotator_id: this.annotatorId,
      pair_id: this.pair.pair_id,
      spans: {
        src: this.state.spans.src.map(spanToTriple),
        tgt: this.state.spans.tgt.map(spanToTriple),
      },
      sentence_class: this.state.sentenceClass,
      notes: this.state.notes === "" ? null : this.state.notes,
    };
  }
}

export type { Span, SpanLabel, Side, SentenceClass };
