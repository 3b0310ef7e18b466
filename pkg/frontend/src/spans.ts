import type { Span, SpanLabel } from "./types.js";

/**
 * Character offset [start, end) of each token when the sentence is rendered
 * as tokens joined by single spaces.
 */
export function tokenOffsets(tokens: string[]): [number, number][] {
  const out: [number, number][] = [];
  let pos = 0;
  for (const tok of tokens) {
    out.push([pos, pos + tok.length]);
    pos += tok.length + 1;
  }
  return out;
}

/**
 * Snap a character selection to full-token boundaries.
 *
 * Returns the half-open token interval covering every token the selection
 * intersects, or null for a selection touching no token (empty drags and
 * drags across whitespace only create nothing).
 */
export function snapSelectionToTokens(
  tokens: string[],
  selStart: number,
  selEnd: number,
): { start: number; end: number } | null {
  if (selEnd < selStart) [selStart, selEnd] = [selEnd, selStart];
  let first = -1;
  let last = -1;
  tokenOffsets(tokens).forEach(([s, e], i) => {
    const overlaps =
      Math.min(e, selEnd) > Math.max(s, selStart) ||
      (selStart === selEnd && s <= selStart && selStart < e);
    if (overlaps) {
      if (first < 0) first = i;
      last = i;
    }
  });
  if (first < 0) return null;
  return { start: first, end: last + 1 };
}

/**
 * Add a span to a side's span list, merging it with any same-label spans it
 * overlaps or touches into one covering interval. Spans stay sorted by start.
 * Overlapping a differently labeled span is reported instead of silently
 * relabeling tokens; the caller prompts the annotator.
 */
export function addWithMerge(
  spans: Span[],
  span: Span,
): { spans: Span[]; conflict: Span | null } {
  const conflict =
    spans.find(
      (s) =>
        s.label !== span.label && s.start < span.end && span.start < s.end,
    ) ?? null;
  if (conflict) return { spans, conflict };
  let { start, end } = span;
  const keep: Span[] = [];
  for (const s of spans) {
    if (s.label === span.label && s.start <= end && start <= s.end) {
      start = Math.min(start, s.start);
      end = Math.max(end, s.end);
    } else {
      keep.push(s);
    }
  }
  keep.push({ start, end, label: span.label });
  keep.sort((a, b) => a.start - b.start || a.end - b.end);
  return { spans: keep, conflict: null };
}

/** Tokens covered by any span, as a boolean mask (for rendering highlights). */
export function coverageMask(spans: Span[], tokenCount: number): boolean[] {
  const mask = new Array<boolean>(tokenCount).fill(false);
  for (const s of spans) {
    for (let i = s.start; i < s.end; i++) mask[i] = true;
  }
  return mask;
}

export function validateSpan(
  span: { start: number; end: number },
  tokenCount: number,
): void {
  if (
    !Number.isInteger(span.start) ||
    !Number.isInteger(span.end) ||
    span.start < 0 ||
    span.end <= span.start ||
    span.end > tokenCount
  ) {
    throw new Error(
      `span (${span.start},${span.end}) out of bounds for ${tokenCount} tokens`,
    );
  }
}

export function spanToTriple(span: Span): [number, number, SpanLabel] {
  return [span.start, span.end, span.label];
}
