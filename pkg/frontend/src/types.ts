export type SpanLabel = "Added" | "Changed" | "Other";

export type SentenceClass =
  | "NoMeaningDifference"
  | "SomeMeaningDifference"
  | "Unrelated";

export const SENTENCE_CLASSES: SentenceClass[] = [
  "NoMeaningDifference",
  "SomeMeaningDifference",
  "Unrelated",
];

export type Side = "src" | "tgt";

/** Half-open token interval with a span label. */
export interface Span {
  start: number;
  end: number;
  label: SpanLabel;
}

export interface PairResponse {
  pair_id: string;
  src_tokens: string[];
  tgt_tokens: string[];
  remaining: number;
}

export interface AnnotationPayload {
  annotator_id: string;
  pair_id: string;
  spans: { src: [number, number, SpanLabel][]; tgt: [number, number, SpanLabel][] };
  sentence_class: SentenceClass;
  notes: string | null;
}

export interface IaaResponse {
  n_pairs: number;
  krippendorff_alpha?: number;
  span_macro_f1?: { mean: number; stdev: number };
  token_macro_f1?: { mean: number; stdev: number };
  votes?: Record<string, string>;
  detail?: string;
}

export interface ProgressResponse {
  sessions: Record<
    string,
    { annotator_id: string; queue: number; completed: number }
  >;
  records: number;
}

export interface StatsResponse {
  nd: number;
  sd: number;
  un: number;
  detail: Record<string, unknown>;
}
