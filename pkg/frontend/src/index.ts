export { ApiClient, ApiError, DuplicateSubmission } from "./api.js";
export { AnnotationDraft } from "./draft.js";
export {
  addWithMerge,
  coverageMask,
  snapSelectionToTokens,
  spanToTriple,
  tokenOffsets,
  validateSpan,
} from "./spans.js";
export * from "./types.js";
