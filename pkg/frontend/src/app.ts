import { ApiClient, ApiError, DuplicateSubmission } from "./api.js";
import { AnnotationDraft } from "./draft.js";
import { coverageMask, snapSelectionToTokens } from "./spans.js";
import {
  SENTENCE_CLASSES,
  type PairResponse,
  type SentenceClass,
  type Side,
  type SpanLabel,
} from "./types.js";

const GUIDELINES = `Sentence classes:
  1  No meaning difference - the two sentences convey the same meaning
     (they need not be word-for-word translations).
  2  Some meaning difference - mostly equivalent, but some details differ:
     information is added, dropped, or changed on either side.
  3  Unrelated - the sentences convey largely different meaning.

Span highlighting: when you pick class 2 or 3, highlight the tokens in each
sentence that convey different meaning, then label each span:
  Added   - content present on this side only
  Changed - content whose meaning differs across sides
  Other   - divergent for another reason (explain in the notes)
Highlights snap to whole tokens. Overlapping highlights with the same label
merge; give overlapping tokens a single label.`;

interface AppConfig {
  baseUrl: string;
  sessionId: string;
  annotatorId: string;
  root: HTMLElement;
}

export class AnnotationApp {
  private readonly api: ApiClient;
  private draft: AnnotationDraft | null = null;
  private pendingLabel: SpanLabel = "Changed";

  constructor(private readonly cfg: AppConfig) {
    this.api = new ApiClient(cfg.baseUrl);
  }

  async start(): Promise<void> {
    document.addEventListener("keydown", (e) => this.onKey(e));
    await this.loadNext();
  }

  private async loadNext(): Promise<void> {
    const pair = await this.api.nextPair(this.cfg.sessionId);
    if (pair === null) {
      this.cfg.root.innerHTML = "<p>Session complete. Thank you!</p>";
      this.draft = null;
      return;
    }
    this.draft = new AnnotationDraft(this.cfg.annotatorId, pair);
    this.render(pair);
  }

  private onKey(e: KeyboardEvent): void {
    if (!this.draft) return;
    const byKey: Record<string, SentenceClass> = {
      "1": "NoMeaningDifference",
      "2": "SomeMeaningDifference",
      "3": "Unrelated",
    };
    const cls = byKey[e.key];
    if (cls) {
      this.draft.setSentenceClass(cls);
      this.refreshControls();
    } else if (e.key === "z" && (e.ctrlKey || e.metaKey)) {
      this.draft.undo();
      this.render(this.draft.pair);
      e.preventDefault();
    }
  }

  private render(pair: PairResponse): void {
    const root = this.cfg.root;
    root.innerHTML = "";
    root.appendChild(this.sentenceBlock("src", pair.src_tokens));
    root.appendChild(this.sentenceBlock("tgt", pair.tgt_tokens));
    root.appendChild(this.labelPicker());
    root.appendChild(this.classPicker());
    root.appendChild(this.notesBox());
    root.appendChild(this.submitBar(pair.remaining));
    root.appendChild(this.guidelinesPanel());
    this.refreshControls();
  }

  private sentenceBlock(side: Side, tokens: string[]): HTMLElement {
    const block = document.createElement("p");
    block.className = `sentence sentence-${side}`;
    const mask = this.draft
      ? coverageMask(this.draft.spans[side], tokens.length)
      : [];
    tokens.forEach((tok, i) => {
      const el = document.createElement("span");
      el.className = mask[i] ? "token highlighted" : "token";
      el.dataset.index = String(i);
      el.textContent = i === tokens.length - 1 ? tok : tok + " ";
      block.appendChild(el);
    });
    block.addEventListener("mouseup", () => this.onSelect(side, tokens, block));
    return block;
  }

  private onSelect(side: Side, tokens: string[], block: HTMLElement): void {
    if (!this.draft) return;
    const sel = window.getSelection();
    if (!sel || sel.rangeCount === 0) return;
    const range = sel.getRangeAt(0);
    if (!block.contains(range.commonAncestorContainer)) return;
    const text = block.textContent ?? "";
    const start = offsetInBlock(block, range.startContainer, range.startOffset);
    const end = offsetInBlock(block, range.endContainer, range.endOffset);
    if (start === null || end === null) return;
    const snapped = snapSelectionToTokens(tokens, start, end);
    sel.removeAllRanges();
    if (!snapped || text.trim() === "") return;
    const conflict = this.draft.addSpan(side, {
      ...snapped,
      label: this.pendingLabel,
    });
    if (conflict) {
      window.alert(
        `Tokens ${snapped.start}-${snapped.end} overlap a ${conflict.label} ` +
          "span; remove it first or pick the same label.",
      );
      return;
    }
    this.render(this.draft.pair);
  }

  private labelPicker(): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "label-picker";
    (["Added", "Changed", "Other"] as SpanLabel[]).forEach((label) => {
      const btn = document.createElement("button");
      btn.textContent = label;
      btn.className = label === this.pendingLabel ? "active" : "";
      btn.addEventListener("click", () => {
        this.pendingLabel = label;
        if (this.draft) this.render(this.draft.pair);
      });
      bar.appendChild(btn);
    });
    return bar;
  }

  private classPicker(): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "class-picker";
    SENTENCE_CLASSES.forEach((cls, i) => {
      const btn = document.createElement("button");
      btn.dataset.class = cls;
      btn.textContent = `${i + 1}: ${cls}`;
      btn.addEventListener("click", () => {
        this.draft?.setSentenceClass(cls);
        this.refreshControls();
      });
      bar.appendChild(btn);
    });
    return bar;
  }

  private notesBox(): HTMLElement {
    const notes = document.createElement("textarea");
    notes.className = "notes";
    notes.placeholder = "notes (optional)";
    notes.addEventListener("change", () => this.draft?.setNotes(notes.value));
    return notes;
  }

  private submitBar(remaining: number): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "submit-bar";
    const status = document.createElement("span");
    status.className = "status";
    status.textContent = `${remaining} pairs remaining`;
    const btn = document.createElement("button");
    btn.className = "submit";
    btn.textContent = "Submit";
    btn.title = "pick a sentence class first (keys 1/2/3)";
    btn.addEventListener("click", () => void this.submit(status));
    bar.append(btn, status);
    return bar;
  }

  private async submit(status: HTMLElement): Promise<void> {
    if (!this.draft || !this.draft.canSubmit()) return;
    try {
      await this.api.submitAnnotation(this.cfg.sessionId, this.draft.toPayload());
    } catch (err) {
      if (err instanceof DuplicateSubmission) {
        // already recorded server-side; move on without losing anything
        status.textContent = "already submitted; loading next pair";
      } else if (err instanceof ApiError) {
        status.textContent = err.field
          ? `${err.field}: ${err.message}`
          : err.message;
        return;
      } else {
        // network failure: keep the draft so the annotator can retry
        status.textContent = "network error; draft kept, try again";
        return;
      }
    }
    await this.loadNext();
  }

  private guidelinesPanel(): HTMLElement {
    const details = document.createElement("details");
    details.className = "guidelines";
    const summary = document.createElement("summary");
    summary.textContent = "Annotation guidelines";
    const pre = document.createElement("pre");
    pre.textContent = GUIDELINES;
    details.append(summary, pre);
    return details;
  }

  private refreshControls(): void {
    const root = this.cfg.root;
    const submit = root.querySelector<HTMLButtonElement>("button.submit");
    if (submit) submit.disabled = !this.draft?.canSubmit();
    root.querySelectorAll<HTMLButtonElement>(".class-picker button").forEach(
      (btn) => {
        btn.classList.toggle(
          "active",
          btn.dataset.class === this.draft?.sentenceClass,
        );
      },
    );
  }
}

/** Character offset of (node, offset) within the block's concatenated text. */
function offsetInBlock(
  block: HTMLElement,
  node: Node,
  offset: number,
): number | null {
  let pos = 0;
  const walker = document.createTreeWalker(block, NodeFilter.SHOW_TEXT);
  let current = walker.nextNode();
  while (current) {
    if (current === node) return pos + offset;
    pos += current.textContent?.length ?? 0;
    current = walker.nextNode();
  }
  // selection endpoint on an element boundary rather than a text node
  return node === block ? pos : null;
}

export function mount(): void {
  const params = new URLSearchParams(window.location.search);
  const root = document.getElementById("app");
  const sessionId = params.get("session");
  const annotatorId = params.get("annotator");
  if (!root || !sessionId || !annotatorId) {
    document.body.textContent =
      "missing ?session=<id>&annotator=<id> query parameters";
    return;
  }
  const app = new AnnotationApp({
    baseUrl: params.get("api") ?? "",
    sessionId,
    annotatorId,
    root,
  });
  void app.start();
}
