import type {
  AnnotationPayload,
  IaaResponse,
  PairResponse,
  ProgressResponse,
  StatsResponse,
} from "./types.js";

/** Non-2xx response from the service; `field` names the offending input on 400s. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly field?: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** 409: this annotator already submitted this pair. */
export class DuplicateSubmission extends ApiError {
  constructor(message: string) {
    super(409, message);
    this.name = "DuplicateSubmission";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let message = `HTTP ${res.status}`;
  let field: string | undefined;
  try {
    const body = await res.json();
    const detail = body?.detail;
    if (typeof detail === "string") {
      message = detail;
    } else if (detail && typeof detail === "object") {
      message = detail.message ?? message;
      field = detail.field;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  if (res.status === 409) throw new DuplicateSubmission(message);
  throw new ApiError(res.status, message, field);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  /** Next pair for the session, or null when the queue is exhausted (204). */
  async nextPair(sessionId: string): Promise<PairResponse | null> {
    const res = await this.fetchImpl(
      `${this.baseUrl}/api/session/${encodeURIComponent(sessionId)}/next`,
    );
    if (res.status === 204) return null;
    await raiseForStatus(res);
    return (await res.json()) as PairResponse;
  }

  /** Submit an annotation; resolves to the server-side echo of the record. */
  async submitAnnotation(
    sessionId: string,
    payload: AnnotationPayload,
  ): Promise<Record<string, unknown>> {
    const res = await this.fetchImpl(
      `${this.baseUrl}/api/session/${encodeURIComponent(sessionId)}/annotation`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      },
    );
    await raiseForStatus(res);
    return (await res.json()) as Record<string, unknown>;
  }

  async iaa(): Promise<IaaResponse> {
    const res = await this.fetchImpl(`${this.baseUrl}/api/iaa`);
    await raiseForStatus(res);
    return (await res.json()) as IaaResponse;
  }

  async progress(): Promise<ProgressResponse> {
    const res = await this.fetchImpl(`${this.baseUrl}/api/progress`);
    await raiseForStatus(res);
    return (await res.json()) as ProgressResponse;
  }

  async datasetStats(): Promise<StatsResponse> {
    const res = await this.fetchImpl(`${this.baseUrl}/api/dataset/stats`);
    await raiseForStatus(res);
    return (await res.json()) as StatsResponse;
  }
}
