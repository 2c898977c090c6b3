/**
 * Typed client for the rating service HTTP API.
 *
 * Field names are the wire schema, verbatim: the server speaks
 * snake_case JSON and this client does not translate.
 */

export interface Assignment {
  done: false;
  rater_id: string;
  sample_id: string;
  media: { video: string; audio: string };
  position: number;
  total: number;
}

export interface SessionDone {
  done: true;
  rater_id: string;
  position: number;
  total: number;
}

export type NextResponse = Assignment | SessionDone;

export interface Progress {
  rater_id: string;
  rated: number;
  total: number;
}

export interface RatingPayload {
  rater_id: string;
  sample_id: string;
  quality_raw: number;
  consistency_raw: number;
  emotion_vote: boolean;
}

export interface SubmitAck {
  ok: boolean;
  timestamp: number;
}

/** Server said no: carries the HTTP status and the JSON `detail` text. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = 'ApiError';
  }

  /** 4xx responses are permanent; retrying cannot help. */
  get permanent(): boolean {
    return this.status >= 400 && this.status < 500;
  }
}

export interface RetryPolicy {
  maxAttempts: number;
  baseDelayMs: number;
  maxDelayMs: number;
}

const DEFAULT_RETRY: RetryPolicy = {
  maxAttempts: 5,
  baseDelayMs: 250,
  maxDelayMs: 4000,
};

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Jittered exponential backoff delay for the given 1-based attempt. */
export function backoffDelayMs(attempt: number, policy: RetryPolicy): number {
  const exp = policy.baseDelayMs * 2 ** (attempt - 1);
  return Math.min(exp, policy.maxDelayMs) * (1 + Math.random() * 0.25);
}

export class RatingApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
    private readonly retry: RetryPolicy = DEFAULT_RETRY,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  /** Absolute URL for an API-relative media path from an Assignment. */
  mediaUrl(apiPath: string): string {
    return this.baseUrl + apiPath;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = `${response.status} ${response.statusText}`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  next(raterId: string): Promise<NextResponse> {
    return this.request<NextResponse>(`/api/session/${encodeURIComponent(raterId)}/next`);
  }

  progress(raterId: string): Promise<Progress> {
    return this.request<Progress>(`/api/progress/${encodeURIComponent(raterId)}`);
  }

  /**
   * Post one rating. Network failures and 5xx responses retry with
   * jittered exponential backoff; 4xx responses are thrown immediately
   * (the payload itself is wrong, a retry would change nothing).
   */
  async submit(payload: RatingPayload): Promise<SubmitAck> {
    let lastError: unknown;
    for (let attempt = 1; attempt <= this.retry.maxAttempts; attempt++) {
      try {
        return await this.request<SubmitAck>('/api/ratings', {
          method: 'POST',
          headers: { 'Content-Type': 'application/json' },
          body: JSON.stringify(payload),
        });
      } catch (err) {
        if (err instanceof ApiError && err.permanent) throw err;
        lastError = err;
        if (attempt < this.retry.maxAttempts) {
          await sleep(backoffDelayMs(attempt, this.retry));
        }
      }
    }
    throw lastError;
  }
}
