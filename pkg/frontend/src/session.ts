/**
 * One rater's session: pulls assignments, gates and submits ratings,
 * and survives crashes.
 *
 * submit() is optimistic: the payload is persisted locally, the POST is
 * dispatched in the background, and the session advances immediately.
 * Because the server only marks a sample rated once the POST lands,
 * loadNext() treats "server handed back a sample we already submitted"
 * as the signal to wait for the in-flight acknowledgment. A rejected
 * payload (4xx) restores the form with an inline error instead of
 * advancing past it.
 */

import { ApiError, RatingApi } from './api.js';
import type { Assignment, NextResponse, Progress, RatingPayload } from './api.js';
import { RatingFormState } from './formState.js';
import { clearPending, loadPending, savePending } from './persistence.js';
import type { KeyValueStore } from './persistence.js';

export interface SessionEvents {
  /** A new assignment (or the done marker) is ready to render. */
  onAssignment?(next: NextResponse, form: RatingFormState | null): void;
  /** Progress counter changed. */
  onProgress?(progress: Progress): void;
  /** The server rejected the payload; the form has been restored. */
  onRejected?(detail: string, form: RatingFormState): void;
  /** Transport trouble the rater should know about (retries exhausted). */
  onTransportError?(err: unknown): void;
}

export class SessionController {
  assignment: NextResponse | null = null;
  form: RatingFormState | null = null;

  private submitted = new Set<string>();
  private inflight: Promise<void> | null = null;
  private submitting = false;

  constructor(
    private readonly api: RatingApi,
    readonly raterId: string,
    private readonly store: KeyValueStore,
    private readonly events: SessionEvents = {},
  ) {}

  /**
   * Begin (or resume) the session. A pending rating persisted by an
   * earlier page load is re-submitted before anything else; only its
   * acknowledgment may clear it.
   */
  async start(): Promise<void> {
    const pending = loadPending(this.store, this.raterId);
    if (pending !== null) {
      try {
        await this.api.submit(pending.payload);
        clearPending(this.store);
      } catch (err) {
        if (err instanceof ApiError && err.permanent) {
          // the stored payload itself is bad; drop it rather than wedge
          // the session behind an unsendable record
          clearPending(this.store);
        } else {
          this.events.onTransportError?.(err);
        }
      }
    }
    await this.loadNext();
    await this.refreshProgress();
  }

  async loadNext(): Promise<void> {
    let next = await this.api.next(this.raterId);
    if (!next.done && this.submitted.has(next.sample_id) && this.inflight !== null) {
      await this.inflight; // ack not indexed server-side yet
      next = await this.api.next(this.raterId);
    }
    this.assignment = next;
    this.form = next.done ? null : new RatingFormState(next);
    this.events.onAssignment?.(next, this.form);
  }

  async refreshProgress(): Promise<void> {
    this.events.onProgress?.(await this.api.progress(this.raterId));
  }

  /**
   * Submit the current form and advance. Throws synchronously if the
   * gating invariant does not hold; the submit control should already
   * be disabled in that state.
   */
  async submit(): Promise<void> {
    if (this.form === null || !this.form.canSubmit) {
      throw new Error('submission blocked: form incomplete');
    }
    if (this.submitting) return; // at most one visible submission per sample
    this.submitting = true;
    const form = this.form;
    const payload = form.toPayload(this.raterId);
    savePending(this.store, payload);
    this.submitted.add(payload.sample_id);

    this.inflight = this.api.submit(payload).then(
      () => {
        clearPending(this.store);
        this.refreshProgress().catch(() => {});
      },
      (err) => {
        throw err; // surfaced wherever the in-flight promise is awaited
      },
    );
    // advance optimistically; swallow the duplicate rejection here so it
    // only surfaces once, through loadNext's in-flight wait below
    this.inflight.catch(() => {});

    try {
      await this.loadNext();
    } catch (err) {
      if (err instanceof ApiError && err.permanent) {
        // rejected payload: put the rater back on the form they filled
        this.submitted.delete(payload.sample_id);
        this.assignment = form.assignment;
        this.form = form;
        this.events.onAssignment?.(form.assignment, form);
        this.events.onRejected?.(err.message, form);
      } else {
        this.events.onTransportError?.(err);
      }
    } finally {
      this.inflight = null;
      this.submitting = false;
    }
  }
}
