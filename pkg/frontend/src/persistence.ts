/**
 * Local persistence for completed-but-unacknowledged ratings.
 *
 * A payload is written before the POST is dispatched and cleared only
 * on server acknowledgment, so a reload or crash between the two never
 * drops a completed form.
 */

import type { RatingPayload } from './api.js';

const KEY = 'gesturebench.pendingRating';

export interface PendingRating {
  payload: RatingPayload;
  savedAt: number;
}

/** Minimal Storage surface so tests can swap in a memory shim. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export function savePending(store: KeyValueStore, payload: RatingPayload): void {
  const pending: PendingRating = { payload, savedAt: Date.now() };
  store.setItem(KEY, JSON.stringify(pending));
}

export function loadPending(store: KeyValueStore, raterId: string): PendingRating | null {
  const raw = store.getItem(KEY);
  if (raw === null) return null;
  try {
    const pending = JSON.parse(raw) as PendingRating;
    // another rater's leftovers on a shared machine are not ours to send
    if (pending.payload.rater_id !== raterId) return null;
    if (typeof pending.payload.sample_id !== 'string') return null;
    return pending;
  } catch {
    return null; // corrupted entry: ignore rather than crash the session
  }
}

export function clearPending(store: KeyValueStore): void {
  store.removeItem(KEY);
}

/** In-memory stand-in for localStorage. */
export class MemoryStore implements KeyValueStore {
  private map = new Map<string, string>();

  getItem(key: string): string | null {
    return this.map.has(key) ? (this.map.get(key) as string) : null;
  }

  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }

  removeItem(key: string): void {
    this.map.delete(key);
  }
}
