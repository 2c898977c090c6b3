import { describe, expect, it } from 'vitest';

import { ApiError, RatingApi, backoffDelayMs } from '../src/api.js';
import type { RatingPayload } from '../src/api.js';

const PAYLOAD: RatingPayload = {
  rater_id: 'ann',
  sample_id: 'a0001__emage',
  quality_raw: 70,
  consistency_raw: 40,
  emotion_vote: true,
};

const FAST_RETRY = { maxAttempts: 4, baseDelayMs: 1, maxDelayMs: 4 };

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

describe('request plumbing', () => {
  it('resolves media paths against the server origin', () => {
    const api = new RatingApi('http://localhost:8000/');
    expect(api.mediaUrl('/api/media/a0001__emage/audio')).toBe(
      'http://localhost:8000/api/media/a0001__emage/audio',
    );
  });

  it('parses the assignment from the session endpoint', async () => {
    const calls: string[] = [];
    const api = new RatingApi('http://x', async (url) => {
      calls.push(String(url));
      return jsonResponse(200, { done: false, sample_id: 's1', position: 1, total: 3 });
    });
    const next = await api.next('ann');
    expect(calls).toEqual(['http://x/api/session/ann/next']);
    expect(next.done).toBe(false);
  });

  it('surfaces the server detail text on errors', async () => {
    const api = new RatingApi('http://x', async () =>
      jsonResponse(404, { detail: "unknown rater 'zed'" }),
    );
    await expect(api.progress('zed')).rejects.toThrow("unknown rater 'zed'");
  });
});

describe('submit retry policy', () => {
  it('does not retry a 400: the payload itself is wrong', async () => {
    let attempts = 0;
    const api = new RatingApi(
      'http://x',
      async () => {
        attempts += 1;
        return jsonResponse(400, { detail: 'quality_raw = 140.0 outside slider range' });
      },
      FAST_RETRY,
    );
    const err = await api.submit(PAYLOAD).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).permanent).toBe(true);
    expect(attempts).toBe(1);
  });

  it('retries network failures until the server answers', async () => {
    let attempts = 0;
    const api = new RatingApi(
      'http://x',
      async () => {
        attempts += 1;
        if (attempts < 3) throw new TypeError('fetch failed');
        return jsonResponse(200, { ok: true, timestamp: 1.5 });
      },
      FAST_RETRY,
    );
    const ack = await api.submit(PAYLOAD);
    expect(ack.timestamp).toBe(1.5);
    expect(attempts).toBe(3);
  });

  it('retries 5xx and gives up after maxAttempts', async () => {
    let attempts = 0;
    const api = new RatingApi(
      'http://x',
      async () => {
        attempts += 1;
        return jsonResponse(503, { detail: 'busy' });
      },
      FAST_RETRY,
    );
    const err = await api.submit(PAYLOAD).catch((e: unknown) => e);
    expect((err as ApiError).status).toBe(503);
    expect(attempts).toBe(FAST_RETRY.maxAttempts);
  });

  it('backs off exponentially with bounded jitter', () => {
    const policy = { maxAttempts: 5, baseDelayMs: 100, maxDelayMs: 1000 };
    for (let trial = 0; trial < 50; trial++) {
      const d1 = backoffDelayMs(1, policy);
      const d3 = backoffDelayMs(3, policy);
      const d9 = backoffDelayMs(9, policy);
      expect(d1).toBeGreaterThanOrEqual(100);
      expect(d1).toBeLessThanOrEqual(125);
      expect(d3).toBeGreaterThanOrEqual(400);
      expect(d3).toBeLessThanOrEqual(500);
      expect(d9).toBeLessThanOrEqual(1250); // capped at maxDelayMs plus jitter
    }
  });
});
