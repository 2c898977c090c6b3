/**
 * State machine for one rating form.
 *
 * Submission is gated: both sliders touched, an emotion chosen, and the
 * media played through at least once. Sliders start unset so the
 * default thumb position never anchors a score the rater did not give.
 */

import type { Assignment, RatingPayload } from './api.js';

export type EmotionChoice = 'unset' | 'congruent' | 'incongruent';

export const SLIDER_MIN = 1;
export const SLIDER_MAX = 100;

/** Serializable image of a form, used for local persistence. */
export interface FormSnapshot {
  sample_id: string;
  quality: number | null;
  consistency: number | null;
  emotion: EmotionChoice;
  playbackComplete: boolean;
}

export class RatingFormState {
  quality: number | null = null;
  consistency: number | null = null;
  emotion: EmotionChoice = 'unset';
  playbackComplete = false;

  constructor(readonly assignment: Assignment) {}

  touchQuality(value: number): void {
    this.quality = clampSlider(value);
  }

  touchConsistency(value: number): void {
    this.consistency = clampSlider(value);
  }

  chooseEmotion(choice: Exclude<EmotionChoice, 'unset'>): void {
    this.emotion = choice;
  }

  markPlaybackComplete(): void {
    this.playbackComplete = true;
  }

  get canSubmit(): boolean {
    return (
      this.quality !== null &&
      this.consistency !== null &&
      this.emotion !== 'unset' &&
      this.playbackComplete
    );
  }

  /** Which gates are still open, in display order; empty when submittable. */
  missing(): string[] {
    const open: string[] = [];
    if (!this.playbackComplete) open.push('playback');
    if (this.quality === null) open.push('quality');
    if (this.consistency === null) open.push('consistency');
    if (this.emotion === 'unset') open.push('emotion');
    return open;
  }

  toPayload(raterId: string): RatingPayload {
    if (!this.canSubmit) {
      throw new Error(`form incomplete: ${this.missing().join(', ')}`);
    }
    return {
      rater_id: raterId,
      sample_id: this.assignment.sample_id,
      quality_raw: this.quality as number,
      consistency_raw: this.consistency as number,
      emotion_vote: this.emotion === 'congruent',
    };
  }

  snapshot(): FormSnapshot {
    return {
      sample_id: this.assignment.sample_id,
      quality: this.quality,
      consistency: this.consistency,
      emotion: this.emotion,
      playbackComplete: this.playbackComplete,
    };
  }

  /** Rebuild a form from a snapshot; the assignment must be the same sample. */
  static restore(snapshot: FormSnapshot, assignment: Assignment): RatingFormState {
    if (snapshot.sample_id !== assignment.sample_id) {
      throw new Error(
        `snapshot is for ${snapshot.sample_id}, assignment is ${assignment.sample_id}`,
      );
    }
    const form = new RatingFormState(assignment);
    form.quality = snapshot.quality;
    form.consistency = snapshot.consistency;
    form.emotion = snapshot.emotion;
    form.playbackComplete = snapshot.playbackComplete;
    return form;
  }
}

function clampSlider(value: number): number {
  if (!Number.isFinite(value)) {
    throw new Error(`slider value must be finite, got ${value}`);
  }
  return Math.min(SLIDER_MAX, Math.max(SLIDER_MIN, value));
}
