/**
 * DOM rendering for a rating session: synchronized media playback, two
 * Likert sliders, the emotion-congruence radio pair, progress, and a
 * submit button that stays disabled until every gate is closed.
 *
 * No framework: the page is small enough that direct DOM wiring is
 * clearer than a dependency.
 */

import type { Assignment, NextResponse, Progress, RatingApi } from './api.js';
import { RatingFormState, SLIDER_MAX, SLIDER_MIN } from './formState.js';
import type { SessionController } from './session.js';

export interface UiLabels {
  qualityLabel: string;
  consistencyLabel: string;
  emotionPrompt: string;
  congruentLabel: string;
  incongruentLabel: string;
}

/** Wording shown to raters is configurable; these are plain defaults. */
export const DEFAULT_LABELS: UiLabels = {
  qualityLabel: 'Gesture quality',
  consistencyLabel: 'Audio-gesture consistency',
  emotionPrompt: 'Does the gesture emotion match the speech?',
  congruentLabel: 'Matches',
  incongruentLabel: 'Does not match',
};

export class RatingView {
  private form: RatingFormState | null = null;
  // both tracks must finish at least once to count as a complete playback;
  // reset for every new assignment so one sample's playback cannot vouch
  // for the next
  private endedFlags = { video: false, audio: false };

  private readonly progressEl: HTMLElement;
  private readonly mediaEl: HTMLElement;
  private readonly video: HTMLVideoElement;
  private readonly audio: HTMLAudioElement;
  private readonly playButton: HTMLButtonElement;
  private readonly qualitySlider: HTMLInputElement;
  private readonly qualityValue: HTMLElement;
  private readonly consistencySlider: HTMLInputElement;
  private readonly consistencyValue: HTMLElement;
  private readonly congruentRadio: HTMLInputElement;
  private readonly incongruentRadio: HTMLInputElement;
  private readonly submitButton: HTMLButtonElement;
  private readonly errorEl: HTMLElement;
  private readonly doneEl: HTMLElement;
  private readonly formEl: HTMLElement;

  constructor(
    root: HTMLElement,
    private readonly api: RatingApi,
    private readonly controller: SessionController,
    private readonly labels: UiLabels = DEFAULT_LABELS,
  ) {
    root.innerHTML = `
      <div class="progress" data-test="progress"></div>
      <div class="done" data-test="done" hidden>Session complete. Thank you.</div>
      <div class="form" data-test="form" hidden>
        <div class="media">
          <video data-test="video" width="320"></video>
          <audio data-test="audio"></audio>
          <button type="button" data-test="play">Play</button>
        </div>
        <label>${labels.qualityLabel}
          <input type="range" data-test="quality" min="${SLIDER_MIN}" max="${SLIDER_MAX}" step="1">
          <output data-test="quality-value"></output>
        </label>
        <label>${labels.consistencyLabel}
          <input type="range" data-test="consistency" min="${SLIDER_MIN}" max="${SLIDER_MAX}" step="1">
          <output data-test="consistency-value"></output>
        </label>
        <fieldset>
          <legend>${labels.emotionPrompt}</legend>
          <label><input type="radio" name="emotion" data-test="congruent" value="congruent">
            ${labels.congruentLabel}</label>
          <label><input type="radio" name="emotion" data-test="incongruent" value="incongruent">
            ${labels.incongruentLabel}</label>
        </fieldset>
        <div class="error" data-test="error" role="alert"></div>
        <button type="button" data-test="submit" disabled>Submit rating</button>
      </div>
    `;
    const get = <T extends HTMLElement>(name: string): T => {
      const el = root.querySelector(`[data-test="${name}"]`);
      if (el === null) throw new Error(`missing element ${name}`);
      return el as T;
    };
    this.progressEl = get('progress');
    this.doneEl = get('done');
    this.formEl = get('form');
    this.mediaEl = this.formEl.querySelector('.media') as HTMLElement;
    this.video = get('video');
    this.audio = get('audio');
    this.playButton = get('play');
    this.qualitySlider = get('quality');
    this.qualityValue = get('quality-value');
    this.consistencySlider = get('consistency');
    this.consistencyValue = get('consistency-value');
    this.congruentRadio = get('congruent');
    this.incongruentRadio = get('incongruent');
    this.submitButton = get('submit');
    this.errorEl = get('error');
    this.wire();
  }

  private wire(): void {
    const onEnded = (which: 'video' | 'audio') => {
      this.endedFlags[which] = true;
      if (this.endedFlags.video && this.endedFlags.audio && this.form !== null) {
        this.form.markPlaybackComplete();
        this.refreshGate();
      }
    };
    this.video.addEventListener('ended', () => onEnded('video'));
    this.audio.addEventListener('ended', () => onEnded('audio'));
    this.playButton.addEventListener('click', () => {
      // synchronized dual playback: restart both tracks together
      this.video.currentTime = 0;
      this.audio.currentTime = 0;
      void this.video.play?.()?.catch(() => {});
      void this.audio.play?.()?.catch(() => {});
    });

    this.qualitySlider.addEventListener('input', () => {
      this.form?.touchQuality(Number(this.qualitySlider.value));
      this.qualityValue.textContent = this.qualitySlider.value;
      this.refreshGate();
    });
    this.consistencySlider.addEventListener('input', () => {
      this.form?.touchConsistency(Number(this.consistencySlider.value));
      this.consistencyValue.textContent = this.consistencySlider.value;
      this.refreshGate();
    });
    this.congruentRadio.addEventListener('change', () => {
      this.form?.chooseEmotion('congruent');
      this.refreshGate();
    });
    this.incongruentRadio.addEventListener('change', () => {
      this.form?.chooseEmotion('incongruent');
      this.refreshGate();
    });
    this.submitButton.addEventListener('click', () => {
      this.submitButton.disabled = true;
      void this.controller.submit().catch(() => {
        this.refreshGate();
      });
    });
  }

  /** Render an assignment (or the done screen) and reset the controls. */
  showAssignment(next: NextResponse, form: RatingFormState | null): void {
    this.form = form;
    if (next.done || form === null) {
      this.formEl.hidden = true;
      this.doneEl.hidden = false;
      return;
    }
    this.doneEl.hidden = true;
    this.formEl.hidden = false;
    this.errorEl.textContent = '';
    this.endedFlags = { video: false, audio: false };
    this.video.setAttribute('src', this.api.mediaUrl(next.media.video));
    this.audio.setAttribute('src', this.api.mediaUrl(next.media.audio));
    this.renderFormValues(form, next);
    this.refreshGate();
  }

  private renderFormValues(form: RatingFormState, assignment: Assignment): void {
    // unset sliders park the thumb mid-scale but show no number: the
    // value only appears once the rater has actually chosen one
    const mid = String(Math.round((SLIDER_MIN + SLIDER_MAX) / 2));
    this.qualitySlider.value = form.quality === null ? mid : String(form.quality);
    this.qualityValue.textContent = form.quality === null ? '' : String(form.quality);
    this.consistencySlider.value = form.consistency === null ? mid : String(form.consistency);
    this.consistencyValue.textContent =
      form.consistency === null ? '' : String(form.consistency);
    this.congruentRadio.checked = form.emotion === 'congruent';
    this.incongruentRadio.checked = form.emotion === 'incongruent';
    this.mediaEl.setAttribute('data-sample', assignment.sample_id);
  }

  /** Restore a rejected form with the server's complaint inline. */
  showRejected(detail: string, form: RatingFormState): void {
    this.showAssignment(form.assignment, form);
    this.errorEl.textContent = detail;
  }

  showProgress(progress: Progress): void {
    this.progressEl.textContent = `${progress.rated} / ${progress.total} rated`;
  }

  showTransportError(err: unknown): void {
    this.errorEl.textContent =
      'Could not reach the server; your rating is saved locally and will be retried.';
    void err;
  }

  private refreshGate(): void {
    this.submitButton.disabled = this.form === null || !this.form.canSubmit;
  }
}
