import { beforeEach, describe, expect, it } from 'vitest';

import { RatingApi } from '../src/api.js';
import { MemoryStore, loadPending } from '../src/persistence.js';
import { SessionController } from '../src/session.js';
import { RatingView } from '../src/ui.js';
import { FAST_RETRY, FakeServer } from './fakeServer.js';

function fixture(server: FakeServer) {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById('app') as HTMLElement;
  const api = new RatingApi('http://fake', server.fetch, FAST_RETRY);
  const store = new MemoryStore();
  let view: RatingView;
  const controller = new SessionController(api, 'ann', store, {
    onAssignment: (next, form) => view.showAssignment(next, form),
    onProgress: (progress) => view.showProgress(progress),
    onRejected: (detail, form) => view.showRejected(detail, form),
    onTransportError: (err) => view.showTransportError(err),
  });
  view = new RatingView(root, api, controller);
  const q = <T extends HTMLElement>(name: string): T =>
    root.querySelector(`[data-test="${name}"]`) as T;
  return { root, controller, store, q };
}

function setSlider(el: HTMLInputElement, value: number): void {
  el.value = String(value);
  el.dispatchEvent(new Event('input', { bubbles: true }));
}

function endPlayback(q: <T extends HTMLElement>(name: string) => T): void {
  q<HTMLVideoElement>('video').dispatchEvent(new Event('ended'));
  q<HTMLAudioElement>('audio').dispatchEvent(new Event('ended'));
}

const flush = (ms = 25) => new Promise((resolve) => setTimeout(resolve, ms));

describe('rendering', () => {
  beforeEach(() => {
    document.body.innerHTML = '';
  });

  it('shows the first assignment with everything unset and submit disabled', async () => {
    const server = new FakeServer();
    const { controller, q, root } = fixture(server);
    await controller.start();

    expect(q('progress').textContent).toBe('0 / 3 rated');
    expect(q('form').hidden).toBe(false);
    expect(q('done').hidden).toBe(true);
    expect(q<HTMLButtonElement>('submit').disabled).toBe(true);
    expect(q('quality-value').textContent).toBe('');
    expect(q('consistency-value').textContent).toBe('');
    expect(root.querySelector('.media')?.getAttribute('data-sample')).toBe('s1');
    expect(q<HTMLVideoElement>('video').getAttribute('src')).toBe(
      'http://fake/api/media/s1/video',
    );
    expect(q<HTMLAudioElement>('audio').getAttribute('src')).toBe(
      'http://fake/api/media/s1/audio',
    );
  });

  it('shows a slider value only after the rater touches it', async () => {
    const server = new FakeServer();
    const { controller, q } = fixture(server);
    await controller.start();

    const slider = q<HTMLInputElement>('quality');
    expect(slider.value).toBe('51'); // thumb parked mid-scale
    expect(q('quality-value').textContent).toBe(''); // ...but no number shown
    setSlider(slider, 77);
    expect(q('quality-value').textContent).toBe('77');
  });

  it('shows the done screen once every sample is rated', async () => {
    const server = new FakeServer();
    server.samples = ['s1'];
    const { controller, q } = fixture(server);
    await controller.start();

    setSlider(q<HTMLInputElement>('quality'), 60);
    setSlider(q<HTMLInputElement>('consistency'), 40);
    q<HTMLInputElement>('congruent').click();
    endPlayback(q);
    q<HTMLButtonElement>('submit').click();
    await flush();

    expect(q('form').hidden).toBe(true);
    expect(q('done').hidden).toBe(false);
    expect(q('progress').textContent).toBe('1 / 1 rated');
  });
});

describe('submission gating', () => {
  beforeEach(() => {
    document.body.innerHTML = '';
  });

  it('stays disabled until both sliders, the emotion vote, and playback are in', async () => {
    const server = new FakeServer();
    const { controller, q } = fixture(server);
    await controller.start();
    const submit = q<HTMLButtonElement>('submit');

    setSlider(q<HTMLInputElement>('quality'), 80);
    expect(submit.disabled).toBe(true);
    setSlider(q<HTMLInputElement>('consistency'), 20);
    expect(submit.disabled).toBe(true);
    q<HTMLInputElement>('incongruent').click();
    expect(submit.disabled).toBe(true); // everything filled, media never played

    q<HTMLVideoElement>('video').dispatchEvent(new Event('ended'));
    expect(submit.disabled).toBe(true); // audio track still running
    q<HTMLAudioElement>('audio').dispatchEvent(new Event('ended'));
    expect(submit.disabled).toBe(false);
  });

  it("does not let one sample's playback vouch for the next", async () => {
    const server = new FakeServer();
    const { controller, q, root } = fixture(server);
    await controller.start();

    // rate s1 completely
    setSlider(q<HTMLInputElement>('quality'), 70);
    setSlider(q<HTMLInputElement>('consistency'), 30);
    q<HTMLInputElement>('congruent').click();
    endPlayback(q);
    q<HTMLButtonElement>('submit').click();
    await flush();
    expect(root.querySelector('.media')?.getAttribute('data-sample')).toBe('s2');

    // on s2, fill the form but only end one track: gate must stay shut
    const submit = q<HTMLButtonElement>('submit');
    setSlider(q<HTMLInputElement>('quality'), 55);
    setSlider(q<HTMLInputElement>('consistency'), 45);
    q<HTMLInputElement>('incongruent').click();
    expect(submit.disabled).toBe(true);
    q<HTMLVideoElement>('video').dispatchEvent(new Event('ended'));
    expect(submit.disabled).toBe(true);
    q<HTMLAudioElement>('audio').dispatchEvent(new Event('ended'));
    expect(submit.disabled).toBe(false);
  });

  it('advances to the next sample and resets the controls after submit', async () => {
    const server = new FakeServer();
    const { controller, q, root } = fixture(server);
    await controller.start();

    setSlider(q<HTMLInputElement>('quality'), 88);
    setSlider(q<HTMLInputElement>('consistency'), 12);
    q<HTMLInputElement>('congruent').click();
    endPlayback(q);
    q<HTMLButtonElement>('submit').click();
    await flush();

    expect(server.log).toMatchObject([
      { sample_id: 's1', quality_raw: 88, consistency_raw: 12, emotion_vote: true },
    ]);
    expect(root.querySelector('.media')?.getAttribute('data-sample')).toBe('s2');
    expect(q('quality-value').textContent).toBe('');
    expect(q('consistency-value').textContent).toBe('');
    expect(q<HTMLInputElement>('congruent').checked).toBe(false);
    expect(q<HTMLButtonElement>('submit').disabled).toBe(true);
    expect(q('progress').textContent).toBe('1 / 3 rated');
  });
});

describe('failure handling', () => {
  beforeEach(() => {
    document.body.innerHTML = '';
  });

  it('keeps the form and shows the server detail inline on a 400', async () => {
    const server = new FakeServer();
    const { controller, q, root } = fixture(server);
    await controller.start();
    server.reject400 = true;

    setSlider(q<HTMLInputElement>('quality'), 99);
    setSlider(q<HTMLInputElement>('consistency'), 11);
    q<HTMLInputElement>('congruent').click();
    endPlayback(q);
    q<HTMLButtonElement>('submit').click();
    await flush();

    expect(q('error').textContent).toBe('quality_raw outside slider range');
    expect(root.querySelector('.media')?.getAttribute('data-sample')).toBe('s1');
    expect(q<HTMLInputElement>('quality').value).toBe('99'); // entries preserved
    expect(q('quality-value').textContent).toBe('99');
    expect(q<HTMLInputElement>('congruent').checked).toBe(true);
    expect(q<HTMLButtonElement>('submit').disabled).toBe(false); // editable + resubmittable

    server.reject400 = false;
    q<HTMLButtonElement>('submit').click();
    await flush();
    expect(server.log).toMatchObject([{ sample_id: 's1', quality_raw: 99 }]);
    expect(root.querySelector('.media')?.getAttribute('data-sample')).toBe('s2');
    expect(q('error').textContent).toBe('');
  });

  it('tells the rater the rating is saved locally when the server is unreachable', async () => {
    const server = new FakeServer();
    const { controller, q, store } = fixture(server);
    await controller.start();
    server.networkFailures = 100;

    setSlider(q<HTMLInputElement>('quality'), 42);
    setSlider(q<HTMLInputElement>('consistency'), 58);
    q<HTMLInputElement>('incongruent').click();
    endPlayback(q);
    q<HTMLButtonElement>('submit').click();
    await flush(80);

    expect(q('error').textContent).toContain('saved locally');
    expect(loadPending(store, 'ann')?.payload).toMatchObject({
      sample_id: 's1',
      quality_raw: 42,
      consistency_raw: 58,
      emotion_vote: false,
    });
    expect(server.log).toHaveLength(0);
  });
});
