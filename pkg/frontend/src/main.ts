/**
 * Entry point: ?rater=<id> picks the session, ?server=<origin> points
 * at the rating service (defaults to the page's own origin).
 */

import { RatingApi } from './api.js';
import { SessionController } from './session.js';
import { RatingView } from './ui.js';

export function boot(root: HTMLElement, win: Window = window): SessionController {
  const params = new URLSearchParams(win.location.search);
  const raterId = params.get('rater');
  if (raterId === null || raterId === '') {
    root.textContent = 'Missing ?rater=<id> in the URL.';
    throw new Error('missing rater id');
  }
  const server = params.get('server') ?? win.location.origin;

  const api = new RatingApi(server, win.fetch.bind(win));
  let view: RatingView;
  const controller = new SessionController(api, raterId, win.localStorage, {
    onAssignment: (next, form) => view.showAssignment(next, form),
    onProgress: (progress) => view.showProgress(progress),
    onRejected: (detail, form) => view.showRejected(detail, form),
    onTransportError: (err) => view.showTransportError(err),
  });
  view = new RatingView(root, api, controller);
  void controller.start().catch((err) => view.showTransportError(err));
  return controller;
}

if (typeof document !== 'undefined' && document.getElementById('app') !== null) {
  boot(document.getElementById('app') as HTMLElement);
}
