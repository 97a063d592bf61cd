import { ApiClient } from './api';
import { App } from './app';

const params = new URLSearchParams(window.location.search);
const server = params.get('server') ?? window.location.origin;
const resume = params.get('session');

const root = document.getElementById('app');
if (root === null) {
  throw new Error('missing #app root element');
}

const app = new App(root, new ApiClient(server));
void app.start(resume ?? undefined).catch((error) => {
  root.innerHTML = `<div class="banner error">Cannot reach the session service at
    ${server}: ${String(error)}</div>`;
});

// handy for poking around from the devtools console
(window as any).storytriad = app;
