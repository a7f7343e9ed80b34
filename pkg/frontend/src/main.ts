import { App } from './app.js';

const params = new URLSearchParams(window.location.search);
const app = new App({
  token: params.get('token'),
  advanced: params.get('advanced') === '1',
});

document.getElementById('app')!.append(app.root);
app.init().catch((error) => app.setStatus(String(error), true));
