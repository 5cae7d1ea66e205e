import { AvailabilityClient } from './api.js';
import { App } from './app.js';

const root = document.getElementById('root');
if (root) {
  new App(root, new AvailabilityClient());
}
