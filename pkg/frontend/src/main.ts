/** Page bootstrap: one client, one render target, delegated clicks. */

import { ConsoleClient } from "./client.js";
import { render } from "./render.js";

const app = document.getElementById("app");
const form = document.getElementById("connect-form");
const endpointInput = document.getElementById("endpoint");
const seedInput = document.getElementById("seed");

if (
  !(app instanceof HTMLElement) ||
  !(form instanceof HTMLFormElement) ||
  !(endpointInput instanceof HTMLInputElement) ||
  !(seedInput instanceof HTMLInputElement)
) {
  throw new Error("page skeleton is missing expected elements");
}

const client = new ConsoleClient((vm) => {
  app.innerHTML = render(vm);
});

form.addEventListener("submit", (ev) => {
  ev.preventDefault();
  const seed = Number.parseInt(seedInput.value, 10);
  client.connect(endpointInput.value, Number.isNaN(seed) ? 0 : seed);
});

app.addEventListener("click", (ev) => {
  const target = ev.target;
  if (!(target instanceof Element)) return;
  const button = target.closest("button[data-action]");
  if (!(button instanceof HTMLButtonElement) || button.disabled) return;
  const action = button.dataset.action;
  if (action === "trust" || action === "oversee") client.submitDecision(action);
  else if (action === "retry") client.retry();
});

app.innerHTML = render(client.viewModel);
