/** Browser bootstrap: wires the ViewModel to the page and polls. */

import { Api } from "./api.js";
import { render } from "./render.js";
import { ViewModel } from "./state.js";

const POLL_INTERVAL_MS = 2000;

function start(): void {
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app element");

  const vm = new ViewModel(new Api(), (state) => {
    root.innerHTML = render(state);
  });

  root.addEventListener("click", (event) => {
    const target = event.target;
    if (!(target instanceof HTMLButtonElement)) return;
    if (target.classList.contains("submit")) {
      void vm.submit(Number(target.dataset.sid));
    } else if (target.classList.contains("stop")) {
      void vm.stop(Number(target.dataset.vmid));
    }
  });

  void vm.refresh();
  setInterval(() => void vm.refresh(), POLL_INTERVAL_MS);
}

start();
