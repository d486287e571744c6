// Entry point: wires the query string to a session and renders it.
//
//   index.html?study=<study-id>&taker=<taker-id>[&base=<service-url>]

import { ApiClient } from "./api.js";
import { SessionFlow } from "./flow.js";
import { renderApp } from "./dom.js";

export function boot(root: HTMLElement, search: string): SessionFlow {
  const params = new URLSearchParams(search);
  const study = params.get("study") ?? "";
  const taker = params.get("taker") ?? "";
  const base = params.get("base") ?? "";

  const flow = new SessionFlow(new ApiClient(base));
  renderApp(root, flow);
  if (study && taker) {
    void flow.start(study, taker);
  } else {
    root.replaceChildren(
      missingParamsNotice("Missing ?study= and ?taker= query parameters."),
    );
  }
  return flow;
}

function missingParamsNotice(text: string): HTMLElement {
  const div = document.createElement("div");
  div.setAttribute("data-screen", "error");
  const p = document.createElement("p");
  p.textContent = text;
  div.append(p);
  return div;
}

const appRoot = typeof document !== "undefined"
  ? document.getElementById("app")
  : null;
if (appRoot) {
  boot(appRoot, window.location.search);
}
