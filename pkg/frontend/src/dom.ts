// Thin DOM layer over the session view-model.
//
// A screen change rebuilds the subtree; anything else (selection, ticks,
// in-flight submission) is synced in place so the video players are not
// torn down mid-page. Everything shown on screen comes from the blinded
// payload fields plus fixed instruction strings.

import type { SessionFlow } from "./flow.js";
import type { AttentionOverlay, PagePayload } from "./types.js";

export function renderApp(root: HTMLElement, flow: SessionFlow): void {
  let lastKey = "";
  const update = () => {
    const key = screenKey(flow);
    if (key !== lastKey) {
      lastKey = key;
      root.replaceChildren(buildScreen(flow));
    }
    syncScreen(root, flow);
  };
  flow.subscribe(update);
  update();
}

function screenKey(flow: SessionFlow): string {
  const screen = flow.screen;
  switch (screen.kind) {
    case "page":
      return `page:${screen.page.page_index}`;
    case "error":
      return `error:${screen.message}`;
    default:
      return screen.kind;
  }
}

function buildScreen(flow: SessionFlow): HTMLElement {
  const screen = flow.screen;
  switch (screen.kind) {
    case "loading":
      return el("div", { "data-screen": "loading", class: "screen" }, [
        el("p", {}, ["Loading…"]),
      ]);
    case "intro":
      return buildIntro(flow);
    case "page":
      return buildPage(flow, screen.page);
    case "done":
      return el("div", { "data-screen": "done", class: "screen" }, [
        el("h1", {}, ["All pages answered"]),
        el("p", {}, ["Thank you for taking part. You can close this window."]),
      ]);
    case "terminated":
      return buildTerminated(flow);
    case "error":
      return el("div", { "data-screen": "error", class: "screen" }, [
        el("h1", {}, ["Something went wrong"]),
        el("p", { "data-role": "error-message" }, [screen.message]),
        el(
          "button",
          { "data-action": "retry", type: "button" },
          ["Try again"],
          () => void flow.retry(),
        ),
      ]);
  }
}

function buildIntro(flow: SessionFlow): HTMLElement {
  const session = flow.session;
  return el("div", { "data-screen": "intro", class: "screen" }, [
    el("h1", {}, ["Video comparison study"]),
    el("p", {}, [session ? session.intro_text : ""]),
    el("ul", {}, [
      el("li", {}, [
        `The study has ${session ? session.n_pages : 0} pages. On each page, ` +
          "watch both videos, then answer the question below them.",
      ]),
      el("li", {}, [
        "After a non-tie answer, tick the factors that contributed most " +
          "to your choice.",
      ]),
      el("li", {}, [
        "If a page does not work, you can skip it. Skipping more than " +
          "three pages ends the study.",
      ]),
    ]),
    el(
      "button",
      { "data-action": "begin", type: "button" },
      ["Begin"],
      () => void flow.beginPages(),
    ),
  ]);
}

function buildTerminated(flow: SessionFlow): HTMLElement {
  const children: HTMLElement[] = [
    el("h1", {}, ["Session ended"]),
    el("p", {}, [
      `This session was terminated after ${flow.skipsUsed} skipped pages.`,
    ]),
  ];
  if (flow.needsReview) {
    children.push(
      el("p", { "data-role": "needs-review" }, [
        "It has been flagged for manual review.",
      ]),
    );
  }
  return el("div", { "data-screen": "terminated", class: "screen" }, children);
}

function buildPage(flow: SessionFlow, page: PagePayload): HTMLElement {
  const percent = Math.round(page.progress * 100);
  const header = el("header", {}, [
    el("span", { "data-role": "progress" }, [
      `Page ${page.page_index} of ${page.total_pages}`,
    ]),
    el("div", { class: "progress-track" }, [
      el("div", {
        "data-role": "progress-bar",
        class: "progress-fill",
        style: `width: ${percent}%`,
      }),
    ]),
  ]);

  const videos = el("div", { class: "video-row" }, [
    buildPane("left", page),
    buildPane("right", page),
  ]);

  const options = el(
    "div",
    { class: "option-bar", role: "radiogroup" },
    page.response_values.map((value, i) =>
      el(
        "button",
        { "data-value": value, class: "option", type: "button" },
        [page.response_options[i] ?? value],
        () => flow.selectResponse(value),
      ),
    ),
  );

  const juiceRows = page.juice_options.map((option) => {
    const box = el(
      "input",
      { type: "checkbox", "data-key": option.key },
      [],
      () => flow.toggleJuice(option.key),
      "change",
    );
    return el("label", { class: "juice-row" }, [box, option.label]);
  });
  const otherInput = el("input", {
    type: "text",
    "data-role": "other-text",
    placeholder: "Please specify",
  });
  otherInput.addEventListener("input", () =>
    flow.setOtherText(otherInput.value),
  );
  const juice = el(
    "fieldset",
    { "data-role": "juice", class: "juice-box" },
    [
      el("legend", {}, [page.juice_prompt]),
      ...juiceRows,
      el("div", { "data-role": "other-row", class: "juice-row", hidden: "" }, [
        otherInput,
      ]),
    ],
  );

  const footer = el("div", { class: "page-footer" }, [
    el("p", { "data-role": "error-banner", class: "error-banner", hidden: "" }),
    el(
      "p",
      { "data-role": "video-failed", class: "hint", hidden: "" },
      ["A video failed to load. You can skip this page."],
    ),
    el(
      "button",
      { "data-action": "skip", type: "button", class: "secondary" },
      ["Skip this page"],
      () => void flow.skip(),
    ),
    el(
      "button",
      { "data-action": "submit", type: "button" },
      ["Submit answer"],
      () => void flow.submit(),
    ),
  ]);

  return el("div", { "data-screen": "page", class: "screen" }, [
    header,
    el("p", { class: "intro" }, [page.intro_text]),
    videos,
    el("h2", { class: "question" }, [page.question]),
    options,
    juice,
    footer,
  ]);
}

function buildPane(side: "left" | "right", page: PagePayload): HTMLElement {
  const uri = side === "left" ? page.left_video_uri : page.right_video_uri;
  const attention = overlayFor(page.attention, side);
  const muteVideo = page.muted || attention?.modality === "audio_voice";

  const video = el("video", {
    "data-side": side,
    src: uri,
    preload: "auto",
    ...(muteVideo ? { muted: "" } : {}),
    ...(page.muted ? { autoplay: "" } : {}),
  });
  video.muted = muteVideo;

  const children: HTMLElement[] = [video];

  if (attention?.modality === "visual_text") {
    children.push(
      el("div", { "data-role": "overlay", class: "overlay" }, [
        attention.overlay_text ?? "",
      ]),
    );
  }
  let overlayAudio: HTMLAudioElement | null = null;
  if (attention?.modality === "audio_voice" && attention.audio_overlay_uri) {
    overlayAudio = el("audio", {
      "data-side": side,
      src: attention.audio_overlay_uri,
      preload: "auto",
    });
    children.push(overlayAudio);
  }

  children.push(
    el(
      "button",
      { "data-action": "replay", "data-side": side, type: "button" },
      ["Play / replay"],
      () => {
        restart(video);
        if (overlayAudio) restart(overlayAudio);
      },
    ),
  );

  const pane = el("div", { class: "pane", "data-side": side }, children);
  return pane;
}

function overlayFor(
  attention: AttentionOverlay | null,
  side: "left" | "right",
): AttentionOverlay | null {
  return attention && attention.side === side ? attention : null;
}

/** Wire the video-error fallback; split out so tests can dispatch it. */
export function watchVideoErrors(root: HTMLElement, flow: SessionFlow): void {
  for (const video of root.querySelectorAll("video")) {
    video.addEventListener("error", () => flow.markVideoFailed());
  }
}

function syncScreen(root: HTMLElement, flow: SessionFlow): void {
  if (flow.screen.kind !== "page") return;
  const page = flow.screen.page;

  for (const button of root.querySelectorAll<HTMLButtonElement>(
    "button[data-value]",
  )) {
    const value = button.dataset.value ?? "";
    button.classList.toggle("selected", flow.selected === value);
    button.disabled = flow.submitting;
  }

  const locked = !flow.juiceEnabled();
  const juice = root.querySelector<HTMLFieldSetElement>("[data-role='juice']");
  if (juice) {
    juice.disabled = locked || flow.submitting;
    juice.classList.toggle("locked", locked);
    for (const box of juice.querySelectorAll<HTMLInputElement>(
      "input[type='checkbox']",
    )) {
      box.disabled = locked || flow.submitting;
      box.checked = flow.hasTicked(box.dataset.key ?? "");
    }
  }

  const otherRow = root.querySelector<HTMLElement>("[data-role='other-row']");
  if (otherRow) otherRow.hidden = !flow.hasTicked("other");
  const otherInput = root.querySelector<HTMLInputElement>(
    "[data-role='other-text']",
  );
  if (otherInput) {
    otherInput.disabled = locked || flow.submitting;
    if (otherInput.value !== flow.otherText) otherInput.value = flow.otherText;
  }

  const submit = root.querySelector<HTMLButtonElement>(
    "button[data-action='submit']",
  );
  if (submit) submit.disabled = !flow.canSubmit();
  const skip = root.querySelector<HTMLButtonElement>(
    "button[data-action='skip']",
  );
  if (skip) skip.disabled = flow.submitting;

  const banner = root.querySelector<HTMLElement>("[data-role='error-banner']");
  if (banner) {
    banner.hidden = flow.lastError === null;
    banner.textContent = flow.lastError ?? "";
  }
  const failed = root.querySelector<HTMLElement>("[data-role='video-failed']");
  if (failed) failed.hidden = !flow.videoFailed;

  // page identity is stable within a sync; (re)attach error watchers once
  if (!root.dataset.watched || root.dataset.watched !== String(page.page_index)) {
    root.dataset.watched = String(page.page_index);
    watchVideoErrors(root, flow);
  }
}

function restart(media: HTMLMediaElement): void {
  try {
    media.currentTime = 0;
  } catch {
    // a player that has not loaded yet cannot seek; play from wherever
  }
  const maybePromise = media.play?.() as unknown;
  if (
    maybePromise &&
    typeof (maybePromise as Promise<void>).catch === "function"
  ) {
    void (maybePromise as Promise<void>).catch(() => undefined);
  }
}

type Handler = () => void;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: Array<Node | string> = [],
  onAction?: Handler,
  eventName = "click",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") {
      node.className = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    node.append(child);
  }
  if (onAction) {
    node.addEventListener(eventName, onAction);
  }
  return node;
}
