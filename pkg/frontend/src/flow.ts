// Session view-model: one state machine per test-taker session.
//
// Owns every UI-visible rule: the justification checkboxes stay locked
// until a non-tie response, ties and skips never carry justification
// options, a terminated session lands on the termination screen, and at
// most one submission is in flight at a time. The DOM layer renders this
// state and calls the action methods; it never talks to the service.

import { ApiClient } from "./api.js";
import type {
  PagePayload,
  SessionSummary,
  SubmitBody,
  SubmitResult,
} from "./types.js";

export type Screen =
  | { kind: "loading" }
  | { kind: "intro" }
  | { kind: "page"; page: PagePayload }
  | { kind: "done" }
  | { kind: "terminated" }
  | { kind: "error"; message: string };

const TIE = "tie";
const OTHER = "other";

export class SessionFlow {
  session: SessionSummary | null = null;
  screen: Screen = { kind: "loading" };

  selected: string | null = null;
  otherText = "";
  submitting = false;
  videoFailed = false;
  skipsUsed = 0;
  needsReview = false;
  /** Submission error banner; the page and selection stay put. */
  lastError: string | null = null;

  private ticked = new Set<string>();
  private listeners: Array<() => void> = [];
  private pendingRetry: (() => Promise<void>) | null = null;

  constructor(private readonly api: ApiClient) {}

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  async start(studyId: string, takerId: string): Promise<void> {
    this.screen = { kind: "loading" };
    this.emit();
    try {
      this.session = await this.api.openSession(studyId, takerId);
    } catch (err) {
      this.pendingRetry = () => this.start(studyId, takerId);
      this.screen = { kind: "error", message: messageOf(err) };
      this.emit();
      return;
    }
    this.skipsUsed = this.session.skips_used;
    if (this.session.status === "terminated") {
      this.screen = { kind: "terminated" };
    } else if (this.session.completed) {
      this.screen = { kind: "done" };
    } else {
      this.screen = { kind: "intro" };
    }
    this.emit();
  }

  /** Leave the instructions screen for the first unanswered page. */
  async beginPages(): Promise<void> {
    if (!this.session) return;
    const next = firstUnanswered(
      this.session.answered_pages,
      this.session.n_pages,
    );
    if (next === null) {
      this.screen = { kind: "done" };
      this.emit();
      return;
    }
    await this.loadPage(next);
  }

  /** Re-run the request behind the current error screen. */
  async retry(): Promise<void> {
    const pending = this.pendingRetry;
    if (pending) {
      this.pendingRetry = null;
      await pending();
    }
  }

  get page(): PagePayload | null {
    return this.screen.kind === "page" ? this.screen.page : null;
  }

  /** Justification controls are locked until a non-tie response. */
  juiceEnabled(): boolean {
    return this.selected !== null && this.selected !== TIE;
  }

  selectResponse(value: string): void {
    const page = this.page;
    if (!page || this.submitting) return;
    if (!page.response_values.includes(value)) return;
    this.selected = value;
    if (value === TIE) {
      // ticks from an earlier choice must not ride along on a tie
      this.ticked.clear();
      this.otherText = "";
    }
    this.emit();
  }

  toggleJuice(key: string): void {
    const page = this.page;
    if (!page || this.submitting || !this.juiceEnabled()) return;
    if (!page.juice_options.some((option) => option.key === key)) return;
    if (this.ticked.has(key)) {
      this.ticked.delete(key);
      if (key === OTHER) this.otherText = "";
    } else {
      this.ticked.add(key);
    }
    this.emit();
  }

  setOtherText(text: string): void {
    if (this.submitting) return;
    this.otherText = text;
    this.emit();
  }

  tickedOptions(): string[] {
    return [...this.ticked].sort();
  }

  hasTicked(key: string): boolean {
    return this.ticked.has(key);
  }

  markVideoFailed(): void {
    if (!this.videoFailed) {
      this.videoFailed = true;
      this.emit();
    }
  }

  canSubmit(): boolean {
    if (this.page === null || this.submitting || this.selected === null) {
      return false;
    }
    if (!this.juiceEnabled()) return true;
    if (this.ticked.size === 0) return false;
    if (this.ticked.has(OTHER) && this.otherText.trim() === "") return false;
    return true;
  }

  /** The exact POST body for the current selection. */
  buildSubmission(): SubmitBody {
    const juice = this.juiceEnabled() ? this.tickedOptions() : [];
    return {
      response: this.selected,
      juice_options: juice,
      juice_other_text: juice.includes(OTHER) ? this.otherText.trim() : null,
      skipped: false,
    };
  }

  async submit(): Promise<void> {
    if (!this.canSubmit()) return;
    await this.post(this.buildSubmission());
  }

  async skip(): Promise<void> {
    if (this.page === null || this.submitting) return;
    await this.post({
      response: null,
      juice_options: [],
      juice_other_text: null,
      skipped: true,
    });
  }

  private async post(body: SubmitBody): Promise<void> {
    const page = this.page;
    if (!page || !this.session) return;
    this.submitting = true;
    this.lastError = null;
    this.emit();
    let result: SubmitResult;
    try {
      result = await this.api.submitPage(
        this.session.session_id,
        page.page_index,
        body,
      );
    } catch (err) {
      // stay on the page with the selection intact so the taker can retry
      this.submitting = false;
      this.lastError = messageOf(err);
      this.emit();
      return;
    }
    this.submitting = false;
    this.skipsUsed = result.skips_used;
    this.needsReview = result.needs_review;
    if (result.status === "terminated") {
      this.screen = { kind: "terminated" };
      this.emit();
      return;
    }
    if (result.completed) {
      this.screen = { kind: "done" };
      this.emit();
      return;
    }
    await this.loadPage(page.page_index + 1);
  }

  private async loadPage(pageIndex: number): Promise<void> {
    if (!this.session) return;
    this.screen = { kind: "loading" };
    this.emit();
    let page: PagePayload;
    try {
      page = await this.api.fetchPage(this.session.session_id, pageIndex);
    } catch (err) {
      this.pendingRetry = () => this.loadPage(pageIndex);
      this.screen = { kind: "error", message: messageOf(err) };
      this.emit();
      return;
    }
    this.selected = null;
    this.ticked = new Set();
    this.otherText = "";
    this.videoFailed = false;
    this.lastError = null;
    this.screen = { kind: "page", page };
    this.emit();
  }
}

export function firstUnanswered(
  answered: number[],
  nPages: number,
): number | null {
  const done = new Set(answered);
  for (let i = 1; i <= nPages; i++) {
    if (!done.has(i)) return i;
  }
  return null;
}

function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
