// In-memory stand-in for the evaluation service, plugged in at the fetch
// seam. It mirrors the server's state transitions (skip budget, attention
// grading, completion) and its error statuses, so the client can be tested
// end to end without a running backend.
//
// Condition names exist here only as internal bookkeeping — exactly like
// the real service, the payloads it emits never contain them, and the
// blinding test relies on that separation.

import type { FetchLike } from "../src/api.js";
import type {
  JuiceOption,
  PagePayload,
  SessionStatus,
  StudyKind,
  SubmitBody,
} from "../src/types.js";

export const RESPONSE_VALUES = [
  "left_clear",
  "left_slight",
  "tie",
  "right_slight",
  "right_clear",
];

export const RESPONSE_LABELS = [
  "Left clearly better",
  "Left slightly better",
  "They are equal",
  "Right slightly better",
  "Right clearly better",
];

const JUICE_BY_KIND: Record<StudyKind, JuiceOption[]> = {
  realism: [
    {
      key: "unrealistic_motion",
      label:
        "Unrealistic motion (glitches/artefacts, limbs/body penetrating " +
        "each other, physically impossible motion)",
    },
    { key: "smoothness", label: "The smoothness of the motion" },
    { key: "amount_intensity", label: "The amount and intensity of motion" },
    { key: "recognisable_gestures", label: "Recognisable gestures" },
    { key: "other", label: "Other (Please specify factors not listed above)" },
  ],
  alignment: [
    { key: "rhythm_timing", label: "Fit the rhythm and timing of the speech better" },
    {
      key: "emphasised_correct_part",
      label: "Emphasised the correct part (or parts) of the speech",
    },
    {
      key: "content_meaning",
      label: "Better matched the content and meaning of the speech",
    },
    { key: "emotion", label: "Better fit for the emotion of the speech" },
    { key: "other", label: "Other (Please specify factors not listed above)" },
  ],
};

const INTRO_BY_KIND: Record<StudyKind, string> = {
  realism:
    "Below are two videos without audio of a character speaking and gesturing.",
  alignment:
    "Below are two videos of a character speaking and gesturing. " +
    "Both videos have the same motion, but different speech.",
};

const QUESTION_BY_KIND: Record<StudyKind, string> = {
  realism: "In which video does the character gesture more like a real person?",
  alignment: "In which video do the character’s movements fit the speech better?",
};

const JUICE_PROMPT =
  "Which factors contributed most to your response? Please tick one or more options:";

const MAX_SKIPS = 3;

export interface AttentionSpec {
  page: number;
  modality: "visual_text" | "audio_voice";
  side: "left" | "right";
  targetValue: string;
}

export interface FakeOptions {
  nPages?: number;
  studyKind?: StudyKind;
  attention?: AttentionSpec[];
  conditionNames?: string[];
  studyId?: string;
  answeredPages?: number[];
  status?: SessionStatus;
  skipsUsed?: number;
}

export interface RecordedPost {
  pageIndex: number;
  kind: "vote" | "attention" | "skip";
  body: SubmitBody;
}

interface ErrorDoc {
  detail: string;
  field?: string;
}

/** Builds a Response without relying on the jsdom environment having one. */
function jsonResponse(status: number, doc: unknown): Response {
  if (typeof Response !== "undefined") {
    return new Response(JSON.stringify(doc), {
      status,
      headers: { "content-type": "application/json" },
    });
  }
  const stand = {
    ok: status >= 200 && status < 300,
    status,
    statusText: `HTTP ${status}`,
    json: async () => doc,
  };
  return stand as unknown as Response;
}

class HttpFailure extends Error {
  constructor(readonly status: number, readonly doc: ErrorDoc) {
    super(doc.detail);
  }
}

export class FakeService {
  readonly studyId: string;
  readonly studyKind: StudyKind;
  readonly nPages: number;
  readonly sessionId = "s00000";
  /** Internal blinding secret; never serialized into any payload. */
  readonly conditionNames: string[];

  posts: RecordedPost[] = [];
  postAttempts = 0;
  status: SessionStatus;
  skipsUsed: number;
  failedChecks = 0;
  answered: Set<number>;
  needsReview = false;
  takers = new Set<string>();

  /** Reject this many POSTs with a network error before touching state. */
  failPostsBeforeApply = 0;
  /** Apply this many POSTs, then lose the response on the wire. */
  failPostsAfterApply = 0;
  /** Reject this many GETs with a network error. */
  failGets = 0;

  /** Secret per-page condition pairing; inspected by tests only. */
  readonly pairings = new Map<number, [string, string]>();

  private readonly attention: Map<number, AttentionSpec>;

  constructor(options: FakeOptions = {}) {
    this.studyId = options.studyId ?? "study-1";
    this.studyKind = options.studyKind ?? "realism";
    this.nPages = options.nPages ?? 6;
    this.conditionNames = options.conditionNames ?? [
      "gesturenet-large",
      "diffusion-baseline",
      "mocap-topline",
    ];
    this.status = options.status ?? "active";
    this.skipsUsed = options.skipsUsed ?? 0;
    this.answered = new Set(options.answeredPages ?? []);
    const specs =
      options.attention ??
      (this.studyKind === "realism"
        ? [
            {
              page: 3,
              modality: "visual_text" as const,
              side: "right" as const,
              targetValue: "left_clear",
            },
          ]
        : [
            {
              page: 3,
              modality: "audio_voice" as const,
              side: "left" as const,
              targetValue: "right_clear",
            },
          ]);
    this.attention = new Map(specs.map((s) => [s.page, s]));
  }

  /** Pause the next POST until the returned release function is called. */
  holdNextPost(): () => void {
    let release: () => void = () => undefined;
    const gate = new Promise<void>((resolve) => {
      release = resolve;
    });
    this.pendingGate = gate;
    return release;
  }

  private pendingGate: Promise<void> | null = null;

  readonly fetchFn: FetchLike = async (input, init) => {
    const url = new URL(input, "http://fake.test");
    const method = (init?.method ?? "GET").toUpperCase();
    try {
      if (method === "GET") {
        if (this.failGets > 0) {
          this.failGets--;
          throw new TypeError("fetch failed");
        }
        return jsonResponse(200, this.handleGet(url));
      }
      if (method === "POST") {
        this.postAttempts++;
        if (this.failPostsBeforeApply > 0) {
          this.failPostsBeforeApply--;
          throw new TypeError("fetch failed");
        }
        if (this.pendingGate) {
          const gate = this.pendingGate;
          this.pendingGate = null;
          await gate;
        }
        const body = JSON.parse(String(init?.body ?? "{}")) as SubmitBody;
        const doc = this.handlePost(url, body);
        if (this.failPostsAfterApply > 0) {
          this.failPostsAfterApply--;
          throw new TypeError("fetch failed");
        }
        return jsonResponse(200, doc);
      }
      throw new HttpFailure(405, { detail: `method ${method} not allowed` });
    } catch (err) {
      if (err instanceof HttpFailure) {
        return jsonResponse(err.status, err.doc);
      }
      throw err;
    }
  };

  private handleGet(url: URL): unknown {
    const parts = url.pathname.split("/").filter(Boolean);
    if (parts[0] === "sessions" && parts[1] === "next") {
      const study = url.searchParams.get("study") ?? "";
      const taker = url.searchParams.get("taker") ?? "";
      if (study !== this.studyId) {
        throw new HttpFailure(404, { detail: `no study ${study}` });
      }
      if (this.takers.has(taker)) {
        throw new HttpFailure(409, {
          detail: `taker ${taker} already has a session`,
        });
      }
      this.takers.add(taker);
      return this.summary();
    }
    if (parts[0] === "sessions" && parts.length === 2) {
      this.requireSession(parts[1]);
      return this.summary();
    }
    if (parts[0] === "sessions" && parts[2] === "pages") {
      this.requireSession(parts[1]);
      const pageIndex = Number(parts[3]);
      if (!(pageIndex >= 1 && pageIndex <= this.nPages)) {
        throw new HttpFailure(404, {
          detail: `session ${parts[1]} has no page ${pageIndex}`,
        });
      }
      return this.pagePayload(pageIndex);
    }
    throw new HttpFailure(404, { detail: `no route ${url.pathname}` });
  }

  private handlePost(url: URL, body: SubmitBody): unknown {
    const parts = url.pathname.split("/").filter(Boolean);
    if (parts[0] !== "sessions" || parts[2] !== "pages") {
      throw new HttpFailure(404, { detail: `no route ${url.pathname}` });
    }
    this.requireSession(parts[1]);
    const pageIndex = Number(parts[3]);
    if (this.status === "completed" || this.status === "terminated") {
      throw new HttpFailure(409, {
        detail: `session ${this.sessionId} is ${this.status}`,
      });
    }
    if (this.answered.has(pageIndex)) {
      throw new HttpFailure(409, {
        detail: `page ${pageIndex} of session ${this.sessionId} already answered`,
      });
    }
    if (body.skipped) {
      this.applySkip(pageIndex, body);
    } else {
      this.applyResponse(pageIndex, body);
    }
    return {
      session_id: this.sessionId,
      status: this.status,
      skips_used: this.skipsUsed,
      needs_review: this.needsReview,
      completed: this.answered.size === this.nPages,
    };
  }

  private applySkip(pageIndex: number, body: SubmitBody): void {
    if (body.response !== null && body.response !== undefined) {
      throw new HttpFailure(422, {
        detail: "a skip carries no response",
        field: "response",
      });
    }
    this.answered.add(pageIndex);
    this.skipsUsed++;
    if (this.skipsUsed > MAX_SKIPS) {
      this.status = "terminated";
      this.needsReview = true;
    } else {
      this.maybeComplete();
    }
    this.posts.push({ pageIndex, kind: "skip", body });
  }

  private applyResponse(pageIndex: number, body: SubmitBody): void {
    const response = body.response;
    if (response === null || response === undefined) {
      throw new HttpFailure(422, {
        detail: "required unless skipping",
        field: "response",
      });
    }
    if (!RESPONSE_VALUES.includes(response)) {
      throw new HttpFailure(422, {
        detail: `expected one of ${RESPONSE_VALUES.join(", ")}`,
        field: "response",
      });
    }
    const check = this.attention.get(pageIndex);
    if (check) {
      // graded page: justification ticks are accepted but ignored
      if (response !== check.targetValue) {
        this.failedChecks++;
        if (this.failedChecks >= 2) {
          this.status = "rejected";
        } else if (this.status === "active") {
          this.status = "excluded";
        }
      }
      this.answered.add(pageIndex);
      this.maybeComplete();
      this.posts.push({ pageIndex, kind: "attention", body });
      return;
    }
    const juice = body.juice_options ?? [];
    const known = new Set(JUICE_BY_KIND[this.studyKind].map((o) => o.key));
    const unknown = juice.filter((key) => !known.has(key));
    if (unknown.length > 0) {
      throw new HttpFailure(422, {
        detail: `unknown option keys: ${unknown.join(", ")}`,
        field: "vote.juice_options",
      });
    }
    if (response === "tie") {
      if (juice.length > 0) {
        throw new HttpFailure(422, {
          detail: "tie or skipped records carry no options",
          field: "vote.juice_options",
        });
      }
    } else if (juice.length === 0) {
      throw new HttpFailure(422, {
        detail: "non-tie responses must tick at least one option",
        field: "vote.juice_options",
      });
    }
    if (
      body.juice_other_text !== null &&
      body.juice_other_text !== undefined &&
      !juice.includes("other")
    ) {
      throw new HttpFailure(422, {
        detail: "free text requires the 'other' option",
        field: "vote.juice_other_text",
      });
    }
    this.answered.add(pageIndex);
    this.maybeComplete();
    this.posts.push({ pageIndex, kind: "vote", body });
  }

  private maybeComplete(): void {
    if (this.answered.size === this.nPages && this.status === "active") {
      this.status = "completed";
    }
  }

  private requireSession(sessionId: string): void {
    if (sessionId !== this.sessionId) {
      throw new HttpFailure(404, { detail: `no session ${sessionId}` });
    }
  }

  summary() {
    return {
      session_id: this.sessionId,
      study_kind: this.studyKind,
      n_pages: this.nPages,
      status: this.status,
      skips_used: this.skipsUsed,
      answered_pages: [...this.answered].sort((a, b) => a - b),
      completed: this.answered.size === this.nPages,
      intro_text: INTRO_BY_KIND[this.studyKind],
      question: QUESTION_BY_KIND[this.studyKind],
      response_options: RESPONSE_LABELS,
      response_values: RESPONSE_VALUES,
      juice_prompt: JUICE_PROMPT,
      juice_options: JUICE_BY_KIND[this.studyKind],
    };
  }

  pagePayload(pageIndex: number): PagePayload {
    // the pairing is the secret the payload must not leak
    this.pairings.set(pageIndex, [
      this.conditionNames[(pageIndex - 1) % this.conditionNames.length],
      this.conditionNames[pageIndex % this.conditionNames.length],
    ]);
    const spec = this.attention.get(pageIndex);
    let attention: PagePayload["attention"] = null;
    if (spec) {
      attention =
        spec.modality === "visual_text"
          ? {
              modality: spec.modality,
              side: spec.side,
              overlay_text: `[Attention check] Please choose '${
                RESPONSE_LABELS[RESPONSE_VALUES.indexOf(spec.targetValue)]
              }'.`,
            }
          : {
              modality: spec.modality,
              side: spec.side,
              audio_overlay_uri: `attention-audio:a${pageIndex.toString().padStart(4, "0")}`,
            };
    }
    return {
      page_index: pageIndex,
      total_pages: this.nPages,
      progress: pageIndex / this.nPages,
      study_kind: this.studyKind,
      intro_text: INTRO_BY_KIND[this.studyKind],
      question: QUESTION_BY_KIND[this.studyKind],
      response_options: RESPONSE_LABELS,
      response_values: RESPONSE_VALUES,
      juice_prompt: JUICE_PROMPT,
      juice_options: JUICE_BY_KIND[this.studyKind],
      left_video_uri: `video:stim-${pageIndex.toString(16).padStart(6, "0")}a`,
      right_video_uri: `video:stim-${pageIndex.toString(16).padStart(6, "0")}b`,
      muted: this.studyKind === "realism",
      attention,
    };
  }
}
