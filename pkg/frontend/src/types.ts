// Wire types for the evaluation service API.
//
// These mirror the JSON the service emits verbatim; the client never
// invents fields of its own, so anything rendered on screen can be
// traced back to a blinded payload.

export type StudyKind = "realism" | "alignment";

export type SessionStatus =
  | "active"
  | "completed"
  | "terminated"
  | "excluded"
  | "rejected";

export interface JuiceOption {
  key: string;
  label: string;
}

export interface SessionSummary {
  session_id: string;
  study_kind: StudyKind;
  n_pages: number;
  status: SessionStatus;
  skips_used: number;
  answered_pages: number[];
  completed: boolean;
  intro_text: string;
  question: string;
  response_options: string[];
  response_values: string[];
  juice_prompt: string;
  juice_options: JuiceOption[];
}

export interface AttentionOverlay {
  modality: "visual_text" | "audio_voice";
  side: "left" | "right";
  overlay_text?: string;
  audio_overlay_uri?: string;
}

export interface PagePayload {
  page_index: number;
  total_pages: number;
  progress: number;
  study_kind: StudyKind;
  intro_text: string;
  question: string;
  response_options: string[];
  response_values: string[];
  juice_prompt: string;
  juice_options: JuiceOption[];
  left_video_uri: string;
  right_video_uri: string;
  muted: boolean;
  attention: AttentionOverlay | null;
}

export interface SubmitBody {
  response: string | null;
  juice_options: string[];
  juice_other_text: string | null;
  skipped: boolean;
}

export interface SubmitResult {
  session_id: string;
  status: SessionStatus;
  skips_used: number;
  needs_review: boolean;
  completed: boolean;
}
