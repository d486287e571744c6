"""Shared domain types for pairwise gesture-evaluation studies.

Every entity is an immutable value object with validation in
``__post_init__``, a ``to_dict`` for serialization, and a ``from_dict``
that re-validates.  The on-disk formats are line-delimited JSON records
for vote logs and single JSON documents for collections (conditions,
segments, stimuli, study plans).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence


class DomainValidationError(ValueError):
    """Invalid entity or document; ``field_path`` locates the offending field."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


def _require(ok: bool, field_path: str, message: str) -> None:
    if not ok:
        raise DomainValidationError(field_path, message)


class ConditionKind(str, Enum):
    MOCAP = "mocap"
    GENERATIVE = "generative"


class ArtifactFlag(str, Enum):
    FLICKING = "flicking"
    MESH_PENETRATION = "mesh_penetration"
    ACCEPTABLE_PENETRATION_A = "acceptable_penetration_a"
    ACCEPTABLE_PENETRATION_B = "acceptable_penetration_b"


class StudyKind(str, Enum):
    REALISM = "realism"
    ALIGNMENT = "alignment"


class AttentionModality(str, Enum):
    VISUAL_TEXT = "visual_text"
    AUDIO_VOICE = "audio_voice"


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class Response(str, Enum):
    LEFT_CLEAR = "left_clear"
    LEFT_SLIGHT = "left_slight"
    TIE = "tie"
    RIGHT_SLIGHT = "right_slight"
    RIGHT_CLEAR = "right_clear"

    @property
    def is_tie(self) -> bool:
        return self is Response.TIE

    @property
    def winning_side(self) -> Optional[Side]:
        if self in (Response.LEFT_CLEAR, Response.LEFT_SLIGHT):
            return Side.LEFT
        if self in (Response.RIGHT_CLEAR, Response.RIGHT_SLIGHT):
            return Side.RIGHT
        return None

    @property
    def is_clear(self) -> bool:
        return self in (Response.LEFT_CLEAR, Response.RIGHT_CLEAR)


class SessionStatus(str, Enum):
    ACTIVE = "active"
    COMPLETED = "completed"
    TERMINATED = "terminated"
    EXCLUDED = "excluded"
    REJECTED = "rejected"


# Five-level response labels, in on-screen order (index 1..5 is the
# attention-check target_option numbering).
RESPONSE_ORDER: tuple[Response, ...] = (
    Response.LEFT_CLEAR,
    Response.LEFT_SLIGHT,
    Response.TIE,
    Response.RIGHT_SLIGHT,
    Response.RIGHT_CLEAR,
)

RESPONSE_LABELS: dict[Response, str] = {
    Response.LEFT_CLEAR: "Left clearly better",
    Response.LEFT_SLIGHT: "Left slightly better",
    Response.TIE: "They are equal",
    Response.RIGHT_SLIGHT: "Right slightly better",
    Response.RIGHT_CLEAR: "Right clearly better",
}

QUESTION_TEXT: dict[StudyKind, str] = {
    StudyKind.REALISM: "In which video does the character gesture more like a real person?",
    StudyKind.ALIGNMENT: "In which video do the character’s movements fit the speech better?",
}

INTRO_TEXT: dict[StudyKind, str] = {
    StudyKind.REALISM: "Below are two videos without audio of a character speaking and gesturing.",
    StudyKind.ALIGNMENT: (
        "Below are two videos of a character speaking and gesturing. "
        "Both videos have the same motion, but different speech."
    ),
}

JUICE_PROMPT = "Which factors contributed most to your response? Please tick one or more options:"

# Option keys are stable identifiers used in vote records; labels are the
# verbatim GUI texts.
JUICE_OPTIONS: dict[StudyKind, dict[str, str]] = {
    StudyKind.REALISM: {
        "unrealistic_motion": (
            "Unrealistic motion (glitches/artefacts, limbs/body penetrating "
            "each other, physically impossible motion)"
        ),
        "smoothness": "The smoothness of the motion",
        "amount_intensity": "The amount and intensity of motion",
        "recognisable_gestures": "Recognisable gestures",
        "other": "Other (Please specify factors not listed above)",
    },
    StudyKind.ALIGNMENT: {
        "rhythm_timing": "Fit the rhythm and timing of the speech better",
        "emphasised_correct_part": "Emphasised the correct part (or parts) of the speech",
        "content_meaning": "Better matched the content and meaning of the speech",
        "emotion": "Better fit for the emotion of the speech",
        "other": "Other (Please specify factors not listed above)",
    },
}

_ALL_JUICE_KEYS = frozenset(JUICE_OPTIONS[StudyKind.REALISM]) | frozenset(
    JUICE_OPTIONS[StudyKind.ALIGNMENT]
)

MAX_SESSION_PAGES = 25


def _enum(value: Any, enum_cls: type, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise DomainValidationError(path, f"expected one of [{allowed}], got {value!r}") from None


@dataclass(frozen=True)
class Condition:
    """One system under evaluation: a generative model or the mocap topline."""

    id: str
    display_name: str
    kind: ConditionKind
    seeds_available: int = 1

    def __post_init__(self):
        _require(bool(self.id), "condition.id", "must be non-empty")
        _require(bool(self.display_name), "condition.display_name", "must be non-empty")
        _require(self.seeds_available >= 1, "condition.seeds_available", "must be >= 1")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "kind": self.kind.value,
            "seeds_available": self.seeds_available,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Condition":
        return cls(
            id=d["id"],
            display_name=d["display_name"],
            kind=_enum(d["kind"], ConditionKind, "condition.kind"),
            seeds_available=int(d.get("seeds_available", 1)),
        )


@dataclass(frozen=True)
class Segment:
    """A test-set speech span; times are seconds within the speaker's take."""

    id: str
    speaker_id: str
    start_s: float
    end_s: float
    transcript: str
    artifact_flags: frozenset[ArtifactFlag] = frozenset()
    sentence_complete: bool = True

    def __post_init__(self):
        _require(bool(self.id), "segment.id", "must be non-empty")
        _require(bool(self.speaker_id), "segment.speaker_id", "must be non-empty")
        _require(self.start_s >= 0.0, "segment.start_s", "must be >= 0")
        _require(
            self.start_s < self.end_s,
            "segment.end_s",
            f"must exceed start_s ({self.start_s} >= {self.end_s})",
        )
        object.__setattr__(self, "artifact_flags", frozenset(self.artifact_flags))

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def overlaps(self, other: "Segment") -> bool:
        return self.speaker_id == other.speaker_id and not (
            self.end_s <= other.start_s or other.end_s <= self.start_s
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "speaker_id": self.speaker_id,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "transcript": self.transcript,
            "artifact_flags": sorted(f.value for f in self.artifact_flags),
            "sentence_complete": self.sentence_complete,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Segment":
        return cls(
            id=d["id"],
            speaker_id=d["speaker_id"],
            start_s=float(d["start_s"]),
            end_s=float(d["end_s"]),
            transcript=d.get("transcript", ""),
            artifact_flags=frozenset(
                _enum(f, ArtifactFlag, "segment.artifact_flags") for f in d.get("artifact_flags", ())
            ),
            sentence_complete=bool(d.get("sentence_complete", True)),
        )


@dataclass(frozen=True)
class Stimulus:
    """One rendered video: a condition's motion for a segment, with some audio track."""

    id: str
    condition_id: str
    segment_id: str
    seed_index: int
    video_uri: str
    audio_segment_id: str
    muted: bool

    def __post_init__(self):
        _require(bool(self.id), "stimulus.id", "must be non-empty")
        _require(self.seed_index >= 0, "stimulus.seed_index", "must be >= 0")

    @property
    def audio_matched(self) -> bool:
        return self.audio_segment_id == self.segment_id

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "condition_id": self.condition_id,
            "segment_id": self.segment_id,
            "seed_index": self.seed_index,
            "video_uri": self.video_uri,
            "audio_segment_id": self.audio_segment_id,
            "muted": self.muted,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Stimulus":
        return cls(
            id=d["id"],
            condition_id=d["condition_id"],
            segment_id=d["segment_id"],
            seed_index=int(d["seed_index"]),
            video_uri=d["video_uri"],
            audio_segment_id=d["audio_segment_id"],
            muted=bool(d["muted"]),
        )


@dataclass(frozen=True)
class AttentionCheck:
    """Instructed-response payload attached to an attention-check page."""

    target_option: int
    modality: AttentionModality
    side: Side
    overlay_text: str = ""

    def __post_init__(self):
        _require(
            1 <= self.target_option <= 5,
            "attention_check.target_option",
            "must be in 1..5",
        )

    @property
    def target_response(self) -> Response:
        return RESPONSE_ORDER[self.target_option - 1]

    def to_dict(self) -> dict:
        return {
            "target_option": self.target_option,
            "modality": self.modality.value,
            "side": self.side.value,
            "overlay_text": self.overlay_text,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttentionCheck":
        return cls(
            target_option=int(d["target_option"]),
            modality=_enum(d["modality"], AttentionModality, "attention_check.modality"),
            side=_enum(d["side"], Side, "attention_check.side"),
            overlay_text=d.get("overlay_text", ""),
        )


@dataclass(frozen=True)
class ComparisonTask:
    """One scheduled pairwise page: two stimuli plus optional attention payload."""

    id: str
    study_kind: StudyKind
    left: Stimulus
    right: Stimulus
    attention_check: Optional[AttentionCheck] = None

    def __post_init__(self):
        _require(bool(self.id), "task.id", "must be non-empty")
        if self.study_kind is StudyKind.REALISM:
            _require(
                self.left.segment_id == self.right.segment_id,
                "task.right.segment_id",
                "realism tasks must pair two conditions on the same segment",
            )
            _require(
                self.left.condition_id != self.right.condition_id,
                "task.right.condition_id",
                "realism tasks must pair distinct conditions",
            )
            _require(
                self.left.muted and self.right.muted,
                "task.left.muted",
                "realism stimuli must be muted",
            )
        else:
            _require(
                self.left.condition_id == self.right.condition_id
                and self.left.segment_id == self.right.segment_id
                and self.left.seed_index == self.right.seed_index,
                "task.right",
                "alignment tasks must share motion (condition, segment, seed)",
            )
            _require(
                not self.left.muted and not self.right.muted,
                "task.left.muted",
                "alignment stimuli must be audible",
            )
            _require(
                self.left.audio_matched != self.right.audio_matched,
                "task.right.audio_segment_id",
                "exactly one side must carry the matched audio",
            )

    @property
    def is_attention_check(self) -> bool:
        return self.attention_check is not None

    @property
    def matched_side(self) -> Optional[Side]:
        """Side carrying matched audio; alignment tasks only. Never sent to the UI."""
        if self.study_kind is not StudyKind.ALIGNMENT:
            return None
        return Side.LEFT if self.left.audio_matched else Side.RIGHT

    def condition_of(self, side: Side) -> str:
        return self.left.condition_id if side is Side.LEFT else self.right.condition_id

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "study_kind": self.study_kind.value,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
            "attention_check": self.attention_check.to_dict() if self.attention_check else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ComparisonTask":
        att = d.get("attention_check")
        return cls(
            id=d["id"],
            study_kind=_enum(d["study_kind"], StudyKind, "task.study_kind"),
            left=Stimulus.from_dict(d["left"]),
            right=Stimulus.from_dict(d["right"]),
            attention_check=AttentionCheck.from_dict(att) if att else None,
        )


def blinded_page_payload(task: ComparisonTask, page_index: int, total_pages: int) -> dict:
    """UI payload for one page.

    Contains video locators and display texts only: no condition ids or
    names, no matched/mismatched marker, no attention target option.
    """
    kind = task.study_kind
    payload: dict[str, Any] = {
        "page_index": page_index,
        "total_pages": total_pages,
        "progress": page_index / total_pages,
        "study_kind": kind.value,
        "intro_text": INTRO_TEXT[kind],
        "question": QUESTION_TEXT[kind],
        "response_options": [RESPONSE_LABELS[r] for r in RESPONSE_ORDER],
        "response_values": [r.value for r in RESPONSE_ORDER],
        "juice_prompt": JUICE_PROMPT,
        "juice_options": [
            {"key": k, "label": v} for k, v in JUICE_OPTIONS[kind].items()
        ],
        "left_video_uri": task.left.video_uri,
        "right_video_uri": task.right.video_uri,
        "muted": kind is StudyKind.REALISM,
        "attention": None,
    }
    check = task.attention_check
    if check is not None:
        att: dict[str, Any] = {"modality": check.modality.value, "side": check.side.value}
        if check.modality is AttentionModality.VISUAL_TEXT:
            att["overlay_text"] = check.overlay_text
        else:
            # Replacement-voice locator; the spoken message carries the
            # instruction, so no text is exposed for audio checks.
            att["audio_overlay_uri"] = f"attention-audio:{task.id}"
        payload["attention"] = att
    return payload


@dataclass(frozen=True)
class VoteRecord:
    """One test-taker response to one page (or an explicit skip)."""

    session_id: str
    page_index: int
    task_id: str
    response: Optional[Response]
    juice_options: frozenset[str] = frozenset()
    juice_other_text: Optional[str] = None
    timestamp: float = 0.0
    skipped: bool = False

    def __post_init__(self):
        _require(bool(self.session_id), "vote.session_id", "must be non-empty")
        _require(
            1 <= self.page_index <= MAX_SESSION_PAGES,
            "vote.page_index",
            f"must be in 1..{MAX_SESSION_PAGES}",
        )
        _require(bool(self.task_id), "vote.task_id", "must be non-empty")
        object.__setattr__(self, "juice_options", frozenset(self.juice_options))
        unknown = self.juice_options - _ALL_JUICE_KEYS
        _require(not unknown, "vote.juice_options", f"unknown option keys: {sorted(unknown)}")
        if self.skipped:
            _require(self.response is None, "vote.response", "skipped pages carry no response")
        else:
            _require(self.response is not None, "vote.response", "required unless skipped")
        # JUICE is gated on a non-tie main response: empty iff tie or skip.
        needs_juice = not self.skipped and self.response is not None and not self.response.is_tie
        if needs_juice:
            _require(
                len(self.juice_options) > 0,
                "vote.juice_options",
                "non-tie responses must tick at least one option",
            )
        else:
            _require(
                len(self.juice_options) == 0,
                "vote.juice_options",
                "tie or skipped records carry no options",
            )
        if self.juice_other_text is not None:
            _require(
                "other" in self.juice_options,
                "vote.juice_other_text",
                "free text requires the 'other' option",
            )

    def to_dict(self) -> dict:
        return {
            "kind": "vote",
            "session_id": self.session_id,
            "page_index": self.page_index,
            "task_id": self.task_id,
            "response": self.response.value if self.response else None,
            "juice_options": sorted(self.juice_options),
            "juice_other_text": self.juice_other_text,
            "timestamp": self.timestamp,
            "skipped": self.skipped,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "VoteRecord":
        resp = d.get("response")
        return cls(
            session_id=d["session_id"],
            page_index=int(d["page_index"]),
            task_id=d["task_id"],
            response=_enum(resp, Response, "vote.response") if resp is not None else None,
            juice_options=frozenset(d.get("juice_options", ())),
            juice_other_text=d.get("juice_other_text"),
            timestamp=float(d.get("timestamp", 0.0)),
            skipped=bool(d.get("skipped", False)),
        )


@dataclass(frozen=True)
class AttentionOutcome:
    """Graded attention-check page; excluded from all statistics."""

    session_id: str
    page_index: int
    task_id: str
    response: Optional[Response]
    passed: bool
    timestamp: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kind": "attention",
            "session_id": self.session_id,
            "page_index": self.page_index,
            "task_id": self.task_id,
            "response": self.response.value if self.response else None,
            "passed": self.passed,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttentionOutcome":
        resp = d.get("response")
        return cls(
            session_id=d["session_id"],
            page_index=int(d["page_index"]),
            task_id=d["task_id"],
            response=_enum(resp, Response, "attention.response") if resp is not None else None,
            passed=bool(d["passed"]),
            timestamp=float(d.get("timestamp", 0.0)),
        )


@dataclass(frozen=True)
class SessionState:
    """One test taker's scheduled session and its progress."""

    session_id: str
    taker_id: str
    study_kind: StudyKind
    pages: tuple[ComparisonTask, ...]
    attention_positions: tuple[int, ...]
    skips_used: int = 0
    status: SessionStatus = SessionStatus.ACTIVE
    answered_pages: frozenset[int] = frozenset()
    failed_checks: int = 0
    needs_review: bool = False

    def __post_init__(self):
        n = len(self.pages)
        _require(5 <= n <= MAX_SESSION_PAGES, "session.pages", f"length must be in 5..{MAX_SESSION_PAGES}")
        object.__setattr__(self, "pages", tuple(self.pages))
        object.__setattr__(self, "attention_positions", tuple(self.attention_positions))
        object.__setattr__(self, "answered_pages", frozenset(self.answered_pages))
        pos = self.attention_positions
        _require(
            all(pos[i] < pos[i + 1] for i in range(len(pos) - 1)),
            "session.attention_positions",
            "must be strictly increasing",
        )
        lo, hi = attention_window(n)
        _require(
            all(lo <= p <= hi for p in pos),
            "session.attention_positions",
            f"must lie within the 20%%-80%% window ({lo}..{hi} for {n} pages)",
        )
        for p in pos:
            _require(
                self.pages[p - 1].is_attention_check,
                "session.pages",
                f"page {p} listed as attention position but carries no check",
            )
        _require(
            self.skips_used <= 3 or self.status is not SessionStatus.ACTIVE,
            "session.skips_used",
            "more than 3 skips cannot leave the session active",
        )

    @property
    def n_pages(self) -> int:
        return len(self.pages)

    @property
    def is_open(self) -> bool:
        """Whether further responses are accepted."""
        return self.status not in (SessionStatus.COMPLETED, SessionStatus.TERMINATED)

    def page(self, page_index: int) -> ComparisonTask:
        _require(
            1 <= page_index <= self.n_pages,
            "page_index",
            f"must be in 1..{self.n_pages}",
        )
        return self.pages[page_index - 1]

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "taker_id": self.taker_id,
            "study_kind": self.study_kind.value,
            "pages": [t.to_dict() for t in self.pages],
            "attention_positions": list(self.attention_positions),
            "skips_used": self.skips_used,
            "status": self.status.value,
            "answered_pages": sorted(self.answered_pages),
            "failed_checks": self.failed_checks,
            "needs_review": self.needs_review,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SessionState":
        return cls(
            session_id=d["session_id"],
            taker_id=d["taker_id"],
            study_kind=_enum(d["study_kind"], StudyKind, "session.study_kind"),
            pages=tuple(ComparisonTask.from_dict(t) for t in d["pages"]),
            attention_positions=tuple(int(p) for p in d["attention_positions"]),
            skips_used=int(d.get("skips_used", 0)),
            status=_enum(d.get("status", "active"), SessionStatus, "session.status"),
            answered_pages=frozenset(int(p) for p in d.get("answered_pages", ())),
            failed_checks=int(d.get("failed_checks", 0)),
            needs_review=bool(d.get("needs_review", False)),
        )


def attention_window(n_pages: int) -> tuple[int, int]:
    """Inclusive page range covering the 20%-80% progress window."""
    lo = max(1, math.ceil(0.2 * n_pages))
    hi = min(n_pages, int(0.8 * n_pages))
    return lo, hi


@dataclass(frozen=True)
class Estimate:
    """Point estimate with a bootstrap percentile interval."""

    point: float
    ci_low: float
    ci_high: float

    def __post_init__(self):
        _require(
            self.ci_low <= self.point <= self.ci_high,
            "estimate",
            f"ci_low <= point <= ci_high violated: [{self.ci_low}, {self.point}, {self.ci_high}]",
        )

    def to_dict(self) -> dict:
        return {"point": self.point, "ci_low": self.ci_low, "ci_high": self.ci_high}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Estimate":
        return cls(point=float(d["point"]), ci_low=float(d["ci_low"]), ci_high=float(d["ci_high"]))


@dataclass(frozen=True)
class PairwiseStat:
    """Two-sided bootstrap test of one condition pair, after FDR adjustment."""

    a: str
    b: str
    p_raw: float
    p_fdr: float
    significant: bool

    def __post_init__(self):
        _require(self.a != self.b, "pairwise.b", "conditions must differ")
        _require(0.0 <= self.p_raw <= 1.0, "pairwise.p_raw", "must be in [0, 1]")
        _require(
            self.p_fdr >= self.p_raw - 1e-15,
            "pairwise.p_fdr",
            "adjusted p-value cannot undercut the raw one",
        )

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "p_raw": self.p_raw,
            "p_fdr": self.p_fdr,
            "significant": self.significant,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PairwiseStat":
        return cls(
            a=d["a"],
            b=d["b"],
            p_raw=float(d["p_raw"]),
            p_fdr=float(d["p_fdr"]),
            significant=bool(d["significant"]),
        )


@dataclass(frozen=True)
class RatingReport:
    """Leaderboard document: per-condition estimates plus the pairwise test matrix.

    ``estimates`` is ordered by descending point estimate.  ``replicates``
    (bootstrap sample matrix, one column per condition in ``conditions``
    order) and ``pair_weights`` travel with the in-memory object for
    downstream consumers such as adaptive early stopping, but are not part
    of the serialized document.
    """

    kind: str
    estimates: dict[str, Estimate]
    pairwise: tuple[PairwiseStat, ...]
    n_votes_used: int
    n_bootstrap: int
    seed: int
    alpha: float = 0.05
    n_invalid_replicates: int = 0
    degenerate: bool = False
    conditions: tuple[str, ...] = ()
    replicates: Any = field(default=None, repr=False, compare=False)
    pair_weights: Optional[dict[tuple[str, str], float]] = field(
        default=None, repr=False, compare=False
    )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "estimates": {c: e.to_dict() for c, e in self.estimates.items()},
            "pairwise": [p.to_dict() for p in self.pairwise],
            "n_votes_used": self.n_votes_used,
            "n_bootstrap": self.n_bootstrap,
            "seed": self.seed,
            "alpha": self.alpha,
            "n_invalid_replicates": self.n_invalid_replicates,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RatingReport":
        return cls(
            kind=d["kind"],
            estimates={c: Estimate.from_dict(e) for c, e in d["estimates"].items()},
            pairwise=tuple(PairwiseStat.from_dict(p) for p in d["pairwise"]),
            n_votes_used=int(d["n_votes_used"]),
            n_bootstrap=int(d["n_bootstrap"]),
            seed=int(d["seed"]),
            alpha=float(d.get("alpha", 0.05)),
            n_invalid_replicates=int(d.get("n_invalid_replicates", 0)),
            degenerate=bool(d.get("degenerate", False)),
        )

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def canonical_json(doc: Any) -> str:
    """Deterministic JSON rendering used for documents and equality checks."""
    return json.dumps(doc, separators=(",", ":"), sort_keys=False, allow_nan=False)


# ---------------------------------------------------------------------------
# Vote-log serialization (line-delimited records)
# ---------------------------------------------------------------------------

def serialize_votes(votes: Iterable[VoteRecord]) -> str:
    """One JSON record per line, stable field order; '' for an empty list."""
    return "".join(canonical_json(v.to_dict()) + "\n" for v in votes)


def serialize_log_entries(entries: Iterable[VoteRecord | AttentionOutcome]) -> str:
    return "".join(canonical_json(e.to_dict()) + "\n" for e in entries)


def iter_log_lines(text: str) -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DomainValidationError(f"line {lineno}", f"not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise DomainValidationError(f"line {lineno}", "record must be an object")
        yield lineno, doc


def parse_votes(text: str, check_unique: bool = True) -> list[VoteRecord]:
    """Parse a vote log; lines of other kinds (e.g. attention outcomes) are skipped.

    Raises :class:`DomainValidationError` with a ``line N: field`` path on
    the first invalid record, and on duplicate (session, page) pairs when
    ``check_unique`` is set.
    """
    votes: list[VoteRecord] = []
    seen: set[tuple[str, int]] = set()
    for lineno, doc in iter_log_lines(text):
        if doc.get("kind") != "vote":
            continue
        try:
            vote = VoteRecord.from_dict(doc)
        except DomainValidationError as exc:
            raise DomainValidationError(f"line {lineno}: {exc.field_path}", str(exc)) from None
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainValidationError(f"line {lineno}", f"malformed record: {exc}") from None
        if check_unique:
            key = (vote.session_id, vote.page_index)
            if key in seen:
                raise DomainValidationError(
                    f"line {lineno}: vote.page_index",
                    f"duplicate record for session {vote.session_id!r} page {vote.page_index}",
                )
            seen.add(key)
        votes.append(vote)
    return votes


def parse_attention_outcomes(text: str) -> list[AttentionOutcome]:
    out = []
    for lineno, doc in iter_log_lines(text):
        if doc.get("kind") != "attention":
            continue
        try:
            out.append(AttentionOutcome.from_dict(doc))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainValidationError(f"line {lineno}", f"malformed record: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# Registries and study plans
# ---------------------------------------------------------------------------

@dataclass
class StudyRegistry:
    """All conditions, segments, and stimuli of one study, with integrity checks."""

    conditions: dict[str, Condition]
    segments: dict[str, Segment]
    stimuli: dict[str, Stimulus]

    @classmethod
    def build(
        cls,
        conditions: Iterable[Condition],
        segments: Iterable[Segment],
        stimuli: Iterable[Stimulus] = (),
    ) -> "StudyRegistry":
        reg = cls(conditions={}, segments={}, stimuli={})
        for c in conditions:
            _require(c.id not in reg.conditions, "conditions", f"duplicate condition id {c.id!r}")
            reg.conditions[c.id] = c
        for s in segments:
            _require(s.id not in reg.segments, "segments", f"duplicate segment id {s.id!r}")
            reg.segments[s.id] = s
        for st in stimuli:
            reg.add_stimulus(st)
        reg.validate()
        return reg

    def add_stimulus(self, st: Stimulus) -> None:
        _require(st.id not in self.stimuli, "stimuli", f"duplicate stimulus id {st.id!r}")
        self.stimuli[st.id] = st

    def validate(self) -> None:
        mocap = [c.id for c in self.conditions.values() if c.kind is ConditionKind.MOCAP]
        _require(
            len(mocap) <= 1,
            "conditions",
            f"at most one mocap condition allowed, found {mocap}",
        )
        for st in self.stimuli.values():
            path = f"stimulus[{st.id}]"
            _require(
                st.condition_id in self.conditions,
                f"{path}.condition_id",
                f"unknown condition {st.condition_id!r}",
            )
            _require(
                st.segment_id in self.segments,
                f"{path}.segment_id",
                f"unknown segment {st.segment_id!r}",
            )
            _require(
                st.audio_segment_id in self.segments,
                f"{path}.audio_segment_id",
                f"unknown segment {st.audio_segment_id!r}",
            )
            cond = self.conditions[st.condition_id]
            _require(
                st.seed_index < cond.seeds_available,
                f"{path}.seed_index",
                f"condition {cond.id!r} has only {cond.seeds_available} seeds",
            )
            if not st.muted:
                # Mismatched audio must keep the same speaker voice.
                _require(
                    self.segments[st.audio_segment_id].speaker_id
                    == self.segments[st.segment_id].speaker_id,
                    f"{path}.audio_segment_id",
                    "audio speaker must match the motion segment's speaker",
                )

    @property
    def mocap_condition(self) -> Optional[Condition]:
        for c in self.conditions.values():
            if c.kind is ConditionKind.MOCAP:
                return c
        return None

    def find_stimulus(
        self,
        condition_id: str,
        segment_id: str,
        muted: bool,
        audio_segment_id: Optional[str] = None,
        seed_index: Optional[int] = None,
    ) -> Optional[Stimulus]:
        want_audio = audio_segment_id if audio_segment_id is not None else segment_id
        for st in self.stimuli.values():
            if (
                st.condition_id == condition_id
                and st.segment_id == segment_id
                and st.muted == muted
                and st.audio_segment_id == want_audio
                and (seed_index is None or st.seed_index == seed_index)
            ):
                return st
        return None

    def segments_by_speaker(self) -> dict[str, list[Segment]]:
        out: dict[str, list[Segment]] = {}
        for s in self.segments.values():
            out.setdefault(s.speaker_id, []).append(s)
        for group in out.values():
            group.sort(key=lambda s: (s.start_s, s.id))
        return out

    def to_dict(self) -> dict:
        return {
            "conditions": [c.to_dict() for c in self.conditions.values()],
            "segments": [s.to_dict() for s in self.segments.values()],
            "stimuli": [s.to_dict() for s in self.stimuli.values()],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "StudyRegistry":
        return cls.build(
            conditions=(Condition.from_dict(c) for c in d.get("conditions", ())),
            segments=(Segment.from_dict(s) for s in d.get("segments", ())),
            stimuli=(Stimulus.from_dict(s) for s in d.get("stimuli", ())),
        )


@dataclass
class StudyPlan:
    """Self-contained study document: registry, task pool, and analysis config."""

    study_kind: StudyKind
    registry: StudyRegistry
    tasks: tuple[ComparisonTask, ...]
    rng_seed: int = 0
    n_bootstrap: int = 1000
    mismatch_assignment: Optional[dict[str, str]] = None
    study_id: Optional[str] = None

    def __post_init__(self):
        self.tasks = tuple(self.tasks)
        ids = set()
        for t in self.tasks:
            _require(t.id not in ids, "tasks", f"duplicate task id {t.id!r}")
            ids.add(t.id)
            _require(
                t.study_kind is self.study_kind,
                f"task[{t.id}].study_kind",
                "must match the plan's study kind",
            )

    def task_index(self) -> dict[str, ComparisonTask]:
        return {t.id: t for t in self.tasks}

    def to_dict(self) -> dict:
        doc = {"kind": "study_plan", "study_kind": self.study_kind.value}
        if self.study_id is not None:
            doc["study_id"] = self.study_id
        doc.update(self.registry.to_dict())
        doc["tasks"] = [t.to_dict() for t in self.tasks]
        doc["rng_seed"] = self.rng_seed
        doc["n_bootstrap"] = self.n_bootstrap
        doc["mismatch_assignment"] = self.mismatch_assignment
        return doc

    @classmethod
    def from_dict(cls, d: Mapping) -> "StudyPlan":
        _require(d.get("kind") == "study_plan", "kind", "expected 'study_plan'")
        return cls(
            study_kind=_enum(d["study_kind"], StudyKind, "study_kind"),
            registry=StudyRegistry.from_dict(d),
            tasks=tuple(ComparisonTask.from_dict(t) for t in d.get("tasks", ())),
            rng_seed=int(d.get("rng_seed", 0)),
            n_bootstrap=int(d.get("n_bootstrap", 1000)),
            mismatch_assignment=d.get("mismatch_assignment"),
            study_id=d.get("study_id"),
        )


def resolve_votes(
    votes: Sequence[VoteRecord], tasks: Mapping[str, ComparisonTask]
) -> None:
    """Referential-integrity check: every vote's task must resolve."""
    for v in votes:
        _require(
            v.task_id in tasks,
            f"vote[{v.session_id}/{v.page_index}].task_id",
            f"unknown task {v.task_id!r}",
        )


__all__ = [
    "ArtifactFlag",
    "AttentionCheck",
    "AttentionModality",
    "AttentionOutcome",
    "ComparisonTask",
    "Condition",
    "ConditionKind",
    "DomainValidationError",
    "Estimate",
    "INTRO_TEXT",
    "JUICE_OPTIONS",
    "JUICE_PROMPT",
    "MAX_SESSION_PAGES",
    "PairwiseStat",
    "QUESTION_TEXT",
    "RESPONSE_LABELS",
    "RESPONSE_ORDER",
    "RatingReport",
    "Response",
    "Segment",
    "SessionState",
    "SessionStatus",
    "Side",
    "Stimulus",
    "StudyKind",
    "StudyPlan",
    "StudyRegistry",
    "VoteRecord",
    "attention_window",
    "blinded_page_payload",
    "canonical_json",
    "iter_log_lines",
    "parse_attention_outcomes",
    "parse_votes",
    "resolve_votes",
    "serialize_log_entries",
    "serialize_votes",
]
