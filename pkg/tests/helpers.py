"""Builders for small, fully explicit study fixtures."""

from __future__ import annotations

from typing import Optional

from gestureval.domain import (
    ComparisonTask,
    Condition,
    ConditionKind,
    Response,
    Segment,
    Stimulus,
    StudyKind,
    StudyRegistry,
    VoteRecord,
)


def make_segment(seg_id: str = "seg-1", speaker: str = "spk-a", start: float = 0.0) -> Segment:
    return Segment(
        id=seg_id,
        speaker_id=speaker,
        start_s=start,
        end_s=start + 9.0,
        transcript="So that is how the project came together in the end.",
    )


def make_condition(cond_id: str, kind: ConditionKind = ConditionKind.GENERATIVE) -> Condition:
    return Condition(id=cond_id, display_name=cond_id.upper(), kind=kind)


def realism_task(
    task_id: str = "t-1",
    left: str = "cond-a",
    right: str = "cond-b",
    seg_id: str = "seg-1",
) -> ComparisonTask:
    def stim(cond: str, side: str) -> Stimulus:
        return Stimulus(
            id=f"{task_id}-{side}",
            condition_id=cond,
            segment_id=seg_id,
            seed_index=0,
            video_uri=f"video://{task_id}-{side}.mp4",
            audio_segment_id=seg_id,
            muted=True,
        )

    return ComparisonTask(
        id=task_id,
        study_kind=StudyKind.REALISM,
        left=stim(left, "l"),
        right=stim(right, "r"),
    )


def alignment_task(
    task_id: str = "t-1",
    cond: str = "cond-a",
    seg_id: str = "seg-1",
    mismatch_seg: str = "seg-2",
    matched_left: bool = True,
) -> ComparisonTask:
    def stim(side: str, matched: bool) -> Stimulus:
        return Stimulus(
            id=f"{task_id}-{side}",
            condition_id=cond,
            segment_id=seg_id,
            seed_index=0,
            video_uri=f"video://{task_id}-{side}.mp4",
            audio_segment_id=seg_id if matched else mismatch_seg,
            muted=False,
        )

    return ComparisonTask(
        id=task_id,
        study_kind=StudyKind.ALIGNMENT,
        left=stim("l", matched_left),
        right=stim("r", not matched_left),
    )


def make_registry(
    condition_ids: list[str],
    n_segments: int = 4,
    speakers: tuple[str, ...] = ("spk-a",),
    mocap_id: Optional[str] = None,
) -> StudyRegistry:
    """Registry with empty stimuli; plan builders fill those in when asked."""
    conditions = [
        make_condition(
            c, ConditionKind.MOCAP if c == mocap_id else ConditionKind.GENERATIVE
        )
        for c in condition_ids
    ]
    segments = []
    for i in range(n_segments):
        speaker = speakers[i % len(speakers)]
        segments.append(
            make_segment(f"seg-{i:03d}", speaker=speaker, start=20.0 * i)
        )
    return StudyRegistry.build(conditions=conditions, segments=segments)


_REALISM_JUICE = "smoothness"
_ALIGNMENT_JUICE = "rhythm_timing"


def make_vote(
    task: ComparisonTask,
    response: Optional[Response],
    session: str = "sess-1",
    page: int = 1,
    skipped: bool = False,
    juice: Optional[frozenset[str]] = None,
) -> VoteRecord:
    if juice is None:
        if skipped or response is None or response.is_tie:
            juice = frozenset()
        elif task.study_kind is StudyKind.REALISM:
            juice = frozenset({_REALISM_JUICE})
        else:
            juice = frozenset({_ALIGNMENT_JUICE})
    return VoteRecord(
        session_id=session,
        page_index=page,
        task_id=task.id,
        response=response,
        juice_options=juice,
        skipped=skipped,
    )
