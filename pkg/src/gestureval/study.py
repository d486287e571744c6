"""Study construction and session scheduling.

Covers the full path from candidate segments to served pages: artifact
and duration filtering with per-speaker quotas, per-speaker derangements
for mismatched audio, balanced realism and alignment task pools, session
scheduling with embedded attention checks, response recording with skip
and grading policy, and adaptive early stopping of settled pairs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .domain import (
    ArtifactFlag,
    AttentionCheck,
    AttentionModality,
    ComparisonTask,
    DomainValidationError,
    MAX_SESSION_PAGES,
    RESPONSE_LABELS,
    RESPONSE_ORDER,
    RatingReport,
    Response,
    Segment,
    SessionState,
    SessionStatus,
    Side,
    Stimulus,
    StudyKind,
    StudyPlan,
    StudyRegistry,
    VoteRecord,
    AttentionOutcome,
    attention_window,
)
from .stats import ComputationError, percentile_ci


class SchedulingError(ComputationError):
    """Session or pool state refuses the requested operation."""


class QuotaShortfallError(SchedulingError):
    """Eligible segments cannot satisfy a speaker's quota."""

    def __init__(self, shortfalls: dict[str, tuple[int, int]]):
        self.shortfalls = shortfalls
        detail = "; ".join(
            f"{speaker}: wanted {want}, found {got}"
            for speaker, (want, got) in sorted(shortfalls.items())
        )
        super().__init__(f"segment quota unsatisfiable: {detail}")


class PoolExhaustedError(SchedulingError):
    pass


class RepeatTakerError(SchedulingError):
    pass


class SessionClosedError(SchedulingError):
    pass


class AlreadyAnsweredError(SchedulingError):
    pass


# ---------------------------------------------------------------------------
# Segment selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentPolicy:
    min_duration_s: float = 7.0
    max_duration_s: float = 12.0
    default_quota: int = 4
    quota_overrides: Mapping[str, int] = field(default_factory=dict)
    require_complete_sentences: bool = True

    def __post_init__(self):
        if not self.min_duration_s < self.max_duration_s:
            raise DomainValidationError("policy.max_duration_s", "must exceed min_duration_s")
        if self.default_quota < 1 or any(q < 1 for q in self.quota_overrides.values()):
            raise DomainValidationError("policy.quota", "quotas must be >= 1")

    def quota_for(self, speaker_id: str) -> int:
        return self.quota_overrides.get(speaker_id, self.default_quota)


def segment_disqualifiers(segment: Segment, policy: SegmentPolicy) -> list[str]:
    """Why a candidate is ineligible; empty list means eligible.

    Flicking always disqualifies.  Mesh penetration disqualifies unless the
    segment also carries an acceptable-penetration flag (cloth or tissue
    giving way, or finger-tracking clipping).
    """
    reasons = []
    flags = segment.artifact_flags
    if ArtifactFlag.FLICKING in flags:
        reasons.append("flicking artifact")
    if ArtifactFlag.MESH_PENETRATION in flags and not (
        ArtifactFlag.ACCEPTABLE_PENETRATION_A in flags
        or ArtifactFlag.ACCEPTABLE_PENETRATION_B in flags
    ):
        reasons.append("mesh penetration")
    if not (policy.min_duration_s <= segment.duration_s <= policy.max_duration_s):
        reasons.append(
            f"duration {segment.duration_s:.2f}s outside "
            f"[{policy.min_duration_s}, {policy.max_duration_s}]"
        )
    if policy.require_complete_sentences and not segment.sentence_complete:
        reasons.append("incomplete sentence")
    return reasons


def select_segments(
    candidates: Sequence[Segment],
    policy: SegmentPolicy = SegmentPolicy(),
    seed: int = 0,
) -> list[Segment]:
    """Per-speaker quota sample of eligible, pairwise-disjoint segments.

    Deterministic under ``seed``.  Raises :class:`QuotaShortfallError`
    listing every speaker whose quota cannot be met, rather than silently
    returning fewer segments.
    """
    rng = np.random.default_rng(seed)
    speakers = sorted({seg.speaker_id for seg in candidates} | set(policy.quota_overrides))
    eligible: dict[str, list[Segment]] = {sp: [] for sp in speakers}
    for seg in candidates:
        if not segment_disqualifiers(seg, policy):
            eligible[seg.speaker_id].append(seg)
    selected: list[Segment] = []
    shortfalls: dict[str, tuple[int, int]] = {}
    for speaker in speakers:
        pool = sorted(eligible[speaker], key=lambda s: s.id)
        order = rng.permutation(len(pool))
        quota = policy.quota_for(speaker)
        chosen: list[Segment] = []
        for idx in order:
            seg = pool[idx]
            if any(seg.overlaps(prev) for prev in chosen):
                continue
            chosen.append(seg)
            if len(chosen) == quota:
                break
        if len(chosen) < quota:
            shortfalls[speaker] = (quota, len(chosen))
        selected.extend(sorted(chosen, key=lambda s: s.start_s))
    if shortfalls:
        raise QuotaShortfallError(shortfalls)
    return selected


# ---------------------------------------------------------------------------
# Mismatch assignment
# ---------------------------------------------------------------------------

def build_mismatch_assignment(
    segments: Iterable[Segment], seed: int = 0
) -> dict[str, str]:
    """Uniform-random per-speaker derangement: segment id -> mismatched audio id.

    Every segment serves exactly once as a mismatched audio source and
    never accompanies its own motion.  Uniformity comes from rejection
    sampling of permutations, which is exact.
    """
    rng = np.random.default_rng(seed)
    by_speaker: dict[str, list[str]] = {}
    for seg in segments:
        by_speaker.setdefault(seg.speaker_id, []).append(seg.id)
    assignment: dict[str, str] = {}
    for speaker in sorted(by_speaker):
        ids = sorted(by_speaker[speaker])
        if len(ids) < 2:
            raise DomainValidationError(
                f"segments[{speaker}]",
                "a speaker needs >= 2 segments to mismatch audio (no derangement exists)",
            )
        while True:
            perm = rng.permutation(len(ids))
            if not np.any(perm == np.arange(len(ids))):
                break
        for i, j in enumerate(perm):
            assignment[ids[i]] = ids[j]
    return assignment


def verify_mismatch_assignment(assignment: Mapping[str, str], segments: Sequence[Segment]) -> None:
    speaker_of = {s.id: s.speaker_id for s in segments}
    sources: dict[str, int] = {}
    for motion, audio in assignment.items():
        if motion == audio:
            raise DomainValidationError(
                f"assignment[{motion}]", "segment mapped to its own audio"
            )
        if speaker_of.get(motion) != speaker_of.get(audio):
            raise DomainValidationError(
                f"assignment[{motion}]", "mismatched audio must keep the same speaker"
            )
        sources[audio] = sources.get(audio, 0) + 1
    bad = [a for a, c in sources.items() if c != 1]
    if bad or set(sources) != set(assignment):
        raise DomainValidationError(
            "assignment", "each segment must appear exactly once as a mismatch source"
        )


# ---------------------------------------------------------------------------
# Task generation
# ---------------------------------------------------------------------------

def _pick_stimulus(
    registry: StudyRegistry,
    condition_id: str,
    segment_id: str,
    muted: bool,
    rng: np.random.Generator,
    audio_segment_id: Optional[str] = None,
    seed_index: Optional[int] = None,
) -> Stimulus:
    want_audio = audio_segment_id if audio_segment_id is not None else segment_id
    matches = sorted(
        (
            st
            for st in registry.stimuli.values()
            if st.condition_id == condition_id
            and st.segment_id == segment_id
            and st.muted == muted
            and st.audio_segment_id == want_audio
            and (seed_index is None or st.seed_index == seed_index)
        ),
        key=lambda st: st.seed_index,
    )
    if not matches:
        kind = "muted" if muted else f"audio={want_audio!r}"
        raise DomainValidationError(
            f"stimuli[{condition_id}/{segment_id}]",
            f"no stimulus with {kind} for segment {segment_id!r}",
        )
    if len(matches) == 1:
        return matches[0]
    return matches[int(rng.integers(0, len(matches)))]


def generate_realism_tasks(
    registry: StudyRegistry,
    segments: Sequence[Segment],
    stopped_pairs: Iterable[tuple[str, str]] = (),
    seed: int = 0,
    tasks_per_pair: Optional[int] = None,
) -> list[ComparisonTask]:
    """Muted same-segment tasks over every active condition pair.

    By default each active pair meets every segment once, which keeps
    segment usage exactly balanced.  With ``tasks_per_pair`` set, segments
    are drawn least-used-first so pool-wide usage stays within +/-1.
    """
    rng = np.random.default_rng([seed, 1])
    conditions = sorted(registry.conditions)
    if len(conditions) < 2:
        raise DomainValidationError("conditions", "realism tasks need >= 2 conditions")
    stopped = {tuple(sorted(p)) for p in stopped_pairs}
    pairs = [
        (a, b)
        for i, a in enumerate(conditions)
        for b in conditions[i + 1 :]
        if (a, b) not in stopped
    ]
    usage = {seg.id: 0 for seg in segments}
    tasks: list[ComparisonTask] = []
    counter = 0
    for a, b in pairs:
        if tasks_per_pair is None:
            chosen = list(segments)
        else:
            ranked = sorted(
                segments, key=lambda s: (usage[s.id], rng.random(), s.id)
            )
            chosen = ranked[:tasks_per_pair]
        for seg in chosen:
            usage[seg.id] += 1
            sa = _pick_stimulus(registry, a, seg.id, muted=True, rng=rng)
            sb = _pick_stimulus(registry, b, seg.id, muted=True, rng=rng)
            left, right = (sa, sb) if rng.random() < 0.5 else (sb, sa)
            counter += 1
            tasks.append(
                ComparisonTask(
                    id=f"r{counter:05d}",
                    study_kind=StudyKind.REALISM,
                    left=left,
                    right=right,
                )
            )
    return tasks


def generate_alignment_tasks(
    registry: StudyRegistry,
    condition_id: str,
    segments: Sequence[Segment],
    assignment: Mapping[str, str],
    seed: int = 0,
    id_prefix: str = "a",
) -> list[ComparisonTask]:
    """Matched-vs-mismatched audio tasks over one condition's motion."""
    rng = np.random.default_rng([seed, 2, _stable_hash(condition_id)])
    verify_mismatch_assignment(assignment, segments)
    tasks: list[ComparisonTask] = []
    for counter, seg in enumerate(segments, start=1):
        if seg.id not in assignment:
            raise DomainValidationError(
                f"assignment[{seg.id}]", "segment missing from the mismatch assignment"
            )
        matched = _pick_stimulus(registry, condition_id, seg.id, muted=False, rng=rng)
        mismatched = _pick_stimulus(
            registry,
            condition_id,
            seg.id,
            muted=False,
            rng=rng,
            audio_segment_id=assignment[seg.id],
            seed_index=matched.seed_index,
        )
        left, right = (matched, mismatched) if rng.random() < 0.5 else (mismatched, matched)
        tasks.append(
            ComparisonTask(
                id=f"{id_prefix}{counter:05d}",
                study_kind=StudyKind.ALIGNMENT,
                left=left,
                right=right,
            )
        )
    return tasks


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big")


def _opaque_uri(*parts: object) -> str:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).hexdigest()
    return f"video://{digest[:16]}.mp4"


def synthesize_stimuli(
    registry: StudyRegistry,
    study_kind: StudyKind,
    assignment: Optional[Mapping[str, str]] = None,
) -> None:
    """Create stimulus records for every combination a plan will need.

    Video URIs are opaque content hashes, so nothing about conditions or
    matching leaks through locators.  Intended for simulation and for
    registries that track renders elsewhere.
    """
    for cond in sorted(registry.conditions):
        condition = registry.conditions[cond]
        for seg_id in sorted(registry.segments):
            for seed_index in range(condition.seeds_available):
                wanted: list[tuple[str, bool]] = []
                if study_kind is StudyKind.REALISM:
                    wanted.append((seg_id, True))
                else:
                    wanted.append((seg_id, False))
                    if assignment and seg_id in assignment:
                        wanted.append((assignment[seg_id], False))
                for audio_id, muted in wanted:
                    if registry.find_stimulus(cond, seg_id, muted, audio_id, seed_index):
                        continue
                    registry.add_stimulus(
                        Stimulus(
                            id=f"st-{_opaque_uri(cond, seg_id, seed_index, audio_id, muted)[8:24]}",
                            condition_id=cond,
                            segment_id=seg_id,
                            seed_index=seed_index,
                            video_uri=_opaque_uri(cond, seg_id, seed_index, audio_id, muted),
                            audio_segment_id=audio_id,
                            muted=muted,
                        )
                    )
    registry.validate()


def build_realism_plan(
    registry: StudyRegistry,
    seed: int = 0,
    n_bootstrap: int = 1000,
    tasks_per_pair: Optional[int] = None,
    synthesize: bool = False,
    study_id: Optional[str] = None,
) -> StudyPlan:
    if synthesize:
        synthesize_stimuli(registry, StudyKind.REALISM)
    segments = [registry.segments[k] for k in sorted(registry.segments)]
    tasks = generate_realism_tasks(
        registry, segments, seed=seed, tasks_per_pair=tasks_per_pair
    )
    return StudyPlan(
        study_kind=StudyKind.REALISM,
        registry=registry,
        tasks=tuple(tasks),
        rng_seed=seed,
        n_bootstrap=n_bootstrap,
        study_id=study_id,
    )


def build_alignment_plan(
    registry: StudyRegistry,
    seed: int = 0,
    n_bootstrap: int = 1000,
    conditions: Optional[Sequence[str]] = None,
    synthesize: bool = False,
    study_id: Optional[str] = None,
) -> StudyPlan:
    segments = [registry.segments[k] for k in sorted(registry.segments)]
    assignment = build_mismatch_assignment(segments, seed=seed)
    if synthesize:
        synthesize_stimuli(registry, StudyKind.ALIGNMENT, assignment)
    chosen = sorted(conditions) if conditions is not None else sorted(registry.conditions)
    tasks: list[ComparisonTask] = []
    for i, cond in enumerate(chosen):
        tasks.extend(
            generate_alignment_tasks(
                registry, cond, segments, assignment, seed=seed, id_prefix=f"a{i:02d}-"
            )
        )
    return StudyPlan(
        study_kind=StudyKind.ALIGNMENT,
        registry=registry,
        tasks=tuple(tasks),
        rng_seed=seed,
        n_bootstrap=n_bootstrap,
        mismatch_assignment=dict(assignment),
        study_id=study_id,
    )


# ---------------------------------------------------------------------------
# Session scheduling
# ---------------------------------------------------------------------------

N_ATTENTION_CHECKS = 4
MAX_SKIPS = 3


def attention_positions(n_pages: int, n_checks: int = N_ATTENTION_CHECKS) -> tuple[int, ...]:
    """Evenly spaced check pages across the 20%-80% progress window."""
    lo, hi = attention_window(n_pages)
    if n_checks == 1:
        return (lo,)
    raw = [lo + round(i * (hi - lo) / (n_checks - 1)) for i in range(n_checks)]
    positions = tuple(dict.fromkeys(raw))
    if len(positions) < n_checks:
        raise SchedulingError(
            f"cannot place {n_checks} distinct attention checks in pages {lo}..{hi}"
        )
    return positions


def _attention_modalities(
    study_kind: StudyKind, n_checks: int, rng: np.random.Generator
) -> list[AttentionModality]:
    if study_kind is StudyKind.REALISM:
        return [AttentionModality.VISUAL_TEXT] * n_checks
    half = n_checks // 2
    modalities = [AttentionModality.VISUAL_TEXT] * (n_checks - half) + [
        AttentionModality.AUDIO_VOICE
    ] * half
    order = rng.permutation(n_checks)
    return [modalities[i] for i in order]


def _with_sides_randomized(task: ComparisonTask, new_id: str, rng: np.random.Generator) -> ComparisonTask:
    swap = bool(rng.integers(0, 2))
    left, right = (task.right, task.left) if swap else (task.left, task.right)
    return ComparisonTask(
        id=new_id,
        study_kind=task.study_kind,
        left=left,
        right=right,
        attention_check=task.attention_check,
    )


def schedule_session(
    pool: Sequence[ComparisonTask],
    taker_id: str,
    study_kind: StudyKind,
    seed: int = 0,
    session_index: int = 0,
    session_id: Optional[str] = None,
    n_pages: int = MAX_SESSION_PAGES,
) -> SessionState:
    """Materialize one taker's session from the task pool.

    Draws ``n_pages`` distinct pool tasks (no within-session repetition),
    re-randomizes left/right per presentation, and converts the tasks at
    the evenly spaced window positions into attention-check pages
    (realism: all text overlays; alignment: half text, half replaced
    audio voice).  Page ids are scoped to the session.
    """
    if not (5 <= n_pages <= MAX_SESSION_PAGES):
        raise DomainValidationError("n_pages", f"must be in 5..{MAX_SESSION_PAGES}")
    if len(pool) < n_pages:
        raise PoolExhaustedError(
            f"pool has {len(pool)} tasks, session needs {n_pages} distinct"
        )
    rng = np.random.default_rng([seed, 3, session_index])
    sid = session_id if session_id is not None else f"s{session_index:05d}"
    positions = attention_positions(n_pages)
    modalities = _attention_modalities(study_kind, len(positions), rng)
    picks = rng.choice(len(pool), size=n_pages, replace=False)
    pages: list[ComparisonTask] = []
    check_iter = iter(zip(positions, modalities))
    next_check = next(check_iter, None)
    for page_index in range(1, n_pages + 1):
        source = pool[int(picks[page_index - 1])]
        page = _with_sides_randomized(source, f"{sid}:{page_index}", rng)
        if next_check is not None and page_index == next_check[0]:
            target = int(rng.integers(1, 6))
            label = RESPONSE_LABELS[RESPONSE_ORDER[target - 1]]
            page = ComparisonTask(
                id=page.id,
                study_kind=page.study_kind,
                left=page.left,
                right=page.right,
                attention_check=AttentionCheck(
                    target_option=target,
                    modality=next_check[1],
                    side=Side.LEFT if rng.integers(0, 2) == 0 else Side.RIGHT,
                    overlay_text=f"[Attention check] Please choose '{label}'.",
                ),
            )
            next_check = next(check_iter, None)
        pages.append(page)
    return SessionState(
        session_id=sid,
        taker_id=taker_id,
        study_kind=study_kind,
        pages=tuple(pages),
        attention_positions=positions,
    )


def record_response(
    session: SessionState,
    page_index: int,
    response: Optional[Response] = None,
    juice_options: Iterable[str] = (),
    juice_other_text: Optional[str] = None,
    timestamp: float = 0.0,
    skip: bool = False,
) -> tuple[SessionState, Optional[Union[VoteRecord, AttentionOutcome]]]:
    """Apply one page response (or skip) and emit the log record.

    Skips beyond the third terminate the session and flag manual review.
    Attention pages are graded, never producing analysis votes: one
    failure excludes the session from analysis (pages keep being served),
    a second failure rejects it outright.
    """
    if not session.is_open:
        raise SessionClosedError(f"session {session.session_id} is {session.status.value}")
    task = session.page(page_index)
    if page_index in session.answered_pages:
        raise AlreadyAnsweredError(
            f"page {page_index} of session {session.session_id} already answered"
        )
    answered = session.answered_pages | {page_index}
    all_done = len(answered) == session.n_pages

    if skip:
        if response is not None:
            raise DomainValidationError("response", "a skip carries no response")
        skips = session.skips_used + 1
        if skips > MAX_SKIPS:
            new_session = replace(
                session,
                skips_used=skips,
                answered_pages=answered,
                status=SessionStatus.TERMINATED,
                needs_review=True,
            )
        else:
            status = session.status
            if all_done and status is SessionStatus.ACTIVE:
                status = SessionStatus.COMPLETED
            new_session = replace(
                session, skips_used=skips, answered_pages=answered, status=status
            )
        record = VoteRecord(
            session_id=session.session_id,
            page_index=page_index,
            task_id=task.id,
            response=None,
            timestamp=timestamp,
            skipped=True,
        )
        return new_session, record

    if response is None:
        raise DomainValidationError("response", "required unless skipping")

    if task.is_attention_check:
        check = task.attention_check
        assert check is not None
        passed = response is check.target_response
        failed = session.failed_checks + (0 if passed else 1)
        status = session.status
        if failed >= 2:
            status = SessionStatus.REJECTED
        elif failed == 1 and status in (SessionStatus.ACTIVE, SessionStatus.COMPLETED):
            status = SessionStatus.EXCLUDED
        if all_done and status is SessionStatus.ACTIVE:
            status = SessionStatus.COMPLETED
        new_session = replace(
            session,
            answered_pages=answered,
            failed_checks=failed,
            status=status,
        )
        outcome = AttentionOutcome(
            session_id=session.session_id,
            page_index=page_index,
            task_id=task.id,
            response=response,
            passed=passed,
            timestamp=timestamp,
        )
        return new_session, outcome

    record = VoteRecord(
        session_id=session.session_id,
        page_index=page_index,
        task_id=task.id,
        response=response,
        juice_options=frozenset(juice_options),
        juice_other_text=juice_other_text,
        timestamp=timestamp,
    )
    status = session.status
    if all_done and status is SessionStatus.ACTIVE:
        status = SessionStatus.COMPLETED
    new_session = replace(session, answered_pages=answered, status=status)
    return new_session, record


# ---------------------------------------------------------------------------
# Adaptive early stopping
# ---------------------------------------------------------------------------

STOP_MARGIN_ELO = 100.0
STOP_MIN_PAIR_WEIGHT = 150.0


@dataclass(frozen=True)
class AdaptiveState:
    """Per-pair progress and the set of pairs that stopped receiving tasks."""

    pair_weights: Mapping[tuple[str, str], float] = field(default_factory=dict)
    pair_shares: Mapping[tuple[str, str], float] = field(default_factory=dict)
    stopped_pairs: frozenset[tuple[str, str]] = frozenset()


def update_adaptive_state(
    state: AdaptiveState,
    report: RatingReport,
    margin: float = STOP_MARGIN_ELO,
    min_pair_weight: float = STOP_MIN_PAIR_WEIGHT,
) -> AdaptiveState:
    """Stop pairs whose 95% rating-difference interval clears zero by
    ``margin`` Elo points with at least ``min_pair_weight`` expanded battle
    weight between them.  Stopping is monotone: stopped pairs stay stopped
    and weights never decrease.
    """
    if report.replicates is None or not report.conditions:
        raise ComputationError("report lacks replicate matrix; refit with bootstrap")
    weights = dict(report.pair_weights or {})
    col = {c: i for i, c in enumerate(report.conditions)}
    new_weights = dict(state.pair_weights)
    new_shares = dict(state.pair_shares)
    stopped = set(state.stopped_pairs)
    names = sorted(report.conditions)
    from .rating import predict_win_prob

    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            key = (a, b)
            weight = max(weights.get(key, 0.0), state.pair_weights.get(key, 0.0))
            new_weights[key] = weight
            est_a, est_b = report.estimates.get(a), report.estimates.get(b)
            if est_a and est_b:
                new_shares[key] = predict_win_prob(est_a.point, est_b.point)
            if key in stopped:
                continue
            diffs = report.replicates[:, col[a]] - report.replicates[:, col[b]]
            lo, hi = percentile_ci(diffs)
            if weight >= min_pair_weight and (lo >= margin or hi <= -margin):
                stopped.add(key)
    return AdaptiveState(
        pair_weights=new_weights,
        pair_shares=new_shares,
        stopped_pairs=frozenset(stopped),
    )


# ---------------------------------------------------------------------------
# Study-level scheduling and analysis filtering
# ---------------------------------------------------------------------------

class StudyScheduler:
    """Single-writer session manager over one study plan."""

    def __init__(self, plan: StudyPlan, seed: Optional[int] = None, n_pages: int = MAX_SESSION_PAGES):
        self.plan = plan
        self.seed = plan.rng_seed if seed is None else seed
        self.n_pages = n_pages
        self.sessions: dict[str, SessionState] = {}
        self._takers: set[str] = set()
        self._counter = 0

    def restore(self, sessions: Iterable[SessionState]) -> None:
        for s in sessions:
            self.sessions[s.session_id] = s
            self._takers.add(s.taker_id)
            self._counter = max(self._counter, _session_ordinal(s.session_id) + 1)

    def new_session(self, taker_id: str) -> SessionState:
        if taker_id in self._takers:
            raise RepeatTakerError(f"taker {taker_id!r} already participated in this study")
        session = schedule_session(
            self.plan.tasks,
            taker_id,
            self.plan.study_kind,
            seed=self.seed,
            session_index=self._counter,
            n_pages=self.n_pages,
        )
        self._counter += 1
        self._takers.add(taker_id)
        self.sessions[session.session_id] = session
        return session

    def record(
        self,
        session_id: str,
        page_index: int,
        response: Optional[Response] = None,
        juice_options: Iterable[str] = (),
        juice_other_text: Optional[str] = None,
        timestamp: float = 0.0,
        skip: bool = False,
    ) -> tuple[SessionState, Optional[Union[VoteRecord, AttentionOutcome]]]:
        session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        updated, record = record_response(
            session,
            page_index,
            response=response,
            juice_options=juice_options,
            juice_other_text=juice_other_text,
            timestamp=timestamp,
            skip=skip,
        )
        self.sessions[session_id] = updated
        return updated, record

    def task_index(self) -> dict[str, ComparisonTask]:
        index = self.plan.task_index()
        for session in self.sessions.values():
            for page in session.pages:
                index[page.id] = page
        return index


def _session_ordinal(session_id: str) -> int:
    if session_id.startswith("s") and session_id[1:].isdigit():
        return int(session_id[1:])
    return 0


EXCLUDED_STATUSES = frozenset(
    {SessionStatus.EXCLUDED, SessionStatus.REJECTED, SessionStatus.TERMINATED}
)


def analysis_votes(
    votes: Sequence[VoteRecord],
    tasks: Mapping[str, ComparisonTask],
    sessions: Optional[Mapping[str, SessionState]] = None,
) -> list[VoteRecord]:
    """Votes that enter statistics.

    Drops skips, responses on attention-check pages, and every vote from a
    session excluded, rejected, or terminated.  Votes from unknown sessions
    (bulk-ingested logs) pass through.
    """
    out = []
    for v in votes:
        if v.skipped:
            continue
        task = tasks.get(v.task_id)
        if task is None:
            raise DomainValidationError(
                f"vote[{v.session_id}/{v.page_index}].task_id",
                f"unknown task {v.task_id!r}",
            )
        if task.is_attention_check:
            continue
        if sessions is not None:
            session = sessions.get(v.session_id)
            if session is not None and session.status in EXCLUDED_STATUSES:
                continue
        out.append(v)
    return out


__all__ = [
    "AdaptiveState",
    "AlreadyAnsweredError",
    "EXCLUDED_STATUSES",
    "MAX_SKIPS",
    "N_ATTENTION_CHECKS",
    "PoolExhaustedError",
    "QuotaShortfallError",
    "RepeatTakerError",
    "SchedulingError",
    "SegmentPolicy",
    "SessionClosedError",
    "STOP_MARGIN_ELO",
    "STOP_MIN_PAIR_WEIGHT",
    "StudyScheduler",
    "analysis_votes",
    "attention_positions",
    "build_alignment_plan",
    "build_mismatch_assignment",
    "build_realism_plan",
    "generate_alignment_tasks",
    "generate_realism_tasks",
    "record_response",
    "schedule_session",
    "segment_disqualifiers",
    "select_segments",
    "synthesize_stimuli",
    "update_adaptive_state",
    "verify_mismatch_assignment",
]
