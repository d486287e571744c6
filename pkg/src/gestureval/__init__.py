"""Standardized human evaluation for speech-driven gesture generation.

Pairwise preference studies with Bradley-Terry Elo leaderboards,
audio-mismatch appropriateness scoring, justification analytics,
session scheduling with attention checks, automatic motion metrics,
and an HTTP evaluation service.
"""

from .alignment import bootstrap_scores, match_outcome, score_condition, score_votes
from .analysis import (
    appropriateness_report,
    build_task_index,
    juice_profile,
    leaderboard_report,
)
from .domain import (
    ArtifactFlag,
    AttentionCheck,
    AttentionModality,
    AttentionOutcome,
    ComparisonTask,
    Condition,
    ConditionKind,
    DomainValidationError,
    Estimate,
    PairwiseStat,
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
    blinded_page_payload,
    canonical_json,
    parse_votes,
    serialize_votes,
)
from .juice import JuiceProfile, aggregate_juice, profile_rows
from .metrics import (
    GaussianSummary,
    MotionSequence,
    SemanticSpan,
    beat_alignment,
    detect_motion_beats,
    div_pose,
    div_sample,
    fd_geometric,
    fd_kinetic,
    fgd,
    frechet_distance,
    kendall_tau,
    srgr,
)
from .rating import (
    Battle,
    BattleOutcome,
    EloConfig,
    bootstrap_ratings,
    expand_votes,
    fit_bradley_terry,
    predict_win_prob,
    rank_battles,
    rank_votes,
)
from .simulate import (
    PlantedTruth,
    build_synthetic_alignment_plan,
    build_synthetic_realism_plan,
    build_synthetic_registry,
    simulate_alignment_votes,
    simulate_realism_votes,
)
from .stats import (
    ComputationError,
    NonIdentifiableError,
    UndefinedScoreError,
    benjamini_hochberg,
)
from .study import (
    AdaptiveState,
    SegmentPolicy,
    StudyScheduler,
    analysis_votes,
    build_alignment_plan,
    build_realism_plan,
    build_mismatch_assignment,
    schedule_session,
    select_segments,
    update_adaptive_state,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveState",
    "ArtifactFlag",
    "AttentionCheck",
    "AttentionModality",
    "AttentionOutcome",
    "Battle",
    "BattleOutcome",
    "ComparisonTask",
    "ComputationError",
    "Condition",
    "ConditionKind",
    "DomainValidationError",
    "EloConfig",
    "Estimate",
    "GaussianSummary",
    "JuiceProfile",
    "MotionSequence",
    "NonIdentifiableError",
    "PairwiseStat",
    "PlantedTruth",
    "RatingReport",
    "Response",
    "Segment",
    "SegmentPolicy",
    "SemanticSpan",
    "SessionState",
    "SessionStatus",
    "Side",
    "Stimulus",
    "StudyKind",
    "StudyPlan",
    "StudyRegistry",
    "StudyScheduler",
    "UndefinedScoreError",
    "VoteRecord",
    "aggregate_juice",
    "analysis_votes",
    "appropriateness_report",
    "beat_alignment",
    "benjamini_hochberg",
    "blinded_page_payload",
    "bootstrap_ratings",
    "bootstrap_scores",
    "build_alignment_plan",
    "build_mismatch_assignment",
    "build_realism_plan",
    "build_synthetic_alignment_plan",
    "build_synthetic_realism_plan",
    "build_synthetic_registry",
    "build_task_index",
    "canonical_json",
    "detect_motion_beats",
    "div_pose",
    "div_sample",
    "expand_votes",
    "fd_geometric",
    "fd_kinetic",
    "fgd",
    "fit_bradley_terry",
    "frechet_distance",
    "juice_profile",
    "kendall_tau",
    "leaderboard_report",
    "match_outcome",
    "parse_votes",
    "predict_win_prob",
    "profile_rows",
    "rank_battles",
    "rank_votes",
    "schedule_session",
    "score_condition",
    "score_votes",
    "select_segments",
    "serialize_votes",
    "simulate_alignment_votes",
    "simulate_realism_votes",
    "srgr",
    "update_adaptive_state",
    "__version__",
]
