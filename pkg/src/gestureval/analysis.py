"""Single analysis path shared by the CLI and the HTTP service.

Both consumers feed a study plan, the raw vote-log text, and optional
session states into the same functions here, so a leaderboard computed
offline is byte-identical to one served over HTTP.
"""

from __future__ import annotations

from typing import Mapping, Optional

from .alignment import score_votes
from .domain import (
    ComparisonTask,
    RatingReport,
    SessionState,
    StudyPlan,
    parse_votes,
)
from .juice import JuiceProfile, aggregate_juice
from .rating import EloConfig, rank_votes
from .study import analysis_votes


def build_task_index(
    plan: StudyPlan, sessions: Optional[Mapping[str, SessionState]] = None
) -> dict[str, ComparisonTask]:
    """Plan tasks plus every per-session materialized page."""
    index = plan.task_index()
    if sessions:
        for session in sessions.values():
            for page in session.pages:
                index[page.id] = page
    return index


def leaderboard_report(
    plan: StudyPlan,
    votes_text: str,
    sessions: Optional[Mapping[str, SessionState]] = None,
    seed: Optional[int] = None,
    n_bootstrap: Optional[int] = None,
    alpha: float = 0.05,
    resample_unit: str = "battle",
) -> RatingReport:
    """Elo leaderboard over the analysis votes of a realism study."""
    tasks = build_task_index(plan, sessions)
    votes = analysis_votes(parse_votes(votes_text), tasks, sessions)
    cfg = EloConfig(
        n_bootstrap=plan.n_bootstrap if n_bootstrap is None else n_bootstrap,
        rng_seed=plan.rng_seed if seed is None else seed,
    )
    return rank_votes(votes, tasks, cfg, alpha=alpha, resample_unit=resample_unit)


def appropriateness_report(
    plan: StudyPlan,
    votes_text: str,
    sessions: Optional[Mapping[str, SessionState]] = None,
    seed: Optional[int] = None,
    n_bootstrap: Optional[int] = None,
    alpha: float = 0.05,
) -> RatingReport:
    """Appropriateness scores over the analysis votes of an alignment study."""
    tasks = build_task_index(plan, sessions)
    votes = analysis_votes(parse_votes(votes_text), tasks, sessions)
    return score_votes(
        votes,
        tasks,
        n_bootstrap=plan.n_bootstrap if n_bootstrap is None else n_bootstrap,
        seed=plan.rng_seed if seed is None else seed,
        alpha=alpha,
    )


def juice_profile(
    plan: StudyPlan,
    votes_text: str,
    focus_condition: str,
    sessions: Optional[Mapping[str, SessionState]] = None,
    opponent_filter: Optional[str] = None,
    normalization: str = "comparisons",
) -> JuiceProfile:
    tasks = build_task_index(plan, sessions)
    votes = analysis_votes(parse_votes(votes_text), tasks, sessions)
    return aggregate_juice(
        votes,
        tasks,
        focus_condition,
        opponent_filter=opponent_filter,
        normalization=normalization,
    )


__all__ = [
    "appropriateness_report",
    "build_task_index",
    "juice_profile",
    "leaderboard_report",
]
