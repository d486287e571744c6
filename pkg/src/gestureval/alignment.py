"""Appropriateness scoring for audio-mismatching studies.

Each alignment vote compares the same motion under matched vs mismatched
speech.  A condition's appropriateness score is the weighted fraction of
preference mass awarded to the matched side: clear preferences weigh 2,
slight 1, and a tie contributes half a point of matched mass over weight
1, so 0.5 is chance level.  Uncertainty comes from resampling test takers
with replacement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import (
    ComparisonTask,
    Estimate,
    RatingReport,
    StudyKind,
    VoteRecord,
)
from .rating import CLEAR_WEIGHT, SLIGHT_WEIGHT
from .stats import (
    ComputationError,
    UndefinedScoreError,
    pairwise_from_replicates,
    percentile_ci,
)


@dataclass(frozen=True)
class MatchOutcome:
    """Accumulated preference mass for one condition."""

    condition_id: str
    matched_won_weight: float
    total_weight: float

    def __post_init__(self):
        if not (0.0 <= self.matched_won_weight <= self.total_weight):
            raise ComputationError(
                f"matched weight {self.matched_won_weight} outside [0, {self.total_weight}]"
            )

    @property
    def score(self) -> float:
        if self.total_weight == 0.0:
            raise UndefinedScoreError(
                f"no alignment votes for condition {self.condition_id!r}"
            )
        return self.matched_won_weight / self.total_weight


def _vote_contribution(vote: VoteRecord, task: ComparisonTask) -> tuple[float, float]:
    """(matched mass, total weight) of one vote."""
    response = vote.response
    assert response is not None
    if response.is_tie:
        return 0.5, 1.0
    weight = CLEAR_WEIGHT if response.is_clear else SLIGHT_WEIGHT
    if response.winning_side is task.matched_side:
        return weight, weight
    return 0.0, weight


def _alignment_votes(
    votes: Sequence[VoteRecord], tasks: Mapping[str, ComparisonTask]
) -> list[tuple[VoteRecord, ComparisonTask]]:
    out = []
    for v in votes:
        if v.skipped:
            raise ComputationError(
                f"skipped record in alignment scoring (session {v.session_id}, "
                f"page {v.page_index})"
            )
        task = tasks.get(v.task_id)
        if task is None:
            raise ComputationError(f"vote references unknown task {v.task_id!r}")
        if task.is_attention_check:
            raise ComputationError(
                f"attention-check record in alignment scoring (task {v.task_id!r})"
            )
        if task.study_kind is not StudyKind.ALIGNMENT:
            raise ComputationError(f"non-alignment task {v.task_id!r} in alignment scoring")
        out.append((v, task))
    return out


def match_outcome(
    votes: Sequence[VoteRecord],
    tasks: Mapping[str, ComparisonTask],
    condition_id: str,
) -> MatchOutcome:
    matched = 0.0
    total = 0.0
    for vote, task in _alignment_votes(votes, tasks):
        if task.left.condition_id != condition_id:
            continue
        m, t = _vote_contribution(vote, task)
        matched += m
        total += t
    return MatchOutcome(condition_id=condition_id, matched_won_weight=matched, total_weight=total)


def score_condition(
    votes: Sequence[VoteRecord],
    tasks: Mapping[str, ComparisonTask],
    condition_id: str,
) -> float:
    """Appropriateness score in [0, 1] for one condition; errors when empty."""
    return match_outcome(votes, tasks, condition_id).score


@dataclass(frozen=True)
class ScoreBootstrap:
    conditions: tuple[str, ...]
    estimates: dict[str, Estimate]
    replicates: np.ndarray
    degenerate: bool


def bootstrap_scores(
    votes: Sequence[VoteRecord],
    tasks: Mapping[str, ComparisonTask],
    n_bootstrap: int = 1000,
    seed: int = 0,
) -> ScoreBootstrap:
    """Taker-level bootstrap of every condition's appropriateness score.

    Test takers (one session each) are drawn with replacement; all scores
    are recomputed per replicate.  Point estimates are replicate means.
    A single-taker input yields identical replicates and is flagged
    degenerate.
    """
    if n_bootstrap < 1:
        raise ComputationError("n_bootstrap must be >= 1")
    pairs = _alignment_votes(votes, tasks)
    if not pairs:
        raise UndefinedScoreError("no alignment votes to score")
    conditions = tuple(sorted({task.left.condition_id for _, task in pairs}))
    cond_index = {c: i for i, c in enumerate(conditions)}
    takers = sorted({v.session_id for v, _ in pairs})
    taker_index = {t: i for i, t in enumerate(takers)}
    n_cond, n_takers = len(conditions), len(takers)

    # Per (taker, condition) accumulated mass, so a replicate is a weighted
    # sum over resampled taker rows.
    matched = np.zeros((n_takers, n_cond))
    total = np.zeros((n_takers, n_cond))
    for vote, task in pairs:
        m, t = _vote_contribution(vote, task)
        ti = taker_index[vote.session_id]
        ci = cond_index[task.left.condition_id]
        matched[ti, ci] += m
        total[ti, ci] += t

    full_total = total.sum(axis=0)
    undefined = [c for c, s in zip(conditions, full_total) if s == 0.0]
    if undefined:
        raise UndefinedScoreError(f"no alignment votes for conditions {undefined}")

    replicates = np.empty((n_bootstrap, n_cond))
    for i in range(n_bootstrap):
        rng = np.random.default_rng([seed, i])
        counts = np.bincount(rng.integers(0, n_takers, n_takers), minlength=n_takers)
        rep_total = counts @ total
        rep_matched = counts @ matched
        # A resample can miss every taker who saw some condition; fall back
        # to chance-level 0.5 only in that measure-zero-at-scale case.
        safe = rep_total > 0.0
        replicates[i] = np.where(safe, rep_matched / np.where(safe, rep_total, 1.0), 0.5)

    ci_low, ci_high = percentile_ci(replicates)
    means = replicates.mean(axis=0)
    estimates = {
        c: Estimate(
            point=float(means[i]),
            ci_low=float(min(ci_low[i], means[i])),
            ci_high=float(max(ci_high[i], means[i])),
        )
        for i, c in enumerate(conditions)
    }
    return ScoreBootstrap(
        conditions=conditions,
        estimates=estimates,
        replicates=replicates,
        degenerate=n_takers < 2,
    )


def pairwise_diff_significance(
    replicates: np.ndarray, names: Sequence[str], alpha: float = 0.05
):
    """FDR-adjusted two-sided tests over replicate score columns."""
    return pairwise_from_replicates(replicates, names, alpha)


def score_votes(
    votes: Sequence[VoteRecord],
    tasks: Mapping[str, ComparisonTask],
    n_bootstrap: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
) -> RatingReport:
    """Full appropriateness report: scores, CIs, pairwise significance."""
    boot = bootstrap_scores(votes, tasks, n_bootstrap=n_bootstrap, seed=seed)
    if len(boot.conditions) >= 2:
        pairwise = pairwise_diff_significance(boot.replicates, boot.conditions, alpha)
    else:
        pairwise = ()
    ordered = sorted(
        boot.conditions, key=lambda name: (-boot.estimates[name].point, name)
    )
    n_votes = sum(1 for _ in _alignment_votes(votes, tasks))
    return RatingReport(
        kind="appropriateness",
        estimates={name: boot.estimates[name] for name in ordered},
        pairwise=pairwise,
        n_votes_used=n_votes,
        n_bootstrap=n_bootstrap,
        seed=seed,
        alpha=alpha,
        degenerate=boot.degenerate or n_bootstrap < 2,
        conditions=boot.conditions,
        replicates=boot.replicates,
    )


__all__ = [
    "MatchOutcome",
    "ScoreBootstrap",
    "bootstrap_scores",
    "match_outcome",
    "pairwise_diff_significance",
    "score_condition",
    "score_votes",
]
