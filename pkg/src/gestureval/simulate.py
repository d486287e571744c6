"""Synthetic-voter oracle.

Generates vote logs from planted ground truth: realism winners drawn
from the logistic rating model, alignment winners from per-condition
matched-preference probabilities.  The resulting logs satisfy every
domain invariant, so the whole statistics pipeline can be verified end
to end without human subjects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import (
    ComparisonTask,
    Condition,
    ConditionKind,
    DomainValidationError,
    JUICE_OPTIONS,
    Response,
    Segment,
    Side,
    StudyKind,
    StudyPlan,
    StudyRegistry,
    VoteRecord,
)
from .rating import EloConfig, predict_win_prob
from .study import build_alignment_plan, build_realism_plan


@dataclass(frozen=True)
class PlantedTruth:
    """Ground truth the simulator votes from."""

    realism_ratings: Mapping[str, float] = field(default_factory=dict)
    alignment_p: Mapping[str, float] = field(default_factory=dict)
    tie_rate: float = 0.1
    clear_given_win: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.tie_rate < 1.0:
            raise DomainValidationError("truth.tie_rate", "must be in [0, 1)")
        if not 0.0 <= self.clear_given_win <= 1.0:
            raise DomainValidationError("truth.clear_given_win", "must be in [0, 1]")
        for cond, p in self.alignment_p.items():
            if not 0.0 <= p <= 1.0:
                raise DomainValidationError(
                    f"truth.alignment_p[{cond}]", "must be in [0, 1]"
                )

    def to_dict(self) -> dict:
        return {
            "realism_ratings": dict(self.realism_ratings),
            "alignment_p": dict(self.alignment_p),
            "tie_rate": self.tie_rate,
            "clear_given_win": self.clear_given_win,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PlantedTruth":
        return cls(
            realism_ratings={k: float(v) for k, v in d.get("realism_ratings", {}).items()},
            alignment_p={k: float(v) for k, v in d.get("alignment_p", {}).items()},
            tie_rate=float(d.get("tie_rate", 0.1)),
            clear_given_win=float(d.get("clear_given_win", 0.5)),
            rng_seed=int(d.get("rng_seed", 0)),
        )


# ---------------------------------------------------------------------------
# Synthetic registries and plans
# ---------------------------------------------------------------------------

def build_synthetic_registry(
    condition_ids: Sequence[str],
    n_segments: int = 4,
    speaker_id: str = "speaker-a",
    mocap_id: Optional[str] = None,
) -> StudyRegistry:
    """Registry of the given conditions over evenly spaced synthetic segments."""
    conditions = [
        Condition(
            id=cid,
            display_name=cid.replace("-", " ").title(),
            kind=ConditionKind.MOCAP if cid == mocap_id else ConditionKind.GENERATIVE,
        )
        for cid in condition_ids
    ]
    segments = [
        Segment(
            id=f"seg{i:03d}",
            speaker_id=speaker_id,
            start_s=20.0 * i,
            end_s=20.0 * i + 9.0,
            transcript=f"Synthetic sentence number {i}.",
        )
        for i in range(n_segments)
    ]
    return StudyRegistry.build(conditions, segments)


def build_synthetic_realism_plan(
    condition_ids: Sequence[str],
    n_segments: int = 2,
    seed: int = 0,
    n_bootstrap: int = 1000,
) -> StudyPlan:
    registry = build_synthetic_registry(condition_ids, n_segments)
    return build_realism_plan(registry, seed=seed, n_bootstrap=n_bootstrap, synthesize=True)


def build_synthetic_alignment_plan(
    condition_ids: Sequence[str],
    n_segments: int = 8,
    seed: int = 0,
    n_bootstrap: int = 1000,
) -> StudyPlan:
    registry = build_synthetic_registry(condition_ids, n_segments)
    return build_alignment_plan(registry, seed=seed, n_bootstrap=n_bootstrap, synthesize=True)


# ---------------------------------------------------------------------------
# Vote generation
# ---------------------------------------------------------------------------

_PAGES_PER_SESSION = 21


def _response_for(
    winning_side: Side, clear: bool
) -> Response:
    if winning_side is Side.LEFT:
        return Response.LEFT_CLEAR if clear else Response.LEFT_SLIGHT
    return Response.RIGHT_CLEAR if clear else Response.RIGHT_SLIGHT


def _draw_response(
    rng: np.random.Generator,
    left_win_prob: float,
    tie_rate: float,
    clear_given_win: float,
) -> Response:
    if rng.random() < tie_rate:
        return Response.TIE
    side = Side.LEFT if rng.random() < left_win_prob else Side.RIGHT
    return _response_for(side, rng.random() < clear_given_win)


def _juice_for(rng: np.random.Generator, study_kind: StudyKind, response: Response) -> frozenset[str]:
    if response.is_tie:
        return frozenset()
    keys = sorted(JUICE_OPTIONS[study_kind])
    keys.remove("other")
    return frozenset({keys[int(rng.integers(0, len(keys)))]})


def simulate_realism_votes(
    truth: PlantedTruth,
    plan: StudyPlan,
    n_votes_per_pair: int,
    seed: Optional[int] = None,
    session_prefix: str = "sim",
) -> list[VoteRecord]:
    """Draw ``n_votes_per_pair`` preference votes for every condition pair.

    Winners follow the logistic curve on planted rating differences; ties
    occur at ``truth.tie_rate`` and clear-vs-slight at
    ``truth.clear_given_win``.  Votes are packed into synthetic sessions
    of 21 pages so taker-level resampling has a natural unit.
    """
    if plan.study_kind is not StudyKind.REALISM:
        raise DomainValidationError("plan.study_kind", "realism plan required")
    ratings = truth.realism_ratings
    involved = {t.left.condition_id for t in plan.tasks} | {
        t.right.condition_id for t in plan.tasks
    }
    missing = sorted(involved - set(ratings))
    if missing:
        raise DomainValidationError(
            "truth.realism_ratings", f"no planted rating for conditions {missing}"
        )
    rng = np.random.default_rng(truth.rng_seed if seed is None else seed)
    cfg = EloConfig()
    by_pair: dict[tuple[str, str], list[ComparisonTask]] = {}
    for task in plan.tasks:
        key = tuple(sorted((task.left.condition_id, task.right.condition_id)))
        by_pair.setdefault(key, []).append(task)
    votes: list[VoteRecord] = []
    counter = 0
    for key in sorted(by_pair):
        tasks = by_pair[key]
        for k in range(n_votes_per_pair):
            task = tasks[k % len(tasks)]
            p_left = predict_win_prob(
                ratings[task.left.condition_id], ratings[task.right.condition_id], cfg
            )
            response = _draw_response(rng, p_left, truth.tie_rate, truth.clear_given_win)
            votes.append(
                VoteRecord(
                    session_id=f"{session_prefix}{counter // _PAGES_PER_SESSION:06d}",
                    page_index=counter % _PAGES_PER_SESSION + 1,
                    task_id=task.id,
                    response=response,
                    juice_options=_juice_for(rng, StudyKind.REALISM, response),
                    timestamp=float(counter),
                )
            )
            counter += 1
    return votes


def simulate_alignment_votes(
    truth: PlantedTruth,
    plan: StudyPlan,
    n_takers: int,
    pages_per_taker: int = _PAGES_PER_SESSION,
    seed: Optional[int] = None,
    session_prefix: str = "simt",
) -> list[VoteRecord]:
    """One synthetic session per taker over the alignment task pool.

    Each page picks a pool task (takers cycle through their own shuffled
    order, so per-condition exposure stays balanced) and prefers the
    matched side with probability ``truth.alignment_p[condition]``.
    """
    if plan.study_kind is not StudyKind.ALIGNMENT:
        raise DomainValidationError("plan.study_kind", "alignment plan required")
    if not 1 <= pages_per_taker <= 25:
        raise DomainValidationError("pages_per_taker", "must be in 1..25")
    tasks = list(plan.tasks)
    missing = sorted(
        {t.left.condition_id for t in tasks} - set(truth.alignment_p)
    )
    if missing:
        raise DomainValidationError(
            "truth.alignment_p", f"no planted probability for conditions {missing}"
        )
    rng = np.random.default_rng(truth.rng_seed if seed is None else seed)
    votes: list[VoteRecord] = []
    for taker in range(n_takers):
        order = rng.permutation(len(tasks))
        for page in range(1, pages_per_taker + 1):
            task = tasks[int(order[(page - 1) % len(tasks)])]
            p = truth.alignment_p[task.left.condition_id]
            matched = task.matched_side
            assert matched is not None
            p_left = p if matched is Side.LEFT else 1.0 - p
            response = _draw_response(rng, p_left, truth.tie_rate, truth.clear_given_win)
            votes.append(
                VoteRecord(
                    session_id=f"{session_prefix}{taker:06d}",
                    page_index=page,
                    task_id=task.id,
                    response=response,
                    juice_options=_juice_for(rng, StudyKind.ALIGNMENT, response),
                    timestamp=float(taker * pages_per_taker + page),
                )
            )
    return votes


__all__ = [
    "PlantedTruth",
    "build_synthetic_alignment_plan",
    "build_synthetic_realism_plan",
    "build_synthetic_registry",
    "simulate_alignment_votes",
    "simulate_realism_votes",
]
