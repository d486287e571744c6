"""Aggregation of JUICE justification ticks into win/loss option profiles.

Only non-tie votes carry JUICE ticks, so ties are excluded by
construction.  Each comparison counts once regardless of preference
strength.  Fractions are normalized by the number of non-tie comparisons
involving the focus condition by default; a tick-count normalization is
available as an alternative reading.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .domain import (
    ComparisonTask,
    DomainValidationError,
    JUICE_OPTIONS,
    StudyKind,
    VoteRecord,
)
from .stats import ComputationError, UndefinedScoreError


@dataclass(frozen=True)
class OptionStat:
    win_fraction: float
    loss_fraction: float

    def to_dict(self) -> dict:
        return {"win_fraction": self.win_fraction, "loss_fraction": self.loss_fraction}


@dataclass(frozen=True)
class JuiceProfile:
    """Per-option justification frequencies for one focus condition."""

    condition_id: str
    study_kind: StudyKind
    options: dict[str, OptionStat]
    n_wins: int
    n_losses: int
    n_comparisons: int
    normalization: str
    other_texts: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "condition_id": self.condition_id,
            "study_kind": self.study_kind.value,
            "options": {k: v.to_dict() for k, v in self.options.items()},
            "n_wins": self.n_wins,
            "n_losses": self.n_losses,
            "n_comparisons": self.n_comparisons,
            "normalization": self.normalization,
            "other_texts": list(self.other_texts),
        }


def aggregate_juice(
    votes: Sequence[VoteRecord],
    tasks: Mapping[str, ComparisonTask],
    focus_condition: str,
    opponent_filter: Optional[str] = None,
    normalization: str = "comparisons",
) -> JuiceProfile:
    """Win/loss tick frequencies for one condition.

    Realism votes: the focus condition wins when its side is preferred;
    ``opponent_filter`` restricts to comparisons against one opponent
    (analyses typically pit everything against the mocap topline).
    Alignment votes compare matched vs mismatched audio within the focus
    condition, so a win means the matched side was preferred and
    ``opponent_filter`` does not apply.

    ``normalization``: "comparisons" divides tick counts by the number of
    non-tie comparisons involving the focus condition; "ticks" divides by
    the total number of ticks instead, so all fractions sum to 1.
    """
    if normalization not in ("comparisons", "ticks"):
        raise DomainValidationError(
            "normalization", "expected 'comparisons' or 'ticks'"
        )
    study_kind: Optional[StudyKind] = None
    win_ticks: dict[str, int] = {}
    loss_ticks: dict[str, int] = {}
    n_wins = n_losses = 0
    other_texts: list[str] = []
    for v in votes:
        if v.skipped:
            continue
        task = tasks.get(v.task_id)
        if task is None:
            raise ComputationError(f"vote references unknown task {v.task_id!r}")
        if task.is_attention_check:
            continue
        response = v.response
        assert response is not None
        if response.is_tie:
            continue
        if study_kind is None:
            study_kind = task.study_kind
        elif task.study_kind is not study_kind:
            raise ComputationError("votes mix study kinds; aggregate one study at a time")
        if task.study_kind is StudyKind.ALIGNMENT:
            if task.left.condition_id != focus_condition:
                continue
            won = response.winning_side is task.matched_side
        else:
            sides = {task.left.condition_id: "left", task.right.condition_id: "right"}
            if focus_condition not in sides:
                continue
            opponent = (
                task.right.condition_id
                if sides[focus_condition] == "left"
                else task.left.condition_id
            )
            if opponent_filter is not None and opponent != opponent_filter:
                continue
            won = response.winning_side is not None and (
                response.winning_side.value == sides[focus_condition]
            )
        if won:
            n_wins += 1
        else:
            n_losses += 1
        bucket = win_ticks if won else loss_ticks
        for key in v.juice_options:
            bucket[key] = bucket.get(key, 0) + 1
        if v.juice_other_text:
            other_texts.append(v.juice_other_text)
    n_comparisons = n_wins + n_losses
    if n_comparisons == 0:
        raise UndefinedScoreError(
            f"no non-tie comparisons involve condition {focus_condition!r}"
        )
    assert study_kind is not None
    if normalization == "comparisons":
        denom = float(n_comparisons)
    else:
        denom = float(sum(win_ticks.values()) + sum(loss_ticks.values()))
        if denom == 0.0:
            raise UndefinedScoreError("no JUICE ticks to normalize")
    options = {
        key: OptionStat(
            win_fraction=win_ticks.get(key, 0) / denom,
            loss_fraction=loss_ticks.get(key, 0) / denom,
        )
        for key in JUICE_OPTIONS[study_kind]
    }
    return JuiceProfile(
        condition_id=focus_condition,
        study_kind=study_kind,
        options=options,
        n_wins=n_wins,
        n_losses=n_losses,
        n_comparisons=n_comparisons,
        normalization=normalization,
        other_texts=tuple(other_texts),
    )


def profile_rows(profile: JuiceProfile) -> list[dict]:
    """Flat rows for CSV export: one per option, labels included."""
    labels = JUICE_OPTIONS[profile.study_kind]
    return [
        {
            "condition": profile.condition_id,
            "option": key,
            "label": labels[key],
            "win_fraction": stat.win_fraction,
            "loss_fraction": stat.loss_fraction,
        }
        for key, stat in profile.options.items()
    ]


__all__ = ["JuiceProfile", "OptionStat", "aggregate_juice", "profile_rows"]
