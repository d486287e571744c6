"""Appropriateness scoring over audio-mismatching votes."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gestureval.alignment import (
    bootstrap_scores,
    match_outcome,
    score_condition,
    score_votes,
)
from gestureval.domain import ComparisonTask, Response, Side
from gestureval.stats import UndefinedScoreError
from helpers import alignment_task, make_vote

ML = alignment_task(task_id="t-ml", cond="cond-a", matched_left=True)
MR = alignment_task(task_id="t-mr", cond="cond-a", matched_left=False)
TASKS = {ML.id: ML, MR.id: MR}


def _votes(*specs) -> list:
    """specs: (task, response) pairs; sessions and pages are made unique."""
    votes = []
    for i, (task, resp) in enumerate(specs):
        votes.append(make_vote(task, resp, session=f"s{i}", page=1))
    return votes


# ---------------------------------------------------------------------------
# weighted matched fraction
# ---------------------------------------------------------------------------

def test_all_ties_score_half():
    votes = _votes((ML, Response.TIE), (MR, Response.TIE), (ML, Response.TIE))
    assert score_condition(votes, TASKS, "cond-a") == pytest.approx(0.5)


def test_all_clear_matched_scores_one():
    votes = _votes((ML, Response.LEFT_CLEAR), (MR, Response.RIGHT_CLEAR))
    assert score_condition(votes, TASKS, "cond-a") == pytest.approx(1.0)


def test_hand_weighted_example():
    # clear matched (2/2) + slight mismatched (0/1) + tie (0.5/1) = 2.5/4.
    votes = _votes(
        (ML, Response.LEFT_CLEAR),
        (ML, Response.RIGHT_SLIGHT),
        (ML, Response.TIE),
    )
    out = match_outcome(votes, TASKS, "cond-a")
    assert out.matched_won_weight == pytest.approx(2.5)
    assert out.total_weight == pytest.approx(4.0)
    assert out.score == pytest.approx(0.625)


def test_matched_side_right_counts_right_wins():
    votes = _votes((MR, Response.RIGHT_SLIGHT), (MR, Response.LEFT_SLIGHT))
    assert score_condition(votes, TASKS, "cond-a") == pytest.approx(0.5)


def test_no_votes_is_undefined_not_zero():
    with pytest.raises(UndefinedScoreError):
        score_condition([], TASKS, "cond-a")
    with pytest.raises(UndefinedScoreError):
        score_votes([], TASKS)


def test_skips_and_attention_checks_rejected_upstream():
    from gestureval.stats import ComputationError

    skip = make_vote(ML, None, skipped=True)
    with pytest.raises(ComputationError):
        score_condition([skip], TASKS, "cond-a")


def _flip_task(task: ComparisonTask) -> ComparisonTask:
    return ComparisonTask(
        id=task.id, study_kind=task.study_kind, left=task.right, right=task.left
    )


_FLIP = {
    Response.LEFT_CLEAR: Response.RIGHT_CLEAR,
    Response.LEFT_SLIGHT: Response.RIGHT_SLIGHT,
    Response.TIE: Response.TIE,
    Response.RIGHT_SLIGHT: Response.LEFT_SLIGHT,
    Response.RIGHT_CLEAR: Response.LEFT_CLEAR,
}


@settings(max_examples=150)
@given(
    st.lists(
        st.tuples(st.booleans(), st.sampled_from(list(Response))),
        min_size=1,
        max_size=30,
    )
)
def test_preferring_the_other_side_mirrors_the_score(spec):
    votes, flipped_votes = [], []
    flipped_tasks = {t.id: _flip_task(t) for t in TASKS.values()}
    for i, (left_matched, resp) in enumerate(spec):
        task = ML if left_matched else MR
        votes.append(make_vote(task, resp, session=f"s{i}"))
        flipped_votes.append(
            make_vote(flipped_tasks[task.id], _FLIP[resp], session=f"s{i}")
        )
    score = score_condition(votes, TASKS, "cond-a")
    mirrored = score_condition(flipped_votes, flipped_tasks, "cond-a")
    assert mirrored == pytest.approx(score, abs=1e-12)


@settings(max_examples=100)
@given(
    st.lists(
        st.tuples(st.booleans(), st.sampled_from(list(Response))),
        min_size=1,
        max_size=20,
    )
)
def test_score_invariant_to_order_and_duplication(spec):
    votes = [
        make_vote(ML if lm else MR, r, session=f"s{i}")
        for i, (lm, r) in enumerate(spec)
    ]
    base = score_condition(votes, TASKS, "cond-a")
    reordered = score_condition(list(reversed(votes)), TASKS, "cond-a")
    doubled_votes = votes + [
        make_vote(ML if lm else MR, r, session=f"d{i}")
        for i, (lm, r) in enumerate(spec)
    ]
    doubled = score_condition(doubled_votes, TASKS, "cond-a")
    assert reordered == pytest.approx(base, abs=1e-12)
    assert doubled == pytest.approx(base, abs=1e-12)


def test_matched_side_is_required_metadata():
    assert ML.matched_side is Side.LEFT and MR.matched_side is Side.RIGHT


# ---------------------------------------------------------------------------
# taker bootstrap
# ---------------------------------------------------------------------------

def test_single_taker_all_ties_degenerate_ci():
    votes = [make_vote(ML, Response.TIE, session="only", page=p) for p in range(1, 6)]
    boot = bootstrap_scores(votes, TASKS, n_bootstrap=50, seed=0)
    assert boot.degenerate
    est = boot.estimates["cond-a"]
    assert est.point == pytest.approx(0.5)
    assert est.ci_low == pytest.approx(0.5) and est.ci_high == pytest.approx(0.5)


def test_bootstrap_deterministic_under_seed():
    rng = np.random.default_rng(4)
    votes = []
    for taker in range(30):
        for page in range(1, 8):
            task = ML if rng.random() < 0.5 else MR
            matched_wins = rng.random() < 0.7
            if task.matched_side is Side.LEFT:
                resp = Response.LEFT_SLIGHT if matched_wins else Response.RIGHT_SLIGHT
            else:
                resp = Response.RIGHT_SLIGHT if matched_wins else Response.LEFT_SLIGHT
            votes.append(make_vote(task, resp, session=f"tk{taker}", page=page))
    r1 = score_votes(votes, TASKS, n_bootstrap=100, seed=21)
    r2 = score_votes(votes, TASKS, n_bootstrap=100, seed=21)
    assert r1.to_json() == r2.to_json()
    r3 = score_votes(votes, TASKS, n_bootstrap=100, seed=22)
    assert r1.to_json() != r3.to_json()
    assert r1.kind == "appropriateness"
    est = r1.estimates["cond-a"]
    assert est.ci_low <= est.point <= est.ci_high
    assert 0.6 <= est.point <= 0.8


def test_multi_condition_report_with_pairwise():
    good = alignment_task(task_id="t-good", cond="good", matched_left=True)
    bad = alignment_task(task_id="t-bad", cond="bad", matched_left=True)
    tasks = {good.id: good, bad.id: bad}
    votes = []
    rng = np.random.default_rng(9)
    for taker in range(40):
        for page, task in enumerate((good, bad), start=1):
            p = 0.9 if task is good else 0.5
            win = rng.random() < p
            resp = Response.LEFT_CLEAR if win else Response.RIGHT_CLEAR
            votes.append(make_vote(task, resp, session=f"tk{taker}", page=page))
    report = score_votes(votes, tasks, n_bootstrap=200, seed=3)
    assert list(report.estimates)[0] == "good"
    assert len(report.pairwise) == 1
    assert report.pairwise[0].significant
    assert report.n_votes_used == 80


def test_single_condition_report_has_empty_pairwise():
    votes = _votes((ML, Response.TIE), (MR, Response.TIE))
    report = score_votes(votes, TASKS, n_bootstrap=20, seed=0)
    assert report.pairwise == ()


def test_condition_without_votes_is_undefined():
    other = alignment_task(task_id="t-other", cond="cond-b", matched_left=True)
    tasks = dict(TASKS)
    tasks[other.id] = other
    votes = _votes((ML, Response.TIE))
    with pytest.raises(UndefinedScoreError):
        score_condition(votes, tasks, "cond-b")
