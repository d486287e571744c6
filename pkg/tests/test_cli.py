"""Command-line interface: exit codes, round trips, file formats."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from gestureval import analysis
from gestureval.cli import main
from gestureval.metrics import MotionSequence, save_motion
from gestureval.simulate import (
    PlantedTruth,
    build_synthetic_registry,
)


@pytest.fixture()
def runner():
    return CliRunner()


def _write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def _registry_file(tmp_path, conditions=("alpha", "beta", "gamma"), n_segments=4):
    registry = build_synthetic_registry(list(conditions), n_segments=n_segments)
    return _write_json(tmp_path / "registry.json", registry.to_dict())


def _build_plan(runner, tmp_path, kind, **extra_args):
    registry = _registry_file(
        tmp_path, n_segments=8 if kind == "alignment" else 4
    )
    plan_path = tmp_path / f"{kind}-plan.json"
    args = [
        "study", "build",
        "--registry", registry,
        "--kind", kind,
        "--output", str(plan_path),
        "--n-bootstrap", "80",
        "--synthesize-stimuli",
    ]
    for key, value in extra_args.items():
        args.extend([f"--{key.replace('_', '-')}", str(value)])
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return plan_path


def _simulate(runner, tmp_path, plan_path, truth, **kwargs):
    truth_path = _write_json(tmp_path / "truth.json", truth.to_dict())
    votes_path = tmp_path / "votes.log"
    args = [
        "simulate", "votes",
        "--plan", str(plan_path),
        "--truth", truth_path,
        "--output", str(votes_path),
    ]
    for key, value in kwargs.items():
        args.extend([f"--{key.replace('_', '-')}", str(value)])
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return votes_path


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_missing_file_exits_4(runner, tmp_path):
    plan = _build_plan(runner, tmp_path, "realism")
    result = runner.invoke(
        main, ["rank", "elo", "--plan", str(plan), "--votes", str(tmp_path / "nope.log")]
    )
    assert result.exit_code == 4
    assert "error:" in result.output


def test_invalid_json_exits_2(runner, tmp_path):
    bad = tmp_path / "plan.json"
    bad.write_text("{broken")
    votes = tmp_path / "votes.log"
    votes.write_text("")
    result = runner.invoke(
        main, ["rank", "elo", "--plan", str(bad), "--votes", str(votes)]
    )
    assert result.exit_code == 2


def test_empty_vote_log_exits_3(runner, tmp_path):
    plan = _build_plan(runner, tmp_path, "realism")
    votes = tmp_path / "votes.log"
    votes.write_text("")
    result = runner.invoke(
        main, ["rank", "elo", "--plan", str(plan), "--votes", str(votes)]
    )
    assert result.exit_code == 3


# ---------------------------------------------------------------------------
# segments select
# ---------------------------------------------------------------------------

def _candidate_segments():
    segments = []
    for speaker in ("spk-a", "spk-b"):
        for i in range(6):
            segments.append(
                {
                    "id": f"{speaker}-s{i}",
                    "speaker_id": speaker,
                    "start_s": 30.0 * i,
                    "end_s": 30.0 * i + 8.0,
                    "transcript": f"A complete spoken sentence number {i}.",
                }
            )
    return segments


def test_segments_select_applies_quota(runner, tmp_path):
    candidates = _write_json(
        tmp_path / "candidates.json", {"segments": _candidate_segments()}
    )
    out = tmp_path / "selected.json"
    result = runner.invoke(
        main,
        [
            "segments", "select",
            "--candidates", candidates,
            "--output", str(out),
            "--quota", "3",
            "--quota-override", "spk-b=2",
        ],
    )
    assert result.exit_code == 0, result.output
    selected = json.loads(out.read_text())["segments"]
    per_speaker = {}
    for seg in selected:
        per_speaker[seg["speaker_id"]] = per_speaker.get(seg["speaker_id"], 0) + 1
    assert per_speaker == {"spk-a": 3, "spk-b": 2}


def test_segments_select_rejects_bad_override(runner, tmp_path):
    candidates = _write_json(
        tmp_path / "candidates.json", {"segments": _candidate_segments()}
    )
    result = runner.invoke(
        main,
        [
            "segments", "select",
            "--candidates", candidates,
            "--quota-override", "spk-b:2",
        ],
    )
    assert result.exit_code == 2


# ---------------------------------------------------------------------------
# simulate -> rank round trip
# ---------------------------------------------------------------------------

TRUTH = PlantedTruth(
    realism_ratings={"alpha": 1150.0, "beta": 1000.0, "gamma": 860.0},
    tie_rate=0.1,
    rng_seed=7,
)


def test_simulate_rank_round_trip(runner, tmp_path):
    plan = _build_plan(runner, tmp_path, "realism")
    votes = _simulate(runner, tmp_path, plan, TRUTH, votes_per_pair=150)
    out = tmp_path / "leaderboard.csv"
    pairwise = tmp_path / "pairwise.csv"
    result = runner.invoke(
        main,
        [
            "rank", "elo",
            "--plan", str(plan),
            "--votes", str(votes),
            "--output", str(out),
            "--seed", "3",
            "--pairwise-csv", str(pairwise),
        ],
    )
    assert result.exit_code == 0, result.output
    rows = _read_csv(out)
    assert [r["condition"] for r in rows] == ["alpha", "beta", "gamma"]
    ratings = [float(r["rating"]) for r in rows]
    assert ratings == sorted(ratings, reverse=True)
    for row in rows:
        assert float(row["ci_low"]) <= float(row["rating"]) <= float(row["ci_high"])
    pw = _read_csv(pairwise)
    assert len(pw) == 3
    assert all(r["significant"] == "True" for r in pw)


def test_rank_json_is_byte_identical_to_library_report(runner, tmp_path):
    plan = _build_plan(runner, tmp_path, "realism")
    votes = _simulate(runner, tmp_path, plan, TRUTH, votes_per_pair=40)
    out = tmp_path / "report.json"
    result = runner.invoke(
        main,
        [
            "rank", "elo",
            "--plan", str(plan),
            "--votes", str(votes),
            "--output", str(out),
            "--format", "json",
            "--seed", "11",
            "--n-bootstrap", "60",
        ],
    )
    assert result.exit_code == 0, result.output
    from gestureval.domain import StudyPlan

    plan_obj = StudyPlan.from_dict(json.loads(plan.read_text()))
    report = analysis.leaderboard_report(
        plan_obj, votes.read_text(), seed=11, n_bootstrap=60
    )
    assert out.read_text() == report.to_json()


def test_score_alignment_round_trip(runner, tmp_path):
    plan = _build_plan(runner, tmp_path, "alignment")
    truth = PlantedTruth(alignment_p={"alpha": 0.74, "beta": 0.55, "gamma": 0.5})
    votes = _simulate(runner, tmp_path, plan, truth, takers=120)
    out = tmp_path / "scores.csv"
    result = runner.invoke(
        main,
        [
            "score", "alignment",
            "--plan", str(plan),
            "--votes", str(votes),
            "--output", str(out),
            "--seed", "2",
        ],
    )
    assert result.exit_code == 0, result.output
    rows = {r["condition"]: float(r["score"]) for r in _read_csv(out)}
    assert rows["alpha"] == pytest.approx(0.74, abs=0.05)
    assert rows["gamma"] == pytest.approx(0.5, abs=0.05)


# ---------------------------------------------------------------------------
# juice report
# ---------------------------------------------------------------------------

def test_report_juice_requires_opponent_without_mocap(runner, tmp_path):
    plan = _build_plan(runner, tmp_path, "realism")
    votes = _simulate(runner, tmp_path, plan, TRUTH, votes_per_pair=30)
    result = runner.invoke(
        main, ["report", "juice", "--plan", str(plan), "--votes", str(votes)]
    )
    assert result.exit_code == 2

    out = tmp_path / "juice.csv"
    ok = runner.invoke(
        main,
        [
            "report", "juice",
            "--plan", str(plan),
            "--votes", str(votes),
            "--all-opponents",
            "--output", str(out),
        ],
    )
    assert ok.exit_code == 0, ok.output
    rows = _read_csv(out)
    # 3 focus conditions x 5 justification options.
    assert len(rows) == 15
    assert {r["condition"] for r in rows} == {"alpha", "beta", "gamma"}


# ---------------------------------------------------------------------------
# metrics run
# ---------------------------------------------------------------------------

def _motion_files(tmp_path):
    rng = np.random.default_rng(0)
    base = rng.normal(size=(120, 4))
    offset = np.array([1.0, 0.0, -2.0, 0.5])
    ref = tmp_path / "ref.csv"
    gen = tmp_path / "gen.csv"
    save_motion(MotionSequence(frames=base, fps=30.0), ref)
    save_motion(MotionSequence(frames=base + offset, fps=30.0), gen)
    return ref, gen, float(offset @ offset)


def test_metrics_run_frechet_values(runner, tmp_path):
    ref, gen, offset_sq = _motion_files(tmp_path)
    out = tmp_path / "metrics.csv"
    result = runner.invoke(
        main,
        [
            "metrics", "run",
            "--reference", str(ref),
            "--generated", str(gen),
            "--metrics", "fdg,fdk",
            "--output", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    values = {r["metric"]: float(r["value"]) for r in _read_csv(out)}
    assert values["fdg"] == pytest.approx(offset_sq, abs=1e-9)
    assert values["fdk"] == pytest.approx(0.0, abs=1e-9)


def test_metrics_run_beat_alignment(runner, tmp_path):
    _, gen, _ = _motion_files(tmp_path)
    audio = tmp_path / "beats.txt"
    audio.write_text("0.5\n1.0\n1.5\n")
    motion_beats = tmp_path / "mbeats.txt"
    motion_beats.write_text("0.5\n1.0\n1.5\n")
    out = tmp_path / "ba.csv"
    result = runner.invoke(
        main,
        [
            "metrics", "run",
            "--generated", str(gen),
            "--metrics", "ba",
            "--audio-beats", str(audio),
            "--motion-beats", str(motion_beats),
            "--output", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    values = {r["metric"]: float(r["value"]) for r in _read_csv(out)}
    assert values["ba"] == pytest.approx(1.0)


def test_metrics_run_rejects_unknown_metric(runner, tmp_path):
    _, gen, _ = _motion_files(tmp_path)
    result = runner.invoke(
        main, ["metrics", "run", "--generated", str(gen), "--metrics", "bogus"]
    )
    assert result.exit_code == 2


def test_metrics_run_requires_reference_for_frechet(runner, tmp_path):
    _, gen, _ = _motion_files(tmp_path)
    result = runner.invoke(
        main, ["metrics", "run", "--generated", str(gen), "--metrics", "fdg"]
    )
    assert result.exit_code == 2


# ---------------------------------------------------------------------------
# correlate
# ---------------------------------------------------------------------------

def test_correlate_direct_values(runner, tmp_path):
    out = tmp_path / "tau.csv"
    result = runner.invoke(
        main, ["correlate", "--xs", "1,2,3", "--ys", "1,3,2", "--output", str(out)]
    )
    assert result.exit_code == 0, result.output
    rows = _read_csv(out)
    assert float(rows[0]["tau"]) == pytest.approx(1.0 / 3.0)


def test_correlate_csv_join(runner, tmp_path):
    metrics_csv = tmp_path / "metrics.csv"
    metrics_csv.write_text(
        "condition,fgd,ba\nalpha,1.0,0.9\nbeta,2.0,0.7\ngamma,3.0,0.8\n"
    )
    ratings_csv = tmp_path / "ratings.csv"
    ratings_csv.write_text("condition,rating\nalpha,1100\nbeta,1000\ngamma,900\n")
    out = tmp_path / "taus.csv"
    result = runner.invoke(
        main,
        [
            "correlate",
            "--metrics-csv", str(metrics_csv),
            "--ratings-csv", str(ratings_csv),
            "--output", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    taus = {r["metric"]: float(r["tau"]) for r in _read_csv(out)}
    # Lower distances for higher-rated conditions: perfect inverse order.
    assert taus["fgd"] == pytest.approx(-1.0)
    assert taus["ba"] == pytest.approx(1.0 / 3.0)


def test_correlate_requires_a_mode(runner):
    result = runner.invoke(main, ["correlate"])
    assert result.exit_code == 2
