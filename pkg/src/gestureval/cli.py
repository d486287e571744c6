"""Command-line driver for the full evaluation pipeline.

Every command is deterministic under --seed, reads and writes the
domain-model formats, and exits 2 on validation failures, 3 on
computation failures, and 4 on I/O failures.  Tables default to CSV;
--format json switches report commands to the canonical document form,
which is byte-identical to the HTTP service's output.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import analysis, metrics as metrics_mod
from .domain import (
    DomainValidationError,
    RatingReport,
    Segment,
    StudyKind,
    StudyPlan,
    StudyRegistry,
    canonical_json,
    serialize_votes,
)
from .simulate import PlantedTruth, simulate_alignment_votes, simulate_realism_votes
from .stats import ComputationError
from .study import SegmentPolicy, build_alignment_plan, build_realism_plan, select_segments

EXIT_VALIDATION = 2
EXIT_COMPUTATION = 3
EXIT_IO = 4


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DomainValidationError as exc:
            _fail(str(exc), EXIT_VALIDATION)
        except ComputationError as exc:
            _fail(str(exc), EXIT_COMPUTATION)
        except OSError as exc:
            _fail(str(exc), EXIT_IO)

    return wrapper


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DomainValidationError(path, f"not valid JSON: {exc}") from None


def _read_text(path: str) -> str:
    return Path(path).read_text()


def _write_output(text: str, output: Optional[str]) -> None:
    if output is None or output == "-":
        click.echo(text, nl=not text.endswith("\n"))
    else:
        Path(output).write_text(text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _load_plan(path: str) -> StudyPlan:
    return StudyPlan.from_dict(_load_json(path))


def _report_text(report: RatingReport, fmt: str, value_label: str) -> str:
    if fmt == "json":
        return report.to_json()
    rows = [
        [name, est.point, est.ci_low, est.ci_high]
        for name, est in report.estimates.items()
    ]
    return _csv_text(["condition", value_label, "ci_low", "ci_high"], rows)


def _pairwise_csv(report: RatingReport) -> str:
    rows = [
        [p.a, p.b, p.p_raw, p.p_fdr, p.significant] for p in report.pairwise
    ]
    return _csv_text(["a", "b", "p_raw", "p_fdr", "significant"], rows)


def _replicates_csv(report: RatingReport) -> str:
    header = list(report.conditions)
    rows = [list(map(float, row)) for row in report.replicates]
    return _csv_text(header, rows)


@click.group()
def main():
    """Pairwise human-evaluation pipeline for gesture generation."""


# ---------------------------------------------------------------------------
# segments
# ---------------------------------------------------------------------------

@main.group()
def segments():
    """Segment selection."""


@segments.command("select")
@click.option("--candidates", required=True, help="JSON file with candidate segments.")
@click.option("--output", default="-", help="Where to write the selected segments.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--min-duration", default=7.0, type=float, show_default=True)
@click.option("--max-duration", default=12.0, type=float, show_default=True)
@click.option("--quota", default=4, type=int, show_default=True, help="Default per-speaker quota.")
@click.option(
    "--quota-override",
    "quota_overrides",
    multiple=True,
    help="speaker=count override; repeatable.",
)
@click.option("--allow-incomplete-sentences", is_flag=True, default=False)
@cli_errors
def segments_select(
    candidates, output, seed, min_duration, max_duration, quota, quota_overrides,
    allow_incomplete_sentences,
):
    """Filter and quota-sample evaluation segments."""
    doc = _load_json(candidates)
    raw = doc["segments"] if isinstance(doc, dict) else doc
    pool = [Segment.from_dict(s) for s in raw]
    overrides = {}
    for item in quota_overrides:
        if "=" not in item:
            raise DomainValidationError("--quota-override", f"expected speaker=count, got {item!r}")
        speaker, _, count = item.partition("=")
        overrides[speaker] = int(count)
    policy = SegmentPolicy(
        min_duration_s=min_duration,
        max_duration_s=max_duration,
        default_quota=quota,
        quota_overrides=overrides,
        require_complete_sentences=not allow_incomplete_sentences,
    )
    selected = select_segments(pool, policy, seed=seed)
    _write_output(canonical_json({"segments": [s.to_dict() for s in selected]}), output)
    click.echo(f"selected {len(selected)} segments", err=True)


# ---------------------------------------------------------------------------
# study
# ---------------------------------------------------------------------------

@main.group()
def study():
    """Study-plan construction."""


@study.command("build")
@click.option("--registry", "registry_path", required=True, help="Registry JSON (conditions, segments, stimuli).")
@click.option("--kind", type=click.Choice(["realism", "alignment"]), required=True)
@click.option("--output", default="-", help="Where to write the study plan.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--n-bootstrap", default=1000, type=int, show_default=True)
@click.option("--tasks-per-pair", default=None, type=int, help="Realism: segments drawn per pair (default all).")
@click.option("--conditions", default=None, help="Alignment: comma-separated condition subset.")
@click.option("--study-id", default=None)
@click.option(
    "--synthesize-stimuli",
    "synthesize",
    is_flag=True,
    default=False,
    help="Create opaque stimulus records for combinations the registry lacks.",
)
@cli_errors
def study_build(
    registry_path, kind, output, seed, n_bootstrap, tasks_per_pair, conditions,
    study_id, synthesize,
):
    """Generate a balanced task pool over a study registry."""
    registry = StudyRegistry.from_dict(_load_json(registry_path))
    if kind == "realism":
        plan = build_realism_plan(
            registry,
            seed=seed,
            n_bootstrap=n_bootstrap,
            tasks_per_pair=tasks_per_pair,
            synthesize=synthesize,
            study_id=study_id,
        )
    else:
        subset = conditions.split(",") if conditions else None
        plan = build_alignment_plan(
            registry,
            seed=seed,
            n_bootstrap=n_bootstrap,
            conditions=subset,
            synthesize=synthesize,
            study_id=study_id,
        )
    _write_output(canonical_json(plan.to_dict()), output)
    click.echo(f"built {kind} plan with {len(plan.tasks)} tasks", err=True)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

@main.group()
def simulate():
    """Synthetic vote generation."""


@simulate.command("votes")
@click.option("--plan", "plan_path", required=True)
@click.option("--truth", "truth_path", required=True, help="Planted-truth JSON.")
@click.option("--output", default="-", help="Where to write the vote log.")
@click.option("--votes-per-pair", default=None, type=int, help="Realism studies.")
@click.option("--takers", default=None, type=int, help="Alignment studies.")
@click.option("--pages", default=21, type=int, show_default=True, help="Pages per taker.")
@click.option("--seed", default=None, type=int, help="Overrides the truth file's seed.")
@cli_errors
def simulate_votes(plan_path, truth_path, output, votes_per_pair, takers, pages, seed):
    """Generate a vote log from planted ground truth."""
    plan = _load_plan(plan_path)
    truth = PlantedTruth.from_dict(_load_json(truth_path))
    if plan.study_kind is StudyKind.REALISM:
        if votes_per_pair is None:
            raise DomainValidationError("--votes-per-pair", "required for realism plans")
        votes = simulate_realism_votes(truth, plan, votes_per_pair, seed=seed)
    else:
        if takers is None:
            raise DomainValidationError("--takers", "required for alignment plans")
        votes = simulate_alignment_votes(truth, plan, takers, pages, seed=seed)
    _write_output(serialize_votes(votes), output)
    click.echo(f"simulated {len(votes)} votes", err=True)


# ---------------------------------------------------------------------------
# rank / score / report
# ---------------------------------------------------------------------------

@main.group()
def rank():
    """Leaderboards."""


@rank.command("elo")
@click.option("--plan", "plan_path", required=True)
@click.option("--votes", "votes_path", required=True)
@click.option("--output", default="-")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--seed", default=None, type=int, help="Bootstrap seed (default: plan seed).")
@click.option("--n-bootstrap", default=None, type=int, help="Default: plan setting.")
@click.option("--alpha", default=0.05, type=float, show_default=True)
@click.option("--unit", type=click.Choice(["battle", "taker"]), default="battle", show_default=True)
@click.option("--pairwise-csv", default=None, help="Also write the pairwise test matrix here.")
@click.option("--replicates-csv", default=None, help="Also write the bootstrap replicate matrix here.")
@cli_errors
def rank_elo(
    plan_path, votes_path, output, fmt, seed, n_bootstrap, alpha, unit,
    pairwise_csv, replicates_csv,
):
    """Bradley-Terry Elo leaderboard from a realism vote log."""
    plan = _load_plan(plan_path)
    report = analysis.leaderboard_report(
        plan,
        _read_text(votes_path),
        seed=seed,
        n_bootstrap=n_bootstrap,
        alpha=alpha,
        resample_unit=unit,
    )
    _write_output(_report_text(report, fmt, "rating"), output)
    if pairwise_csv:
        Path(pairwise_csv).write_text(_pairwise_csv(report))
    if replicates_csv:
        Path(replicates_csv).write_text(_replicates_csv(report))
    top = next(iter(report.estimates))
    click.echo(
        f"ranked {len(report.estimates)} conditions from {report.n_votes_used} votes; "
        f"top: {top}",
        err=True,
    )


@main.group()
def score():
    """Appropriateness scoring."""


@score.command("alignment")
@click.option("--plan", "plan_path", required=True)
@click.option("--votes", "votes_path", required=True)
@click.option("--output", default="-")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--n-bootstrap", default=None, type=int)
@click.option("--alpha", default=0.05, type=float, show_default=True)
@click.option("--pairwise-csv", default=None)
@click.option("--replicates-csv", default=None)
@cli_errors
def score_alignment(
    plan_path, votes_path, output, fmt, seed, n_bootstrap, alpha,
    pairwise_csv, replicates_csv,
):
    """Audio-mismatching appropriateness scores with taker-level bootstrap."""
    plan = _load_plan(plan_path)
    report = analysis.appropriateness_report(
        plan,
        _read_text(votes_path),
        seed=seed,
        n_bootstrap=n_bootstrap,
        alpha=alpha,
    )
    _write_output(_report_text(report, fmt, "score"), output)
    if pairwise_csv:
        Path(pairwise_csv).write_text(_pairwise_csv(report))
    if replicates_csv:
        Path(replicates_csv).write_text(_replicates_csv(report))
    click.echo(
        f"scored {len(report.estimates)} conditions from {report.n_votes_used} votes",
        err=True,
    )


@main.group()
def report():
    """Descriptive exports."""


@report.command("juice")
@click.option("--plan", "plan_path", required=True)
@click.option("--votes", "votes_path", required=True)
@click.option("--output", default="-")
@click.option("--condition", "conditions", multiple=True, help="Focus condition; repeatable (default: all).")
@click.option("--opponent", default=None, help="Realism: restrict to one opponent (default: the mocap condition).")
@click.option("--all-opponents", is_flag=True, default=False, help="Realism: aggregate against every opponent.")
@click.option(
    "--normalization",
    type=click.Choice(["comparisons", "ticks"]),
    default="comparisons",
    show_default=True,
)
@cli_errors
def report_juice(plan_path, votes_path, output, conditions, opponent, all_opponents, normalization):
    """Justification-option win/loss frequencies as CSV rows."""
    from .juice import profile_rows

    plan = _load_plan(plan_path)
    votes_text = _read_text(votes_path)
    mocap = plan.registry.mocap_condition
    if plan.study_kind is StudyKind.REALISM and not all_opponents and opponent is None:
        if mocap is None:
            raise DomainValidationError(
                "--opponent", "registry has no mocap condition; pass --opponent or --all-opponents"
            )
        opponent = mocap.id
    focus = list(conditions) or sorted(
        c for c in plan.registry.conditions if c != opponent
    )
    rows = []
    for cond in focus:
        profile = analysis.juice_profile(
            plan,
            votes_text,
            cond,
            opponent_filter=opponent if plan.study_kind is StudyKind.REALISM else None,
            normalization=normalization,
        )
        rows.extend(profile_rows(profile))
    text = _csv_text(
        ["condition", "option", "label", "win_fraction", "loss_fraction"],
        [[r["condition"], r["option"], r["label"], r["win_fraction"], r["loss_fraction"]] for r in rows],
    )
    _write_output(text, output)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

_METRIC_CHOICES = ["fgd", "fdg", "fdk", "ba", "srgr", "div_pose", "div_sample"]


@main.group(name="metrics")
def metrics_group():
    """Automatic motion metrics."""


@metrics_group.command("run")
@click.option("--reference", "reference_paths", multiple=True, help="Reference motion CSV; repeatable.")
@click.option("--generated", "generated_paths", multiple=True, required=True, help="Generated motion CSV; repeatable.")
@click.option("--metrics", "metric_list", default="fdg,fdk", show_default=True,
              help=f"Comma list from: {','.join(_METRIC_CHOICES)}.")
@click.option("--output", default="-")
@click.option("--window", default=30, type=int, show_default=True)
@click.option("--stride", default=15, type=int, show_default=True)
@click.option("--sigma", default=0.1, type=float, show_default=True, help="Beat-alignment kernel width (s).")
@click.option("--joint-threshold", default=0.1, type=float, show_default=True)
@click.option("--audio-beats", "audio_beats_path", default=None, help="Beat times, one per line (s).")
@click.option("--motion-beats", "motion_beats_path", default=None, help="Precomputed motion beats; default: detect.")
@click.option("--spans", "spans_path", default=None, help="Semantic spans CSV: start,end[,weight].")
@cli_errors
def metrics_run(
    reference_paths, generated_paths, metric_list, output, window, stride, sigma,
    joint_threshold, audio_beats_path, motion_beats_path, spans_path,
):
    """Evaluate the requested metrics over motion files."""
    wanted = [m.strip() for m in metric_list.split(",") if m.strip()]
    unknown = [m for m in wanted if m not in _METRIC_CHOICES]
    if unknown:
        raise DomainValidationError("--metrics", f"unknown metrics {unknown}")
    generated = [metrics_mod.load_motion(p) for p in generated_paths]
    reference = [metrics_mod.load_motion(p) for p in reference_paths]
    needs_ref = {"fgd", "fdg", "fdk", "srgr"} & set(wanted)
    if needs_ref and not reference:
        raise DomainValidationError("--reference", f"required for {sorted(needs_ref)}")
    rows: list[list] = []
    for name in wanted:
        if name == "fgd":
            value = metrics_mod.fgd(reference, generated, window=window, stride=stride)
        elif name == "fdg":
            value = metrics_mod.fd_geometric(reference, generated)
        elif name == "fdk":
            value = metrics_mod.fd_kinetic(reference, generated)
        elif name == "ba":
            if audio_beats_path is None:
                raise DomainValidationError("--audio-beats", "required for ba")
            audio_beats = metrics_mod.load_beat_times(audio_beats_path)
            if motion_beats_path is not None:
                beat_lists = [metrics_mod.load_beat_times(motion_beats_path)]
            else:
                beat_lists = [metrics_mod.detect_motion_beats(m) for m in generated]
            scores = [
                metrics_mod.beat_alignment(beats, audio_beats, sigma=sigma)
                for beats in beat_lists
            ]
            value = sum(scores) / len(scores)
        elif name == "srgr":
            if spans_path is None:
                raise DomainValidationError("--spans", "required for srgr")
            spans = metrics_mod.load_spans(spans_path)
            if len(reference) != len(generated):
                raise DomainValidationError(
                    "--generated", "srgr pairs reference and generated files one-to-one"
                )
            scores = [
                metrics_mod.srgr(r, g, spans, joint_threshold=joint_threshold)
                for r, g in zip(reference, generated)
            ]
            value = sum(scores) / len(scores)
        elif name == "div_pose":
            value = sum(metrics_mod.div_pose(m) for m in generated) / len(generated)
        else:
            value = metrics_mod.div_sample(generated)
        rows.append([name, value])
    _write_output(_csv_text(["metric", "value"], rows), output)


# ---------------------------------------------------------------------------
# correlate
# ---------------------------------------------------------------------------

@main.command("correlate")
@click.option("--xs", default=None, help="Comma-separated values.")
@click.option("--ys", default=None, help="Comma-separated values.")
@click.option("--metrics-csv", "metrics_csv", default=None, help="Table with a join column and metric columns.")
@click.option("--ratings-csv", "ratings_csv", default=None, help="Table with the join column and a rating column.")
@click.option("--join", "join_column", default="condition", show_default=True)
@click.option("--rating-column", default="rating", show_default=True)
@click.option("--output", default="-")
@cli_errors
def correlate(xs, ys, metrics_csv, ratings_csv, join_column, rating_column, output):
    """Kendall rank correlation of metric columns against ratings."""
    if xs is not None or ys is not None:
        if xs is None or ys is None:
            raise DomainValidationError("--xs", "--xs and --ys go together")
        x = [float(v) for v in xs.split(",")]
        y = [float(v) for v in ys.split(",")]
        tau = metrics_mod.kendall_tau(x, y)
        _write_output(_csv_text(["tau"], [[tau]]), output)
        return
    if metrics_csv is None or ratings_csv is None:
        raise DomainValidationError(
            "--metrics-csv", "pass either --xs/--ys or --metrics-csv/--ratings-csv"
        )
    with open(metrics_csv, newline="") as fh:
        metric_rows = list(csv.DictReader(fh))
    with open(ratings_csv, newline="") as fh:
        rating_rows = list(csv.DictReader(fh))
    ratings = {}
    for row in rating_rows:
        if join_column not in row or rating_column not in row:
            raise DomainValidationError(
                ratings_csv, f"needs columns {join_column!r} and {rating_column!r}"
            )
        ratings[row[join_column]] = float(row[rating_column])
    if not metric_rows:
        raise DomainValidationError(metrics_csv, "no rows")
    metric_columns = [c for c in metric_rows[0] if c != join_column]
    rows = []
    for column in metric_columns:
        xs_vals, ys_vals = [], []
        for row in metric_rows:
            key = row.get(join_column)
            if key in ratings:
                xs_vals.append(float(row[column]))
                ys_vals.append(ratings[key])
        if len(xs_vals) < 2:
            raise ComputationError(
                f"column {column!r} joins fewer than 2 rows with the ratings table"
            )
        rows.append([column, metrics_mod.kendall_tau(xs_vals, ys_vals)])
    _write_output(_csv_text(["metric", "tau"], rows), output)


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

@main.command("serve")
@click.option("--data-dir", required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--session-length", default=25, type=int, show_default=True)
@cli_errors
def serve(data_dir, host, port, seed, session_length):
    """Run the HTTP evaluation service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        data_dir=Path(data_dir), rng_seed=seed, session_length=session_length
    )
    app = create_app(config)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
