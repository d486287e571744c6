"""Automatic motion metrics: Fréchet family, beats, recall, diversity, tau."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gestureval.domain import DomainValidationError
from gestureval.metrics import (
    GaussianSummary,
    MotionSequence,
    SemanticSpan,
    beat_alignment,
    detect_motion_beats,
    div_pose,
    div_sample,
    extract_features,
    fd_geometric,
    fd_kinetic,
    fgd,
    frechet_details,
    frechet_distance,
    kendall_tau,
    load_motion,
    load_spans,
    save_motion,
    srgr,
)
from gestureval.stats import ComputationError, UndefinedScoreError


def _motion(frames: np.ndarray, fps: float = 30.0) -> MotionSequence:
    return MotionSequence(frames=np.asarray(frames, dtype=float), fps=fps)


def _gauss(mean, cov) -> GaussianSummary:
    return GaussianSummary(
        mean=np.atleast_1d(np.asarray(mean, dtype=float)),
        cov=np.atleast_2d(np.asarray(cov, dtype=float)),
    )


# ---------------------------------------------------------------------------
# Fréchet distance
# ---------------------------------------------------------------------------

def test_frechet_identical_summaries_zero():
    g = _gauss([1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]])
    assert frechet_distance(g, g) == pytest.approx(0.0, abs=1e-9)


def test_frechet_1d_mean_shift():
    assert frechet_distance(_gauss(0.0, 1.0), _gauss(3.0, 1.0)) == pytest.approx(
        9.0, abs=1e-9
    )


def test_frechet_1d_variance_gap():
    # (sigma_a - sigma_b)^2 = (1 - 2)^2 = 1 for variances 1 and 4.
    assert frechet_distance(_gauss(0.0, 1.0), _gauss(0.0, 4.0)) == pytest.approx(
        1.0, abs=1e-9
    )


def test_frechet_diagonal_closed_form():
    a = _gauss([0.0, 1.0], np.diag([1.0, 4.0]))
    b = _gauss([2.0, 1.0], np.diag([9.0, 1.0]))
    expected = 4.0 + (1.0 - 3.0) ** 2 + (2.0 - 1.0) ** 2
    assert frechet_distance(a, b) == pytest.approx(expected, abs=1e-9)


def test_frechet_symmetry_and_nonnegativity():
    rng = np.random.default_rng(3)
    for _ in range(10):
        m = rng.normal(size=(40, 3))
        n = rng.normal(size=(40, 3)) * 2.0 + 1.0
        a = GaussianSummary.fit(m)
        b = GaussianSummary.fit(n)
        d_ab = frechet_distance(a, b)
        d_ba = frechet_distance(b, a)
        assert d_ab >= 0.0
        assert d_ab == pytest.approx(d_ba, rel=1e-8, abs=1e-10)


def test_frechet_singular_covariance_reports_clip():
    # Rank-deficient covariance: the sqrt eigenvalues clip at zero.
    a = _gauss([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])
    b = _gauss([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    details = frechet_details(a, b)
    assert details.value >= 0.0
    assert math.isfinite(details.condition_number) or details.condition_number == math.inf


def test_frechet_dimension_mismatch():
    with pytest.raises(DomainValidationError):
        frechet_distance(_gauss([0.0], [[1.0]]), _gauss([0.0, 0.0], np.eye(2)))


def test_gaussian_fit_needs_two_rows():
    with pytest.raises(ComputationError):
        GaussianSummary.fit(np.ones((1, 3)))


# ---------------------------------------------------------------------------
# feature extraction and FGD
# ---------------------------------------------------------------------------

def test_constant_motion_features_have_zero_spread():
    motion = _motion(np.ones((60, 4)) * 2.5)
    rows = extract_features(motion, window=30, stride=15)
    dim = motion.frames.shape[1]
    means = rows[:, :dim]
    stds = rows[:, dim : 2 * dim]
    deltas = rows[:, 2 * dim :]
    assert np.allclose(means, 2.5)
    assert np.allclose(stds, 0.0)
    assert np.allclose(deltas, 0.0)


def test_window_equal_to_length_yields_single_row():
    motion = _motion(np.arange(40.0).reshape(20, 2))
    rows = extract_features(motion, window=20, stride=20)
    assert rows.shape[0] == 1


def test_window_longer_than_motion_is_an_error():
    with pytest.raises(ComputationError):
        extract_features(_motion(np.ones((10, 2))), window=30, stride=15)


def test_offset_shifts_feature_means_only():
    rng = np.random.default_rng(0)
    base = rng.normal(size=(90, 3))
    offset = np.array([1.0, -2.0, 0.5])
    rows_a = extract_features(_motion(base), window=30, stride=15)
    rows_b = extract_features(_motion(base + offset), window=30, stride=15)
    dim = 3
    assert np.allclose(rows_b[:, :dim] - rows_a[:, :dim], offset, atol=1e-12)
    assert np.allclose(rows_b[:, dim:], rows_a[:, dim:], atol=1e-12)


def test_fgd_zero_on_identical_sets_and_orders_corruption():
    rng = np.random.default_rng(1)
    reference = [_motion(rng.normal(size=(120, 4))) for _ in range(4)]
    assert fgd(reference, reference) == pytest.approx(0.0, abs=1e-8)

    subset = reference[:-1]
    shuffled = [
        _motion(m.frames[:, ::-1] * 1.5 + 3.0) for m in reference
    ]
    d_subset = fgd(reference, subset)
    d_shuffled = fgd(reference, shuffled)
    assert 0.0 <= d_subset < d_shuffled


# ---------------------------------------------------------------------------
# raw-space Fréchet distances
# ---------------------------------------------------------------------------

def test_fdg_translation_sensitive_fdk_translation_invariant():
    rng = np.random.default_rng(2)
    base = rng.normal(size=(200, 5))
    offset = np.full(5, 2.0)
    reference = [_motion(base)]
    generated = [_motion(base + offset)]
    assert fd_geometric(reference, generated) == pytest.approx(
        float(offset @ offset), abs=1e-9
    )
    assert fd_kinetic(reference, generated) == pytest.approx(0.0, abs=1e-9)


def test_fd_zero_on_identical_sets():
    rng = np.random.default_rng(3)
    seqs = [_motion(rng.normal(size=(100, 3))) for _ in range(3)]
    assert fd_geometric(seqs, seqs) == pytest.approx(0.0, abs=1e-9)
    assert fd_kinetic(seqs, seqs) == pytest.approx(0.0, abs=1e-9)


def test_fdk_detects_speed_change():
    t = np.linspace(0.0, 4.0 * np.pi, 240)
    slow = np.column_stack([np.sin(t), np.cos(t)])
    fast = slow[::2]
    d_k = fd_kinetic([_motion(slow)], [_motion(fast, fps=30.0)])
    d_g = fd_geometric([_motion(slow)], [_motion(fast, fps=30.0)])
    assert d_k > d_g
    assert d_g == pytest.approx(0.0, abs=1e-2)


# ---------------------------------------------------------------------------
# beats
# ---------------------------------------------------------------------------

def test_beat_alignment_perfect_match():
    beats = [0.5, 1.0, 1.5]
    assert beat_alignment(beats, beats) == pytest.approx(1.0, abs=1e-12)


def test_beat_alignment_single_sigma_offset():
    assert beat_alignment([1.0], [1.1], sigma=0.1) == pytest.approx(
        math.exp(-0.5), abs=1e-12
    )


def test_beat_alignment_empty_motion_scores_zero():
    assert beat_alignment([], [0.5, 1.0]) == 0.0


def test_beat_alignment_empty_audio_is_undefined():
    with pytest.raises(UndefinedScoreError):
        beat_alignment([0.5], [])


def test_constant_velocity_motion_has_no_beats():
    # Exact dyadic steps keep the speed bitwise constant frame to frame.
    frames = (np.arange(90.0) * 0.125)[:, None] * np.ones((1, 3))
    assert detect_motion_beats(_motion(frames)) == []


def test_all_zero_motion_has_no_beats():
    assert detect_motion_beats(_motion(np.zeros((60, 3)))) == []


def test_pendulum_beats_at_direction_reversals():
    fps = 30.0
    t = np.arange(0, 3.0, 1.0 / fps)
    frames = np.sin(2.0 * np.pi * 1.0 * t)[:, None]  # 1 Hz pendulum
    beats = detect_motion_beats(_motion(frames, fps=fps))
    # Speed minima sit at the extremes: every half period, 0.25 + k*0.5 s.
    expected = np.arange(0.25, 2.8, 0.5)
    assert len(beats) >= len(expected) - 1
    for b in beats:
        assert min(abs(b - e) for e in expected) <= 1.0 / fps + 1e-9


def test_beats_need_three_frames():
    with pytest.raises(ComputationError):
        detect_motion_beats(_motion(np.zeros((2, 2))))


# ---------------------------------------------------------------------------
# semantic-relevance recall
# ---------------------------------------------------------------------------

def _srgr_pair(n_joints: int = 8, corrupt: int = 0):
    rng = np.random.default_rng(5)
    frames = rng.normal(size=(90, n_joints * 3))
    reference = MotionSequence(
        frames=frames, fps=30.0,
        joints={f"j{j}": tuple(range(j * 3, j * 3 + 3)) for j in range(n_joints)},
    )
    corrupted = frames.copy()
    for j in range(corrupt):
        corrupted[:, j * 3 : j * 3 + 3] += 10.0
    generated = MotionSequence(frames=corrupted, fps=30.0, joints=reference.joints)
    return reference, generated


def test_srgr_identical_is_one():
    ref, gen = _srgr_pair(corrupt=0)
    spans = [SemanticSpan(start_s=0.5, end_s=2.0)]
    assert srgr(ref, gen, spans) == pytest.approx(1.0)


def test_srgr_half_corrupted_is_half():
    ref, gen = _srgr_pair(n_joints=8, corrupt=4)
    spans = [SemanticSpan(start_s=0.0, end_s=3.0)]
    assert srgr(ref, gen, spans) == pytest.approx(0.5)


def test_srgr_weights_spans():
    ref, gen_half = _srgr_pair(n_joints=8, corrupt=4)
    _, gen_clean = _srgr_pair(n_joints=8, corrupt=0)
    # Same motion pair, two spans with different weights on the half-corrupted
    # sequence still average to 0.5; weighting only matters across spans.
    spans = [
        SemanticSpan(start_s=0.0, end_s=1.0, weight=3.0),
        SemanticSpan(start_s=1.0, end_s=2.0, weight=1.0),
    ]
    assert srgr(ref, gen_half, spans) == pytest.approx(0.5)
    assert srgr(ref, gen_clean, spans) == pytest.approx(1.0)


def test_srgr_empty_spans_is_undefined():
    ref, gen = _srgr_pair()
    with pytest.raises(UndefinedScoreError):
        srgr(ref, gen, [])


def test_srgr_span_outside_motion_rejected():
    ref, gen = _srgr_pair()
    with pytest.raises(DomainValidationError):
        srgr(ref, gen, [SemanticSpan(start_s=10.0, end_s=11.0)])


# ---------------------------------------------------------------------------
# diversity
# ---------------------------------------------------------------------------

def test_constant_pose_div_zero():
    assert div_pose(_motion(np.ones((50, 6)))) == pytest.approx(0.0)


def test_identical_samples_div_zero():
    m = _motion(np.arange(30.0).reshape(10, 3))
    assert div_sample([m, m, m]) == pytest.approx(0.0)


def test_two_single_frame_samples_at_distance_three():
    a = _motion(np.array([[0.0, 0.0, 0.0]]))
    b = _motion(np.array([[3.0, 0.0, 0.0]]))
    assert div_sample([a, b]) == pytest.approx(3.0)


def test_div_sample_needs_two_equal_shape_samples():
    m = _motion(np.ones((4, 2)))
    with pytest.raises(ComputationError):
        div_sample([m])
    with pytest.raises(DomainValidationError):
        div_sample([m, _motion(np.ones((5, 2)))])


# ---------------------------------------------------------------------------
# Kendall rank correlation
# ---------------------------------------------------------------------------

def test_kendall_identical_rankings():
    assert kendall_tau([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)


def test_kendall_reversed_rankings():
    assert kendall_tau([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)


def test_kendall_one_third_case():
    assert kendall_tau([1, 2, 3], [1, 3, 2]) == pytest.approx(1.0 / 3.0)


def test_kendall_all_tied_is_an_error():
    with pytest.raises(ComputationError):
        kendall_tau([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def _tau_b_oracle(xs, ys) -> float:
    concordant = discordant = tx = ty = 0
    n = len(xs)
    for i in range(n):
        for j in range(i + 1, n):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            if dx == 0 and dy == 0:
                tx += 1
                ty += 1
            elif dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) / 2
    return (concordant - discordant) / math.sqrt((n0 - tx) * (n0 - ty))


def test_kendall_matches_brute_force_on_all_permutations():
    for n in range(2, 7):
        xs = list(range(1, n + 1))
        for perm in itertools.permutations(range(1, n + 1)):
            assert kendall_tau(xs, list(perm)) == pytest.approx(
                _tau_b_oracle(xs, list(perm)), abs=1e-12
            )


@settings(max_examples=150)
@given(
    st.lists(st.integers(0, 5), min_size=2, max_size=12),
    st.lists(st.integers(0, 5), min_size=2, max_size=12),
)
def test_kendall_tau_b_matches_oracle_with_ties(xs, ys):
    n = min(len(xs), len(ys))
    xs, ys = xs[:n], ys[:n]
    if len(set(xs)) < 2 or len(set(ys)) < 2:
        with pytest.raises(ComputationError):
            kendall_tau(xs, ys)
    else:
        assert kendall_tau(xs, ys) == pytest.approx(_tau_b_oracle(xs, ys), abs=1e-12)


def test_kendall_length_mismatch():
    with pytest.raises(DomainValidationError):
        kendall_tau([1, 2], [1, 2, 3])


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def test_motion_round_trip(tmp_path):
    motion = MotionSequence(
        frames=np.arange(24.0).reshape(8, 3),
        fps=25.0,
        channel_names=("x", "y", "z"),
        joints={"hand": (0, 1, 2)},
    )
    path = tmp_path / "clip.csv"
    save_motion(motion, path)
    loaded = load_motion(path)
    assert np.allclose(loaded.frames, motion.frames)
    assert loaded.fps == 25.0
    assert loaded.channel_names == ("x", "y", "z")
    assert dict(loaded.joints) == {"hand": (0, 1, 2)}


def test_load_spans_with_header_and_weights(tmp_path):
    path = tmp_path / "spans.csv"
    path.write_text("start,end,weight\n0.5,2.0,2.0\n3.0,4.0\n")
    spans = load_spans(path)
    assert spans == [
        SemanticSpan(start_s=0.5, end_s=2.0, weight=2.0),
        SemanticSpan(start_s=3.0, end_s=4.0, weight=1.0),
    ]
