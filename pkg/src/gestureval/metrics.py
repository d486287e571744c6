"""Automatic motion metrics: Fréchet-distance family, beat alignment,
semantic gesture recall, diversity, and rank correlation.

Motion is a T x D matrix of pose channels at a fixed frame rate, loaded
from a CSV matrix plus a JSON manifest (fps, channel names, optional
joint grouping).  All metrics are deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .domain import DomainValidationError
from .stats import ComputationError, UndefinedScoreError


@dataclass(frozen=True)
class MotionSequence:
    """Pose-channel matrix with frame rate and channel metadata."""

    frames: np.ndarray
    fps: float
    channel_names: tuple[str, ...] = ()
    joints: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        object.__setattr__(self, "frames", frames)
        if frames.ndim != 2:
            raise DomainValidationError("motion.frames", "must be a T x D matrix")
        if not np.all(np.isfinite(frames)):
            raise DomainValidationError("motion.frames", "entries must be finite")
        if not self.fps > 0:
            raise DomainValidationError("motion.fps", "must be positive")
        if self.channel_names and len(self.channel_names) != frames.shape[1]:
            raise DomainValidationError(
                "motion.channel_names", "must match the channel count"
            )
        for name, idxs in self.joints.items():
            if any(i < 0 or i >= frames.shape[1] for i in idxs):
                raise DomainValidationError(
                    f"motion.joints[{name}]", "channel index out of range"
                )

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_channels(self) -> int:
        return self.frames.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.fps

    def joint_groups(self) -> dict[str, tuple[int, ...]]:
        """Configured joints, else one singleton group per channel."""
        if self.joints:
            return dict(self.joints)
        names = self.channel_names or tuple(f"ch{i}" for i in range(self.n_channels))
        return {name: (i,) for i, name in enumerate(names)}


@dataclass(frozen=True)
class GaussianSummary:
    """First two moments of a feature distribution."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if mean.ndim != 1:
            raise DomainValidationError("summary.mean", "must be a vector")
        if cov.shape != (mean.size, mean.size):
            raise DomainValidationError("summary.cov", "must be square and match the mean")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise DomainValidationError("summary", "moments must be finite")
        if not np.allclose(cov, cov.T, atol=1e-8):
            raise DomainValidationError("summary.cov", "must be symmetric")

    @classmethod
    def fit(cls, rows: np.ndarray) -> "GaussianSummary":
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] < 2:
            raise ComputationError("need >= 2 feature rows to fit a Gaussian summary")
        return cls(mean=rows.mean(axis=0), cov=np.cov(rows, rowvar=False).reshape(
            rows.shape[1], rows.shape[1]
        ))


@dataclass(frozen=True)
class SemanticSpan:
    start_s: float
    end_s: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise DomainValidationError("span.end_s", "must exceed start_s")
        if not self.weight > 0:
            raise DomainValidationError("span.weight", "must be positive")


@dataclass(frozen=True)
class FrechetResult:
    """Squared Fréchet distance with numerical diagnostics."""

    value: float
    negative_eigenvalue_clip: float
    condition_number: float


def _psd_sqrt(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetric PSD square root; returns the total negative-mass clipped."""
    vals, vecs = np.linalg.eigh(cov)
    clipped = float(-vals[vals < 0].sum())
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T, clipped


def frechet_details(a: GaussianSummary, b: GaussianSummary) -> FrechetResult:
    """Squared Fréchet distance between two Gaussian summaries.

    d^2 = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), computed via
    the eigendecomposition of S_b^{1/2} S_a S_b^{1/2}.  Negative eigenvalues
    from roundoff are clipped at zero and their magnitude reported.
    """
    if a.mean.shape != b.mean.shape:
        raise DomainValidationError(
            "summary.mean", f"dimension mismatch: {a.mean.shape} vs {b.mean.shape}"
        )
    sqrt_b, clip_b = _psd_sqrt(b.cov)
    inner = sqrt_b @ a.cov @ sqrt_b
    inner = (inner + inner.T) / 2.0
    vals = np.linalg.eigvalsh(inner)
    clip_inner = float(-vals[vals < 0].sum())
    vals = np.clip(vals, 0.0, None)
    trace_sqrt = float(np.sqrt(vals).sum())
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    value = mean_term + float(np.trace(a.cov) + np.trace(b.cov)) - 2.0 * trace_sqrt
    nonzero = vals[vals > 0]
    condition = float(nonzero.max() / nonzero.min()) if nonzero.size else float("inf")
    return FrechetResult(
        value=max(value, 0.0),
        negative_eigenvalue_clip=clip_b + clip_inner,
        condition_number=condition,
    )


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    return frechet_details(a, b).value


# ---------------------------------------------------------------------------
# Feature extraction and the Fréchet metric family
# ---------------------------------------------------------------------------

FeatureExtractor = Callable[[np.ndarray], np.ndarray]


def _default_window_features(window: np.ndarray) -> np.ndarray:
    """Per-window channel means, standard deviations, and mean |frame delta|."""
    means = window.mean(axis=0)
    stds = window.std(axis=0)
    if window.shape[0] > 1:
        deltas = np.abs(np.diff(window, axis=0)).mean(axis=0)
    else:
        deltas = np.zeros(window.shape[1])
    return np.concatenate([means, stds, deltas])


def extract_features(
    motion: MotionSequence,
    window: int = 30,
    stride: int = 15,
    extractor: Optional[FeatureExtractor] = None,
) -> np.ndarray:
    """Sliding-window feature rows (N x F) from one motion sequence."""
    if window < 1 or stride < 1:
        raise DomainValidationError("window", "window and stride must be >= 1")
    if motion.n_frames < window:
        raise ComputationError(
            f"motion has {motion.n_frames} frames, shorter than one window of {window}"
        )
    fn = extractor if extractor is not None else _default_window_features
    rows = [
        fn(motion.frames[start : start + window])
        for start in range(0, motion.n_frames - window + 1, stride)
    ]
    return np.stack(rows)


def fgd(
    reference: Sequence[MotionSequence],
    generated: Sequence[MotionSequence],
    window: int = 30,
    stride: int = 15,
    extractor: Optional[FeatureExtractor] = None,
) -> float:
    """Fréchet distance in feature space, pooled over all sequences per side."""
    ref_rows = np.concatenate(
        [extract_features(m, window, stride, extractor) for m in reference]
    )
    gen_rows = np.concatenate(
        [extract_features(m, window, stride, extractor) for m in generated]
    )
    return frechet_distance(GaussianSummary.fit(ref_rows), GaussianSummary.fit(gen_rows))


def _check_channels_aligned(
    reference: Sequence[MotionSequence], generated: Sequence[MotionSequence]
) -> None:
    dims = {m.n_channels for m in reference} | {m.n_channels for m in generated}
    if len(dims) != 1:
        raise DomainValidationError("motion.frames", f"channel counts differ: {sorted(dims)}")


def fd_geometric(
    reference: Sequence[MotionSequence], generated: Sequence[MotionSequence]
) -> float:
    """Fréchet distance between raw per-frame pose distributions."""
    _check_channels_aligned(reference, generated)
    ref = np.concatenate([m.frames for m in reference])
    gen = np.concatenate([m.frames for m in generated])
    return frechet_distance(GaussianSummary.fit(ref), GaussianSummary.fit(gen))


def _velocities(motion: MotionSequence) -> np.ndarray:
    if motion.n_frames < 2:
        raise ComputationError("kinetic metrics need >= 2 frames")
    return np.diff(motion.frames, axis=0) * motion.fps


def fd_kinetic(
    reference: Sequence[MotionSequence], generated: Sequence[MotionSequence]
) -> float:
    """Fréchet distance between frame-difference (velocity) distributions."""
    _check_channels_aligned(reference, generated)
    ref = np.concatenate([_velocities(m) for m in reference])
    gen = np.concatenate([_velocities(m) for m in generated])
    return frechet_distance(GaussianSummary.fit(ref), GaussianSummary.fit(gen))


# ---------------------------------------------------------------------------
# Beat alignment
# ---------------------------------------------------------------------------

DEFAULT_BEAT_SIGMA_S = 0.1


def beat_alignment(
    motion_beats: Sequence[float],
    audio_beats: Sequence[float],
    sigma: float = DEFAULT_BEAT_SIGMA_S,
) -> float:
    """Mean Gaussian-kernel proximity of each audio beat to its nearest
    motion beat.  No motion beats at all scores 0; no audio beats is an
    undefined score."""
    if not sigma > 0:
        raise DomainValidationError("sigma", "must be positive")
    audio = np.asarray(audio_beats, dtype=float)
    if audio.size == 0:
        raise UndefinedScoreError("beat alignment needs >= 1 audio beat")
    motion = np.asarray(motion_beats, dtype=float)
    if motion.size == 0:
        return 0.0
    diffs = audio[:, None] - motion[None, :]
    nearest_sq = np.min(diffs**2, axis=1)
    return float(np.mean(np.exp(-nearest_sq / (2.0 * sigma**2))))


def detect_motion_beats(
    motion: MotionSequence,
    smoothing_window: int = 5,
    threshold: Optional[float] = None,
) -> list[float]:
    """Kinematic beats: strict local minima of smoothed overall joint speed.

    Speed sample i covers the interval between frames i and i+1, so a
    beat at sample i lands at time (i + 0.5) / fps.  A threshold keeps
    only minima below it; constant or empty speed yields no beats.
    """
    if motion.n_frames < 3:
        raise ComputationError("beat detection needs >= 3 frames")
    if smoothing_window < 1:
        raise DomainValidationError("smoothing_window", "must be >= 1")
    speed = np.linalg.norm(_velocities(motion), axis=1)
    if smoothing_window > 1:
        kernel = np.ones(smoothing_window) / smoothing_window
        pad = smoothing_window // 2
        padded = np.pad(speed, pad, mode="edge")
        speed = np.convolve(padded, kernel, mode="valid")[: speed.size]
    cut = np.inf if threshold is None else threshold
    beats = []
    for i in range(1, speed.size - 1):
        if speed[i] < speed[i - 1] and speed[i] < speed[i + 1] and speed[i] < cut:
            beats.append((i + 0.5) / motion.fps)
    return beats


# ---------------------------------------------------------------------------
# Semantic gesture recall and diversity
# ---------------------------------------------------------------------------

DEFAULT_SRGR_THRESHOLD = 0.1


def srgr(
    reference: MotionSequence,
    generated: MotionSequence,
    spans: Sequence[SemanticSpan],
    joint_threshold: float = DEFAULT_SRGR_THRESHOLD,
) -> float:
    """Span-weighted fraction of joints within ``joint_threshold`` of the
    reference, over frames inside semantic spans."""
    if not spans:
        raise UndefinedScoreError("semantic recall needs >= 1 span")
    if reference.frames.shape != generated.frames.shape:
        raise DomainValidationError("motion.frames", "reference and generated shapes differ")
    if reference.joint_groups() != generated.joint_groups():
        raise DomainValidationError("motion.joints", "joint groupings differ")
    if not joint_threshold > 0:
        raise DomainValidationError("joint_threshold", "must be positive")
    groups = list(reference.joint_groups().values())
    fps = reference.fps
    total_weight = 0.0
    total_score = 0.0
    for k, span in enumerate(spans):
        start = int(np.ceil(span.start_s * fps - 1e-9))
        end = int(np.ceil(span.end_s * fps - 1e-9))
        end = min(end, reference.n_frames)
        if start < 0 or start >= end:
            raise DomainValidationError(
                f"spans[{k}]", "span lies outside the sequence duration"
            )
        recalled = 0
        counted = 0
        for idxs in groups:
            diff = reference.frames[start:end, list(idxs)] - generated.frames[
                start:end, list(idxs)
            ]
            err = np.linalg.norm(diff, axis=1)
            recalled += int(np.count_nonzero(err < joint_threshold))
            counted += err.size
        total_score += span.weight * (recalled / counted)
        total_weight += span.weight
    return total_score / total_weight


def div_pose(motion: MotionSequence) -> float:
    """Mean L2 distance of each frame's pose from the time-mean pose."""
    center = motion.frames.mean(axis=0)
    return float(np.mean(np.linalg.norm(motion.frames - center, axis=1)))


def div_sample(samples: Sequence[MotionSequence]) -> float:
    """Mean pairwise frame-averaged L2 distance across same-input samples."""
    if len(samples) < 2:
        raise ComputationError("sample diversity needs >= 2 samples")
    shapes = {s.frames.shape for s in samples}
    if len(shapes) != 1:
        raise DomainValidationError("samples", f"frame shapes differ: {sorted(shapes)}")
    total = 0.0
    count = 0
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            dists = np.linalg.norm(samples[i].frames - samples[j].frames, axis=1)
            total += float(dists.mean())
            count += 1
    return total / count


# ---------------------------------------------------------------------------
# Rank correlation
# ---------------------------------------------------------------------------

def kendall_tau(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Kendall tau-b over paired observations (O(n^2) pair count).

    Ties within either list reduce the denominator; an input where either
    list is entirely tied has no defined rank correlation.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainValidationError("xs", "inputs must be equal-length vectors")
    n = x.size
    if n < 2:
        raise ComputationError("rank correlation needs >= 2 observations")
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                ties_x += 1
                ties_y += 1
            elif dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom_sq = (n0 - ties_x) * (n0 - ties_y)
    if denom_sq == 0:
        raise ComputationError("rank correlation undefined: an input is entirely tied")
    return (concordant - discordant) / float(np.sqrt(denom_sq))


# ---------------------------------------------------------------------------
# I/O: motion CSV + manifest, beat lists, span tables
# ---------------------------------------------------------------------------

def load_motion(csv_path: str | Path, manifest_path: Optional[str | Path] = None) -> MotionSequence:
    """Load a motion matrix CSV with its JSON manifest sidecar.

    The manifest provides fps and optionally channel names and joint
    groupings; by default it sits next to the CSV with suffix .json.
    """
    csv_path = Path(csv_path)
    manifest_path = (
        Path(manifest_path) if manifest_path is not None else csv_path.with_suffix(".json")
    )
    try:
        frames = np.loadtxt(csv_path, delimiter=",", ndmin=2)
        manifest = json.loads(manifest_path.read_text())
    except OSError:
        raise
    except ValueError as exc:
        raise DomainValidationError(str(csv_path), f"unreadable motion matrix: {exc}") from None
    if not isinstance(manifest, dict) or "fps" not in manifest:
        raise DomainValidationError(str(manifest_path), "manifest must provide fps")
    return MotionSequence(
        frames=frames,
        fps=float(manifest["fps"]),
        channel_names=tuple(manifest.get("channels", ())),
        joints={k: tuple(v) for k, v in manifest.get("joints", {}).items()},
    )


def save_motion(motion: MotionSequence, csv_path: str | Path) -> None:
    csv_path = Path(csv_path)
    np.savetxt(csv_path, motion.frames, delimiter=",")
    manifest = {"fps": motion.fps}
    if motion.channel_names:
        manifest["channels"] = list(motion.channel_names)
    if motion.joints:
        manifest["joints"] = {k: list(v) for k, v in motion.joints.items()}
    csv_path.with_suffix(".json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_beat_times(path: str | Path) -> list[float]:
    """One beat time in seconds per line; blank lines ignored."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.strip()
        if not text:
            continue
        try:
            out.append(float(text))
        except ValueError:
            raise DomainValidationError(
                f"{path}:{lineno}", f"not a number: {text!r}"
            ) from None
    return out


def load_spans(path: str | Path) -> list[SemanticSpan]:
    """Span table: 'start,end[,weight]' per line, header allowed."""
    spans = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.strip()
        if not text or text.lower().startswith("start"):
            continue
        parts = [p.strip() for p in text.split(",")]
        try:
            start, end = float(parts[0]), float(parts[1])
            weight = float(parts[2]) if len(parts) > 2 and parts[2] else 1.0
        except (IndexError, ValueError):
            raise DomainValidationError(
                f"{path}:{lineno}", f"expected 'start,end[,weight]', got {text!r}"
            ) from None
        spans.append(SemanticSpan(start_s=start, end_s=end, weight=weight))
    return spans


__all__ = [
    "DEFAULT_BEAT_SIGMA_S",
    "DEFAULT_SRGR_THRESHOLD",
    "FrechetResult",
    "GaussianSummary",
    "MotionSequence",
    "SemanticSpan",
    "beat_alignment",
    "detect_motion_beats",
    "div_pose",
    "div_sample",
    "extract_features",
    "fd_geometric",
    "fd_kinetic",
    "fgd",
    "frechet_details",
    "frechet_distance",
    "kendall_tau",
    "load_beat_times",
    "load_motion",
    "load_spans",
    "save_motion",
    "srgr",
]
