"""Bradley-Terry Elo rating engine for pairwise realism votes.

Votes expand into weighted battles (clear = one battle of weight 2,
slight = weight 1, tie = two half-weight battles, one per direction).
Ratings are the weighted maximum-likelihood solution of the logistic
pairwise model with log-odds(A beats B) = (R_A - R_B) * ln(base) / S,
shifted so the mean rating equals the anchor.  Uncertainty comes from
resampling battles (or test takers) with replacement and refitting.

The fit runs on aggregated win-weight matrices and is batched across
bootstrap replicates, so one Newton iteration advances every replicate
at once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import (
    ComparisonTask,
    Estimate,
    RatingReport,
    Response,
    Side,
    StudyKind,
    VoteRecord,
)
from .stats import (
    ComputationError,
    NonIdentifiableError,
    is_strongly_connected,
    pairwise_from_replicates,
    percentile_ci,
    undirected_components,
)


class BattleOutcome(str, Enum):
    A_WINS = "a_wins"
    B_WINS = "b_wins"
    HALF_HALF = "half_half"


@dataclass(frozen=True)
class Battle:
    """One weighted pairwise outcome between two conditions."""

    model_a: str
    model_b: str
    outcome: BattleOutcome
    weight: float

    def __post_init__(self):
        if self.model_a == self.model_b:
            raise ComputationError(f"battle pairs a condition with itself: {self.model_a!r}")
        if not (self.weight > 0.0 and math.isfinite(self.weight)):
            raise ComputationError(f"battle weight must be positive and finite, got {self.weight}")


@dataclass(frozen=True)
class EloConfig:
    scale: float = 400.0
    base: float = 10.0
    anchor_mean: float = 1000.0
    n_bootstrap: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if not self.scale > 0:
            raise ComputationError("scale must be positive")
        if not self.base > 1:
            raise ComputationError("base must exceed 1")
        if self.n_bootstrap < 1:
            raise ComputationError("n_bootstrap must be >= 1")

    @property
    def points_per_nat(self) -> float:
        """Elo points corresponding to one natural-log-odds unit."""
        return self.scale / math.log(self.base)


# Expanded-battle weights for the five-level response scale.
CLEAR_WEIGHT = 2.0
SLIGHT_WEIGHT = 1.0
TIE_HALF_WEIGHT = 0.5


def expand_votes(
    votes: Sequence[VoteRecord], tasks: Mapping[str, ComparisonTask]
) -> list[Battle]:
    """Expand preference votes into weighted battles.

    Clear preferences yield one battle of weight 2 for the winner, slight
    preferences weight 1, and ties yield two battles of weight 0.5, one
    win in each direction.
    """
    battles: list[Battle] = []
    for v in votes:
        if v.skipped:
            raise ComputationError(
                f"skipped record in vote expansion (session {v.session_id}, page {v.page_index})"
            )
        task = tasks.get(v.task_id)
        if task is None:
            raise ComputationError(f"vote references unknown task {v.task_id!r}")
        if task.is_attention_check:
            raise ComputationError(
                f"attention-check record in vote expansion (task {v.task_id!r})"
            )
        if task.study_kind is not StudyKind.REALISM:
            raise ComputationError(f"non-realism task {v.task_id!r} in realism expansion")
        left, right = task.left.condition_id, task.right.condition_id
        response = v.response
        assert response is not None
        if response.is_tie:
            battles.append(Battle(left, right, BattleOutcome.A_WINS, TIE_HALF_WEIGHT))
            battles.append(Battle(left, right, BattleOutcome.B_WINS, TIE_HALF_WEIGHT))
            continue
        weight = CLEAR_WEIGHT if response.is_clear else SLIGHT_WEIGHT
        if response.winning_side is Side.LEFT:
            battles.append(Battle(left, right, BattleOutcome.A_WINS, weight))
        else:
            battles.append(Battle(left, right, BattleOutcome.B_WINS, weight))
    return battles


def battle_conditions(battles: Sequence[Battle]) -> tuple[str, ...]:
    """All condition ids appearing in the battles, sorted."""
    names: set[str] = set()
    for b in battles:
        names.add(b.model_a)
        names.add(b.model_b)
    return tuple(sorted(names))


def _directed_entries(
    battles: Sequence[Battle], index: Mapping[str, int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten battles to (winner, loser, weight) arrays; half_half splits in two."""
    winners: list[int] = []
    losers: list[int] = []
    weights: list[float] = []
    for b in battles:
        ia, ib = index[b.model_a], index[b.model_b]
        if b.outcome is BattleOutcome.A_WINS:
            winners.append(ia)
            losers.append(ib)
            weights.append(b.weight)
        elif b.outcome is BattleOutcome.B_WINS:
            winners.append(ib)
            losers.append(ia)
            weights.append(b.weight)
        else:
            winners.extend((ia, ib))
            losers.extend((ib, ia))
            weights.extend((b.weight / 2.0, b.weight / 2.0))
    return (
        np.asarray(winners, dtype=np.int64),
        np.asarray(losers, dtype=np.int64),
        np.asarray(weights, dtype=float),
    )


def _win_matrix(
    winners: np.ndarray, losers: np.ndarray, weights: np.ndarray, n: int
) -> np.ndarray:
    codes = winners * n + losers
    return np.bincount(codes, weights=weights, minlength=n * n).reshape(n, n)


def _check_identifiable(win: np.ndarray, names: Sequence[str]) -> None:
    components = undirected_components(win)
    if len(components) > 1:
        named = [[names[i] for i in comp] for comp in components]
        raise NonIdentifiableError(
            f"comparison graph is disconnected; components: {named}", components=named
        )
    if not is_strongly_connected(win):
        raise NonIdentifiableError(
            "ratings diverge: some group of conditions never loses (or never wins) "
            "against the rest; collect opposing outcomes or ties before fitting"
        )


def _is_identifiable(win: np.ndarray) -> bool:
    return len(undirected_components(win)) == 1 and is_strongly_connected(win)


def _fit_batched(win: np.ndarray, tol: float = 1e-8, max_iter: int = 200) -> np.ndarray:
    """Newton solve of the weighted Bradley-Terry MLE on a batch of win matrices.

    ``win`` has shape (B, n, n), entry [b, i, j] = total weight of i's wins
    over j.  Returns natural parameters theta of shape (B, n), mean-centered.
    The gradient is g_i = sum_j (W_ij p_ji - W_ji p_ij) and the negative
    Hessian is the Laplacian of A = (W + W^T) * p * p^T, solved in the
    reduced space with node 0 pinned.
    """
    B, n, _ = win.shape
    theta = np.zeros((B, n))
    if n <= 1:
        return theta
    win_t = win.transpose(0, 2, 1)
    ridge = 1e-12 * np.eye(n - 1)
    idx = np.arange(n)
    for _ in range(max_iter):
        diff = theta[:, :, None] - theta[:, None, :]
        p = 1.0 / (1.0 + np.exp(-diff))
        grad = (win * p.transpose(0, 2, 1)).sum(axis=2) - (win_t * p).sum(axis=2)
        active = np.abs(grad).max(axis=1) > tol
        if not active.any():
            break
        adj = (win + win_t) * p * p.transpose(0, 2, 1)
        hess = -adj
        hess[:, idx, idx] += adj.sum(axis=2)
        step = np.linalg.solve(hess[:, 1:, 1:] + ridge, grad[:, 1:, None])[:, :, 0]
        theta[:, 1:] += np.where(active[:, None], step, 0.0)
        theta -= theta.mean(axis=1, keepdims=True)
    else:
        diff = theta[:, :, None] - theta[:, None, :]
        p = 1.0 / (1.0 + np.exp(-diff))
        grad = (win * p.transpose(0, 2, 1)).sum(axis=2) - (win_t * p).sum(axis=2)
        worst = float(np.abs(grad).max())
        raise ComputationError(
            f"rating fit did not converge in {max_iter} iterations (|grad| = {worst:.3g})"
        )
    return theta - theta.mean(axis=1, keepdims=True)


def fit_bradley_terry(battles: Sequence[Battle], cfg: EloConfig = EloConfig()) -> dict[str, float]:
    """Maximum-likelihood ratings, mean-anchored to ``cfg.anchor_mean``."""
    if not battles:
        raise ComputationError("no battles to fit")
    names = battle_conditions(battles)
    index = {name: i for i, name in enumerate(names)}
    winners, losers, weights = _directed_entries(battles, index)
    win = _win_matrix(winners, losers, weights, len(names))
    _check_identifiable(win, names)
    theta = _fit_batched(win[None, :, :])[0]
    ratings = theta * cfg.points_per_nat + cfg.anchor_mean
    return {name: float(ratings[i]) for i, name in enumerate(names)}


def predict_win_prob(r_a: float, r_b: float, cfg: EloConfig = EloConfig()) -> float:
    """Probability that a condition rated ``r_a`` beats one rated ``r_b``."""
    return 1.0 / (1.0 + cfg.base ** ((r_b - r_a) / cfg.scale))


def wald_intervals(
    battles: Sequence[Battle], cfg: EloConfig = EloConfig(), z: float = 1.959963984540054
) -> dict[str, Estimate]:
    """Asymptotic-normality intervals around the full-data MLE.

    A fast alternative to the bootstrap: the covariance of the anchored
    ratings is the centered inverse Fisher information at the fit.  The
    percentile bootstrap remains the authoritative interval.
    """
    if not battles:
        raise ComputationError("no battles to fit")
    names = battle_conditions(battles)
    index = {name: i for i, name in enumerate(names)}
    winners, losers, weights = _directed_entries(battles, index)
    n = len(names)
    win = _win_matrix(winners, losers, weights, n)
    _check_identifiable(win, names)
    theta = _fit_batched(win[None, :, :])[0]
    diff = theta[:, None] - theta[None, :]
    p = 1.0 / (1.0 + np.exp(-diff))
    adj = (win + win.T) * p * p.T
    info = -adj
    np.fill_diagonal(info, np.diag(info) + adj.sum(axis=1))
    cov_full = np.zeros((n, n))
    cov_full[1:, 1:] = np.linalg.inv(info[1:, 1:] + 1e-12 * np.eye(n - 1))
    center = np.eye(n) - 1.0 / n
    cov = center @ cov_full @ center.T
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None)) * cfg.points_per_nat
    ratings = theta * cfg.points_per_nat + cfg.anchor_mean
    return {
        name: Estimate(
            point=float(ratings[i]),
            ci_low=float(ratings[i] - z * se[i]),
            ci_high=float(ratings[i] + z * se[i]),
        )
        for i, name in enumerate(names)
    }


def pair_weight_totals(battles: Sequence[Battle]) -> dict[tuple[str, str], float]:
    """Total battle weight per unordered condition pair (keys sorted)."""
    totals: dict[tuple[str, str], float] = {}
    for b in battles:
        key = (b.model_a, b.model_b) if b.model_a < b.model_b else (b.model_b, b.model_a)
        totals[key] = totals.get(key, 0.0) + b.weight
    return totals


@dataclass(frozen=True)
class BootstrapResult:
    """Replicate ratings plus per-condition summaries."""

    conditions: tuple[str, ...]
    estimates: dict[str, Estimate]
    replicates: np.ndarray
    n_invalid_replicates: int


_MAX_RESAMPLE_ATTEMPTS = 100
_INVALID_WARN_FRACTION = 0.01


def _resample_matrices(
    winners: np.ndarray,
    losers: np.ndarray,
    weights: np.ndarray,
    n: int,
    n_bootstrap: int,
    seed: int,
    groups: Optional[np.ndarray],
) -> tuple[np.ndarray, int]:
    """Win matrices for every bootstrap replicate, plus the invalid-redraw count.

    Replicate ``i`` draws from ``default_rng([seed, i])`` so parallel and
    serial execution agree.  A draw whose comparison graph cannot be fit is
    redrawn from ``default_rng([seed, i, attempt])`` and counted.
    """
    codes = winners * n + losers
    n_entries = codes.shape[0]
    if groups is not None:
        unique_groups = np.unique(groups)
        members: list[np.ndarray] = [np.flatnonzero(groups == g) for g in unique_groups]
    matrices = np.empty((n_bootstrap, n, n))
    n_invalid = 0
    for i in range(n_bootstrap):
        rng = np.random.default_rng([seed, i])
        for attempt in range(_MAX_RESAMPLE_ATTEMPTS):
            if groups is None:
                picks = rng.integers(0, n_entries, n_entries)
            else:
                chosen = rng.integers(0, len(members), len(members))
                picks = np.concatenate([members[c] for c in chosen])
            mat = np.bincount(
                codes[picks], weights=weights[picks], minlength=n * n
            ).reshape(n, n)
            if _is_identifiable(mat):
                matrices[i] = mat
                break
            n_invalid += 1
            rng = np.random.default_rng([seed, i, attempt + 1])
        else:
            raise ComputationError(
                f"bootstrap replicate {i} produced no fittable resample in "
                f"{_MAX_RESAMPLE_ATTEMPTS} attempts"
            )
    return matrices, n_invalid


def bootstrap_ratings(
    battles: Sequence[Battle],
    cfg: EloConfig = EloConfig(),
    resample_unit: str = "battle",
    battle_takers: Optional[Sequence[str]] = None,
) -> BootstrapResult:
    """Refit ratings on ``cfg.n_bootstrap`` resamples and summarize per condition.

    ``resample_unit`` selects what is drawn with replacement: individual
    battles (default) or whole test takers, in which case ``battle_takers``
    must give the taker of each battle.  Point estimates are replicate
    means; intervals are 2.5/97.5 percentiles.
    """
    if not battles:
        raise ComputationError("no battles to fit")
    if resample_unit not in ("battle", "taker"):
        raise ComputationError(f"unknown resample unit {resample_unit!r}")
    names = battle_conditions(battles)
    index = {name: i for i, name in enumerate(names)}
    winners, losers, weights = _directed_entries(battles, index)
    n = len(names)
    full = _win_matrix(winners, losers, weights, n)
    _check_identifiable(full, names)

    groups = None
    if resample_unit == "taker":
        if battle_takers is None or len(battle_takers) != len(battles):
            raise ComputationError("taker resampling needs one taker id per battle")
        per_entry: list[str] = []
        for b, taker in zip(battles, battle_takers):
            per_entry.extend([taker] * (2 if b.outcome is BattleOutcome.HALF_HALF else 1))
        groups = np.asarray(per_entry)

    matrices, n_invalid = _resample_matrices(
        winners, losers, weights, n, cfg.n_bootstrap, cfg.rng_seed, groups
    )
    if n_invalid > _INVALID_WARN_FRACTION * cfg.n_bootstrap:
        warnings.warn(
            f"{n_invalid} of {cfg.n_bootstrap} bootstrap replicates were redrawn "
            "for unfittable comparison graphs; intervals may be optimistic",
            stacklevel=2,
        )
    theta = _fit_batched(matrices)
    replicates = theta * cfg.points_per_nat + cfg.anchor_mean
    ci_low, ci_high = percentile_ci(replicates)
    means = replicates.mean(axis=0)
    estimates = {
        name: Estimate(
            point=float(means[i]),
            ci_low=float(min(ci_low[i], means[i])),
            ci_high=float(max(ci_high[i], means[i])),
        )
        for i, name in enumerate(names)
    }
    return BootstrapResult(
        conditions=names,
        estimates=estimates,
        replicates=replicates,
        n_invalid_replicates=n_invalid,
    )


def pairwise_significance(
    replicates: np.ndarray, names: Sequence[str], alpha: float = 0.05
):
    """FDR-adjusted two-sided pairwise tests over replicate rating columns."""
    return pairwise_from_replicates(replicates, names, alpha)


def rank_battles(
    battles: Sequence[Battle],
    cfg: EloConfig = EloConfig(),
    alpha: float = 0.05,
    resample_unit: str = "battle",
    battle_takers: Optional[Sequence[str]] = None,
    n_votes_used: Optional[int] = None,
) -> RatingReport:
    """Full leaderboard report from expanded battles."""
    boot = bootstrap_ratings(
        battles, cfg, resample_unit=resample_unit, battle_takers=battle_takers
    )
    pairwise = pairwise_significance(boot.replicates, boot.conditions, alpha)
    ordered = sorted(
        boot.conditions, key=lambda name: (-boot.estimates[name].point, name)
    )
    return RatingReport(
        kind="elo_leaderboard",
        estimates={name: boot.estimates[name] for name in ordered},
        pairwise=pairwise,
        n_votes_used=len(battles) if n_votes_used is None else n_votes_used,
        n_bootstrap=cfg.n_bootstrap,
        seed=cfg.rng_seed,
        alpha=alpha,
        n_invalid_replicates=boot.n_invalid_replicates,
        degenerate=cfg.n_bootstrap < 2,
        conditions=boot.conditions,
        replicates=boot.replicates,
        pair_weights=pair_weight_totals(battles),
    )


def rank_votes(
    votes: Sequence[VoteRecord],
    tasks: Mapping[str, ComparisonTask],
    cfg: EloConfig = EloConfig(),
    alpha: float = 0.05,
    resample_unit: str = "battle",
) -> RatingReport:
    """Leaderboard report straight from realism votes.

    Taker-level resampling treats the vote's session as the taker, which
    holds because a taker participates in a study at most once.
    """
    battles = expand_votes(votes, tasks)
    takers: Optional[list[str]] = None
    if resample_unit == "taker":
        takers = []
        for v in votes:
            response = v.response
            assert response is not None
            takers.extend([v.session_id] * (2 if response.is_tie else 1))
        # expand_votes emits ties as two battles; align taker ids with battles.
        assert len(takers) == len(battles)
    return rank_battles(
        battles,
        cfg,
        alpha=alpha,
        resample_unit=resample_unit,
        battle_takers=takers,
        n_votes_used=len(votes),
    )


__all__ = [
    "Battle",
    "BattleOutcome",
    "BootstrapResult",
    "CLEAR_WEIGHT",
    "EloConfig",
    "SLIGHT_WEIGHT",
    "TIE_HALF_WEIGHT",
    "battle_conditions",
    "bootstrap_ratings",
    "expand_votes",
    "fit_bradley_terry",
    "pair_weight_totals",
    "pairwise_significance",
    "predict_win_prob",
    "rank_battles",
    "rank_votes",
    "wald_intervals",
]
