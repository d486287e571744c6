"""Shared statistical primitives: percentile intervals, bootstrap p-values,
Benjamini-Hochberg adjustment, and comparison-graph connectivity checks.

All functions are pure and operate on numpy arrays.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .domain import PairwiseStat


class ComputationError(Exception):
    """Analysis cannot produce a defined result for this input."""


class UndefinedScoreError(ComputationError):
    """A score was requested over an empty or all-tied observation set."""


class NonIdentifiableError(ComputationError):
    """The comparison graph does not pin down a unique rating solution."""

    def __init__(self, message: str, components: Sequence[Sequence[str]] = ()):
        self.components = [list(c) for c in components]
        super().__init__(message)


def percentile_ci(samples: np.ndarray, low: float = 2.5, high: float = 97.5) -> tuple[float, float]:
    """Percentile bootstrap interval endpoints along the first axis."""
    lo, hi = np.percentile(samples, [low, high], axis=0)
    return lo, hi


def two_sided_bootstrap_p(diffs: np.ndarray) -> float:
    """Two-sided p-value of 'difference = 0' under a bootstrap distribution.

    p = 2 * min(frac(diff <= 0), frac(diff >= 0)), floored at 1/n so a
    resampling run can never claim more resolution than it has, capped at 1.
    """
    n = diffs.shape[0]
    if n == 0:
        raise ComputationError("empty replicate vector")
    frac_le = float(np.mean(diffs <= 0.0))
    frac_ge = float(np.mean(diffs >= 0.0))
    return min(1.0, max(2.0 * min(frac_le, frac_ge), 1.0 / n))


def benjamini_hochberg(p_values: Sequence[float]) -> np.ndarray:
    """Step-up adjusted p-values: p_(i) * m / i, monotonized from the largest down."""
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise ComputationError("p-value vector must be 1-D")
    if p.size == 0:
        return p
    if np.any((p < 0.0) | (p > 1.0)):
        raise ComputationError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(ranked[::-1])[::-1]
    adjusted = np.minimum(adjusted, 1.0)
    out = np.empty(m, dtype=float)
    out[order] = adjusted
    return out


def pairwise_from_replicates(
    replicates: np.ndarray,
    names: Sequence[str],
    alpha: float = 0.05,
) -> tuple[PairwiseStat, ...]:
    """FDR-adjusted two-sided tests over all column pairs of a replicate matrix."""
    reps = np.asarray(replicates, dtype=float)
    if reps.ndim != 2 or reps.shape[1] != len(names):
        raise ComputationError("replicate matrix must be (n_bootstrap, n_conditions)")
    n = len(names)
    if n < 2:
        raise ComputationError("pairwise tests need at least 2 conditions")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    p_raw = [two_sided_bootstrap_p(reps[:, i] - reps[:, j]) for i, j in pairs]
    p_fdr = benjamini_hochberg(p_raw)
    return tuple(
        PairwiseStat(
            a=names[i],
            b=names[j],
            p_raw=p_raw[k],
            p_fdr=float(p_fdr[k]),
            significant=bool(p_fdr[k] <= alpha),
        )
        for k, (i, j) in enumerate(pairs)
    )


# ---------------------------------------------------------------------------
# Comparison-graph structure
# ---------------------------------------------------------------------------

def undirected_components(adjacency: np.ndarray) -> list[list[int]]:
    """Connected components of the symmetrized positive-weight graph."""
    n = adjacency.shape[0]
    linked = (adjacency > 0) | (adjacency.T > 0)
    seen = np.zeros(n, dtype=bool)
    components = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in np.flatnonzero(linked[v]):
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        components.append(sorted(comp))
    return components


def is_strongly_connected(adjacency: np.ndarray) -> bool:
    """Whether every node reaches every other along positive-weight edges.

    On a win-count matrix this is the existence condition for a finite
    maximum-likelihood rating solution.
    """
    n = adjacency.shape[0]
    if n <= 1:
        return True
    forward = adjacency > 0
    return _reaches_all(forward, 0) and _reaches_all(forward.T, 0)


def _reaches_all(edges: np.ndarray, start: int) -> bool:
    n = edges.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        v = stack.pop()
        for w in np.flatnonzero(edges[v]):
            if not seen[w]:
                seen[w] = True
                stack.append(int(w))
    return bool(seen.all())


__all__ = [
    "ComputationError",
    "NonIdentifiableError",
    "UndefinedScoreError",
    "benjamini_hochberg",
    "is_strongly_connected",
    "pairwise_from_replicates",
    "percentile_ci",
    "two_sided_bootstrap_p",
    "undirected_components",
]
