"""Agglomerative clustering of recognition hypotheses.

Average-linkage AHC over the normalized edit distance between hypothesis
texts (speaker tokens are ignored for distances, retained for reporting).
Two stop rules share one deterministic merge order: a linkage threshold
(speaker count unknown) or a fixed cluster count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError
from .textdist import WordSeq, normalized_edit_distance


@dataclass(frozen=True)
class Hypothesis:
    """One decoder output: prompt token, token-free text, model score."""

    speaker_token: int
    text: WordSeq
    score: float
    source_rank: int = 0


@dataclass(frozen=True)
class MergeStep:
    left: tuple[int, ...]
    right: tuple[int, ...]
    linkage: float


@dataclass
class HypothesisClustering:
    """A partition of the input hypotheses (no loss, no duplication).

    `member_indices[i]` gives the original input indices of `clusters[i]`;
    `merges` is the ordered trace of applied merges with linkage values.
    """

    clusters: list[list[Hypothesis]]
    method: str
    threshold: float | None = None
    member_indices: list[tuple[int, ...]] = field(default_factory=list)
    merges: list[MergeStep] = field(default_factory=list)


def pairwise_matrix(
    hyps: list[Hypothesis],
    metric: Callable[[WordSeq, WordSeq], float] = normalized_edit_distance,
) -> np.ndarray:
    """Symmetric matrix of text distances with a zero diagonal."""
    if not hyps:
        raise ValidationError("no hypotheses")
    n = len(hyps)
    mat = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            d = metric(hyps[i].text, hyps[j].text)
            mat[i, j] = d
            mat[j, i] = d
    return mat


def _pair_key(a: tuple[int, ...], b: tuple[int, ...]) -> tuple:
    # deterministic tie-break: smallest (min member, max member), then the
    # full sorted union for the rare case both coincide
    union = tuple(sorted(a + b))
    return (union[0], union[-1], union)


def _merge_sequence(dist: np.ndarray) -> list[MergeStep]:
    """Full average-linkage agglomeration order down to one cluster.

    Maintains summed inter-cluster distances so the average linkage is
    exact: linkage(A, B) = sum / (|A| * |B|).
    """
    clusters: list[tuple[int, ...]] = [(i,) for i in range(dist.shape[0])]
    sums: dict[tuple[tuple[int, ...], tuple[int, ...]], float] = {}
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            sums[(clusters[i], clusters[j])] = float(dist[i, j])

    def pair_sum(a, b):
        return sums[(a, b)] if (a, b) in sums else sums[(b, a)]

    steps = []
    while len(clusters) > 1:
        best = None
        best_rank = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                a, b = clusters[i], clusters[j]
                linkage = pair_sum(a, b) / (len(a) * len(b))
                rank = (linkage,) + _pair_key(a, b)
                if best_rank is None or rank < best_rank:
                    best_rank = rank
                    best = (a, b, linkage)
        a, b, linkage = best
        merged = tuple(sorted(a + b))
        steps.append(MergeStep(left=a, right=b, linkage=linkage))
        clusters = [c for c in clusters if c is not a and c is not b]
        for c in clusters:
            sums[(merged, c)] = pair_sum(a, c) + pair_sum(b, c)
        clusters.append(merged)
        clusters.sort()
    return steps


def _replay(
    hyps: list[Hypothesis],
    steps: list[MergeStep],
    stop: Callable[[int, MergeStep], bool],
) -> tuple[list[tuple[int, ...]], list[MergeStep]]:
    parts = {(i,) for i in range(len(hyps))}
    applied = []
    for step in steps:
        if stop(len(parts), step):
            break
        parts.remove(step.left)
        parts.remove(step.right)
        parts.add(tuple(sorted(step.left + step.right)))
        applied.append(step)
    return sorted(parts), applied


def ahc_threshold(hyps: list[Hypothesis], threshold: float) -> HypothesisClustering:
    """Merge bottom-up while the minimum average linkage stays <= threshold.

    The cluster count that falls out is the estimated speaker count.
    """
    if not hyps:
        raise ValidationError("no hypotheses")
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold must be in [0, 1], got {threshold}")
    steps = _merge_sequence(pairwise_matrix(hyps))
    parts, applied = _replay(hyps, steps, lambda n, s: s.linkage > threshold)
    return HypothesisClustering(
        clusters=[[hyps[i] for i in part] for part in parts],
        method="threshold-ahc",
        threshold=threshold,
        member_indices=parts,
        merges=applied,
    )


def cluster_fixed_k(hyps: list[Hypothesis], k: int) -> HypothesisClustering:
    """Same merge order as `ahc_threshold`, stopping at exactly k clusters."""
    if not hyps:
        raise ValidationError("no hypotheses")
    if not 1 <= k <= len(hyps):
        raise ValidationError(f"K must be in [1, {len(hyps)}], got {k}")
    steps = _merge_sequence(pairwise_matrix(hyps))
    parts, applied = _replay(hyps, steps, lambda n, s: n <= k)
    return HypothesisClustering(
        clusters=[[hyps[i] for i in part] for part in parts],
        method="fixed-k",
        member_indices=parts,
        merges=applied,
    )


def clustering_diagnostics(
    hyps: list[Hypothesis], clustering: HypothesisClustering
) -> dict:
    """JSON-able dump: distance matrix, merge trace, final partition."""
    return {
        "distance_matrix": pairwise_matrix(hyps).tolist(),
        "merges": [
            {"left": list(s.left), "right": list(s.right), "linkage": s.linkage}
            for s in clustering.merges
        ],
        "partition": [list(part) for part in clustering.member_indices],
    }
