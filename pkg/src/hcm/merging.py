"""Merging a hypothesis cluster into one transcription.

ROVER-style: hypotheses are aligned into a confusion network (word slots
with vote counts, NULL marking absence) and each slot is decided by
majority vote. Votes are pure counts; hypothesis scores only break ties
and fix the alignment order. A whole-text frequency vote is provided as
the known-speaker-count baseline.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

from .clustering import Hypothesis, HypothesisClustering
from .errors import ValidationError
from .textdist import WordSeq

log = logging.getLogger(__name__)

# distinguished absence marker inside slots; never emitted in output
NULL = None

_DIAG, _SKIP, _NEW = 0, 1, 2


@dataclass
class Slot:
    votes: dict[str | None, int]
    score_sums: dict[str | None, float]


@dataclass
class ConfusionNetwork:
    """Ordered word slots; every slot's votes sum to `num_aligned`."""

    slots: list[Slot]
    num_aligned: int


def _align_ops(slots: list[Slot], hyp_words: WordSeq) -> list[tuple[int, int]]:
    """DP alignment of one hypothesis against the current network.

    Costs: word found in slot 0, substitution 1, new slot 1, skipped slot 1
    unless the slot already holds NULL votes (then 0). Ties prefer
    diagonal, then slot skip, then new slot.
    """
    nslots, nwords = len(slots), len(hyp_words)
    skip_cost = [0 if NULL in s.votes else 1 for s in slots]
    cost = [[0] * (nwords + 1) for _ in range(nslots + 1)]
    move = [[_DIAG] * (nwords + 1) for _ in range(nslots + 1)]
    for i in range(1, nslots + 1):
        cost[i][0] = cost[i - 1][0] + skip_cost[i - 1]
        move[i][0] = _SKIP
    for j in range(1, nwords + 1):
        cost[0][j] = j
        move[0][j] = _NEW
    for i in range(1, nslots + 1):
        votes = slots[i - 1].votes
        for j in range(1, nwords + 1):
            best = cost[i - 1][j - 1] + (0 if hyp_words[j - 1] in votes else 1)
            op = _DIAG
            skip = cost[i - 1][j] + skip_cost[i - 1]
            if skip < best:
                best, op = skip, _SKIP
            new = cost[i][j - 1] + 1
            if new < best:
                best, op = new, _NEW
            cost[i][j] = best
            move[i][j] = op

    ops = []
    i, j = nslots, nwords
    while i > 0 or j > 0:
        op = move[i][j]
        if op == _DIAG:
            i -= 1
            j -= 1
        elif op == _SKIP:
            i -= 1
        else:
            j -= 1
        ops.append((op, j))
    ops.reverse()
    return ops


def build_confusion_network(cluster: list[Hypothesis]) -> ConfusionNetwork:
    """Iteratively align a cluster's hypotheses into a confusion network.

    The network skeleton comes from the most confident hypothesis
    (descending score, then ascending source rank). Each later hypothesis
    is aligned by DP; extra words insert new slots back-filled with NULL
    votes for everything aligned before.
    """
    if not cluster:
        raise ValidationError("empty cluster")
    order = sorted(cluster, key=lambda h: (-h.score, h.source_rank))

    first = order[0]
    slots = [
        Slot(votes={w: 1}, score_sums={w: first.score}) for w in first.text
    ]
    for aligned, hyp in enumerate(order[1:], start=1):
        ops = _align_ops(slots, hyp.text)
        new_slots: list[Slot] = []
        slot_iter = iter(slots)
        for op, j in ops:
            if op == _NEW:
                w = hyp.text[j]
                new_slots.append(
                    Slot(votes={w: 1, NULL: aligned}, score_sums={w: hyp.score})
                )
                continue
            slot = next(slot_iter)
            w = hyp.text[j] if op == _DIAG else NULL
            slot.votes[w] = slot.votes.get(w, 0) + 1
            slot.score_sums[w] = slot.score_sums.get(w, 0.0) + hyp.score
            new_slots.append(slot)
        slots = new_slots
    return ConfusionNetwork(slots=slots, num_aligned=len(cluster))


def rover_vote(net: ConfusionNetwork) -> WordSeq:
    """Per-slot majority vote; slots won by NULL emit nothing.

    Ties prefer a word over NULL, then the higher mean supporter score,
    then the lexicographically smaller word.
    """
    out = []
    for slot in net.slots:
        best_word = NULL
        best_rank = None
        for w, count in slot.votes.items():
            mean_score = slot.score_sums.get(w, 0.0) / count
            rank = (-count, 1 if w is NULL else 0, -mean_score, w or "")
            if best_rank is None or rank < best_rank:
                best_rank = rank
                best_word = w
        if best_word is not NULL:
            out.append(best_word)
    return tuple(out)


@dataclass(frozen=True)
class MergedTranscription:
    text: WordSeq
    support: int
    tokens: tuple[int, ...]


@dataclass(frozen=True)
class MergedOutput:
    """Final per-speaker transcriptions with cluster support and the
    member speaker tokens."""

    transcriptions: tuple[MergedTranscription, ...]


def merge_clusters(clustering: HypothesisClustering) -> MergedOutput:
    """One merged transcription per cluster, ordered by descending support
    then descending mean member score."""
    if not clustering.clusters:
        raise ValidationError("empty clustering")
    entries = []
    for cluster in clustering.clusters:
        text = rover_vote(build_confusion_network(cluster))
        mean_score = sum(h.score for h in cluster) / len(cluster)
        entries.append(
            (
                MergedTranscription(
                    text=text,
                    support=len(cluster),
                    tokens=tuple(h.speaker_token for h in cluster),
                ),
                mean_score,
            )
        )
    entries.sort(key=lambda e: (-e[0].support, -e[1]))
    return MergedOutput(transcriptions=tuple(e[0] for e in entries))


def simple_vote(hyps: list[Hypothesis], k: int) -> list[WordSeq]:
    """The K most frequent exact texts (tokens excluded from equality).

    Ties go to the earlier first occurrence. Requires the speaker count K
    up front; if fewer distinct texts exist, all of them are returned and
    the shortfall is logged.
    """
    if not hyps:
        raise ValidationError("no hypotheses")
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    counts = Counter(h.text for h in hyps)
    first_seen: dict[WordSeq, int] = {}
    for i, h in enumerate(hyps):
        first_seen.setdefault(h.text, i)
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    if len(ranked) < k:
        log.warning(
            "simple vote shortfall: %d distinct texts for K=%d", len(ranked), k
        )
    return ranked[:k]
