"""Word-level edit distance and normalized edit distance.

Words are opaque strings compared by exact equality; substitution,
insertion and deletion all cost 1. Texts are split on ASCII whitespace
and any speaker tokens must be stripped before distances are computed.
All functions are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

WordSeq = tuple[str, ...]


def words(text: str) -> WordSeq:
    """Split a transcript into a word sequence on whitespace."""
    return tuple(text.split())


@dataclass(frozen=True)
class EditStats:
    """Edit distance between a reference and a hypothesis word sequence.

    `distance == substitutions + insertions + deletions` always holds;
    deletions are reference words dropped, insertions are hypothesis words
    added. `ref_len` is the reference length.
    """

    distance: int
    substitutions: int
    insertions: int
    deletions: int
    ref_len: int


def distance_only(a: WordSeq, b: WordSeq) -> int:
    """Edit distance without the substitution/insertion/deletion split.

    Two-row DP; noticeably faster than `edit_distance` on the hot paths
    (pairwise matrices, WER cost matrices).
    """
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    if a == b:
        return 0
    if lb > la:  # iterate over the shorter row; distance is symmetric
        a, b, la, lb = b, a, lb, la
    row = list(range(lb + 1))
    for i in range(1, la + 1):
        prev_diag = row[0]
        row[0] = i
        ai = a[i - 1]
        for j in range(1, lb + 1):
            tmp = row[j]
            if ai == b[j - 1]:
                row[j] = prev_diag
            else:
                best = tmp  # deletion
                left = row[j - 1]  # insertion
                if left < best:
                    best = left
                if prev_diag < best:  # substitution
                    best = prev_diag
                row[j] = best + 1
            prev_diag = tmp
    return row[lb]


def edit_distance(a: WordSeq, b: WordSeq) -> EditStats:
    """Levenshtein distance from reference `a` to hypothesis `b` with the
    substitution/insertion/deletion breakdown.

    The distance is symmetric in the arguments and swapping them swaps the
    insertion and deletion roles exactly: the backtrace always runs over a
    canonical orientation of the pair, so both orders report the same
    optimal alignment. Within it, ties prefer match/substitution, then
    deletion, then insertion.
    """
    if (len(a), a) <= (len(b), b):
        return _backtrace_stats(a, b)
    swapped = _backtrace_stats(b, a)
    return EditStats(
        distance=swapped.distance,
        substitutions=swapped.substitutions,
        insertions=swapped.deletions,
        deletions=swapped.insertions,
        ref_len=len(a),
    )


def _backtrace_stats(a: WordSeq, b: WordSeq) -> EditStats:
    la, lb = len(a), len(b)
    dp = [list(range(lb + 1))]
    for i in range(1, la + 1):
        prev = dp[i - 1]
        row = [i] + [0] * lb
        ai = a[i - 1]
        for j in range(1, lb + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1]
            else:
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if row[j - 1] < best:
                    best = row[j - 1]
                row[j] = best + 1
        dp.append(row)

    subs = ins = dels = 0
    i, j = la, lb
    while i > 0 or j > 0:
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + 1:
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditStats(
        distance=dp[la][lb],
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        ref_len=la,
    )


def normalized_edit_distance(a: WordSeq, b: WordSeq) -> float:
    """Edit distance divided by the longer sequence's length; in [0, 1].

    Two empty sequences are identical texts, so the 0/0 case is 0.0.
    """
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return distance_only(a, b) / longest
