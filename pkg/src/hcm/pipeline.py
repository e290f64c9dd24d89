"""End-to-end orchestration and evaluation.

A run selects N speaker-token candidates from the mixture's token
distribution, asks a hypothesis provider for one recognition result per
token, clusters the results and merges each cluster. Evaluation is the
permutation-optimal multi-speaker WER (minimum-cost assignment between
outputs and references) and speaker-counting accuracy.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field, replace
from typing import Protocol

from scipy.optimize import linear_sum_assignment

from .clustering import (
    Hypothesis,
    HypothesisClustering,
    ahc_threshold,
    cluster_fixed_k,
)
from .errors import DataError, ValidationError
from .merging import MergedOutput, MergedTranscription, merge_clusters, simple_vote
from .textdist import WordSeq, edit_distance
from .util import derive_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TokenDistribution:
    """Per-mixture probabilities over speaker tokens."""

    mix_id: str
    probs: dict[int, float]

    def validate(self, k: int | None = None) -> None:
        if not self.probs:
            raise ValidationError(f"{self.mix_id}: empty token distribution")
        if any(p < 0 for p in self.probs.values()):
            raise ValidationError(f"{self.mix_id}: negative token probability")
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-6:
            raise ValidationError(
                f"{self.mix_id}: token probabilities sum to {total}, expected 1"
            )
        if k is not None and any(not 0 <= t < k for t in self.probs):
            raise ValidationError(f"{self.mix_id}: token id out of range [0, {k})")


class HypothesisProvider(Protocol):
    """Returns exactly one hypothesis per (mix_id, speaker token) prompt;
    must be deterministic for fixed (mix_id, token, provider seed)."""

    def __call__(self, mix_id: str, speaker_token: int) -> Hypothesis: ...


class FileProvider:
    """Hypothesis provider backed by pre-decoded rows."""

    def __init__(self, rows: dict[tuple[str, int], Hypothesis]):
        self._rows = rows

    def __call__(self, mix_id: str, speaker_token: int) -> Hypothesis:
        hyp = self._rows.get((mix_id, speaker_token))
        if hyp is None:
            raise DataError(
                f"provider has no hypothesis for mix_id={mix_id!r} "
                f"token={speaker_token}"
            )
        return hyp


@dataclass(frozen=True)
class Reference:
    speaker_token: int | None
    transcript: WordSeq


@dataclass(frozen=True)
class ReferenceSet:
    mix_id: str
    refs: tuple[Reference, ...]

    def __post_init__(self):
        if len(self.refs) < 1:
            raise ValidationError(f"{self.mix_id}: reference set is empty")


def select_candidates(
    dist: TokenDistribution, n: int, mode: str = "top-n", seed: int = 0
) -> list[int]:
    """Pick N candidate speaker tokens from a token distribution.

    top-n: the N most probable tokens, descending, ties by ascending id
    (seed is ignored). random: N distinct tokens uniformly, regardless of
    probability.
    """
    available = len(dist.probs)
    if not 1 <= n <= available:
        raise ValidationError(
            f"{dist.mix_id}: N={n} not in [1, {available}] available tokens"
        )
    if mode == "top-n":
        ranked = sorted(dist.probs.items(), key=lambda kv: (-kv[1], kv[0]))
        return [t for t, _ in ranked[:n]]
    if mode == "random":
        return random.Random(seed).sample(sorted(dist.probs), n)
    raise ValidationError(f"unknown selection mode: {mode!r}")


@dataclass
class HcmRun:
    """Everything a single-mixture run produced, for diagnostics."""

    mix_id: str
    candidates: list[int]
    hypotheses: list[Hypothesis]
    outputs: MergedOutput
    clustering: HypothesisClustering | None = None


def run_hcm_detailed(
    dist: TokenDistribution,
    provider: HypothesisProvider,
    n: int,
    mode: str = "top-n",
    threshold: float = 0.5,
    fixed_k: int | None = None,
    merge_method: str = "rover",
    seed: int = 0,
) -> HcmRun:
    """`run_hcm` keeping the intermediate candidates and clustering."""
    if merge_method not in ("rover", "simple"):
        raise ValidationError(f"unknown merge method: {merge_method!r}")
    if merge_method == "simple" and fixed_k is None:
        raise ValidationError("simple voting requires K (the speaker count)")

    select_seed = derive_seed(seed, "select", dist.mix_id) if mode == "random" else 0
    candidates = select_candidates(dist, n, mode=mode, seed=select_seed)

    hyps = []
    for rank, token in enumerate(candidates):
        hyp = provider(dist.mix_id, token)
        if hyp.speaker_token != token:
            raise DataError(
                f"provider returned token {hyp.speaker_token} for prompt "
                f"(mix_id={dist.mix_id!r}, token={token})"
            )
        hyps.append(replace(hyp, source_rank=rank))

    if merge_method == "simple":
        winners = simple_vote(hyps, fixed_k)
        outputs = MergedOutput(
            transcriptions=tuple(
                MergedTranscription(
                    text=text,
                    support=sum(1 for h in hyps if h.text == text),
                    tokens=tuple(h.speaker_token for h in hyps if h.text == text),
                )
                for text in winners
            )
        )
        return HcmRun(dist.mix_id, candidates, hyps, outputs)

    if fixed_k is not None:
        k_eff = min(fixed_k, len(hyps))
        if k_eff < fixed_k:
            log.warning(
                "%s: only %d hypotheses for fixed K=%d", dist.mix_id, len(hyps), fixed_k
            )
        clustering = cluster_fixed_k(hyps, k_eff)
    else:
        clustering = ahc_threshold(hyps, threshold)
    return HcmRun(dist.mix_id, candidates, hyps, merge_clusters(clustering), clustering)


def run_hcm(
    dist: TokenDistribution,
    provider: HypothesisProvider,
    n: int,
    mode: str = "top-n",
    threshold: float = 0.5,
    fixed_k: int | None = None,
    merge_method: str = "rover",
    seed: int = 0,
) -> MergedOutput:
    """Full single-mixture run: candidates -> hypotheses -> cluster -> merge.

    The number of transcriptions returned is the estimated speaker count.
    Reproducible from (inputs, seed).
    """
    return run_hcm_detailed(
        dist,
        provider,
        n,
        mode=mode,
        threshold=threshold,
        fixed_k=fixed_k,
        merge_method=merge_method,
        seed=seed,
    ).outputs


@dataclass(frozen=True)
class WerEntry:
    """Per-mixture scoring result under the optimal output/reference
    assignment. `assignment` pairs (output index, reference index); None
    marks the empty padding on the smaller side."""

    mix_id: str
    assignment: tuple[tuple[int | None, int | None], ...]
    substitutions: int
    insertions: int
    deletions: int
    ref_words: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        if self.ref_words == 0:
            return 0.0 if self.errors == 0 else float("inf")
        return 100.0 * self.errors / self.ref_words


@dataclass
class WerReport:
    per_mix: list[WerEntry] = field(default_factory=list)

    @property
    def aggregate_wer(self) -> float:
        total_ref = sum(e.ref_words for e in self.per_mix)
        total_err = sum(e.errors for e in self.per_mix)
        if total_ref == 0:
            return 0.0 if total_err == 0 else float("inf")
        return 100.0 * total_err / total_ref

    def to_dict(self) -> dict:
        return {
            "aggregate_wer": self.aggregate_wer,
            "per_mix": [
                {
                    "mix_id": e.mix_id,
                    "assignment": [list(pair) for pair in e.assignment],
                    "substitutions": e.substitutions,
                    "insertions": e.insertions,
                    "deletions": e.deletions,
                    "ref_words": e.ref_words,
                    "wer": e.wer,
                }
                for e in self.per_mix
            ],
        }


def score_wer(outputs: MergedOutput, refs: ReferenceSet) -> WerEntry:
    """Permutation-optimal WER entry for one mixture.

    The smaller side is padded with empty sequences, so an unmatched
    reference counts all its words as deletions and an unmatched output
    all its words as insertions. The assignment is solved exactly.
    """
    out_texts = [t.text for t in outputs.transcriptions]
    ref_texts = [r.transcript for r in refs.refs]
    n = max(len(out_texts), len(ref_texts))
    padded_out = out_texts + [()] * (n - len(out_texts))
    padded_ref = ref_texts + [()] * (n - len(ref_texts))

    stats = [
        [edit_distance(padded_ref[i], padded_out[j]) for j in range(n)]
        for i in range(n)
    ]
    cost = [[stats[i][j].distance for j in range(n)] for i in range(n)]
    row_ind, col_ind = linear_sum_assignment(cost)

    subs = ins = dels = 0
    assignment = []
    for i, j in zip(row_ind, col_ind):
        st = stats[i][j]
        subs += st.substitutions
        ins += st.insertions
        dels += st.deletions
        assignment.append(
            (
                int(j) if j < len(out_texts) else None,
                int(i) if i < len(ref_texts) else None,
            )
        )
    assignment.sort(key=lambda p: (p[0] is None, p[0] if p[0] is not None else -1))
    return WerEntry(
        mix_id=refs.mix_id,
        assignment=tuple(assignment),
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        ref_words=sum(len(r) for r in ref_texts),
    )


_COUNT_BUCKETS = ("1", "2", "3", "more")


def _bucket(estimated: int) -> str:
    return str(estimated) if estimated <= 3 else "more"


@dataclass(frozen=True)
class CountRow:
    actual: int
    total: int
    percentages: dict[str, float]  # keys "1", "2", "3", "more"


@dataclass
class CountReport:
    rows: list[CountRow]

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"actual": r.actual, "total": r.total, "percentages": r.percentages}
                for r in self.rows
            ]
        }


def count_accuracy(runs: list[tuple[int, int]]) -> CountReport:
    """Distribution of estimated speaker counts per actual count.

    Estimated counts are bucketed {1, 2, 3, more (>= 4)}; each row's
    percentages sum to 100 up to rounding.
    """
    if any(est < 1 or act < 1 for est, act in runs):
        raise ValidationError("speaker counts must be >= 1")
    by_actual: dict[int, list[int]] = {}
    for est, act in runs:
        by_actual.setdefault(act, []).append(est)
    rows = []
    for actual in sorted(by_actual):
        ests = by_actual[actual]
        pct = {
            b: 100.0 * sum(1 for e in ests if _bucket(e) == b) / len(ests)
            for b in _COUNT_BUCKETS
        }
        rows.append(CountRow(actual=actual, total=len(ests), percentages=pct))
    return CountReport(rows=rows)


def format_count_table(report: CountReport) -> str:
    """Plain-text speaker-counting table with the estimated-count columns
    laid out as: 1 2 3 more."""
    lines = ["actual    estimated # speakers (%)"]
    header = f"{'#spk':>6}"
    for b in _COUNT_BUCKETS:
        header += f"{b:>8}"
    lines.append(header)
    for row in report.rows:
        line = f"{row.actual:>6}"
        for b in _COUNT_BUCKETS:
            line += f"{row.percentages[b]:>8.2f}"
        lines.append(line)
    return "\n".join(lines)
