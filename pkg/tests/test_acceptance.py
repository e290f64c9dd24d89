"""Acceptance suite: one test per release criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion. Property-based checks at fixed seeds plus synthetic end-to-end
runs; no trained models involved.
"""

import hashlib
import itertools
import random
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from hcm.clustering import (
    Hypothesis,
    ahc_threshold,
    cluster_fixed_k,
    pairwise_matrix,
)
from hcm.cli import main as cli_main
from hcm.merging import build_confusion_network, merge_clusters, rover_vote
from hcm.pipeline import (
    WerReport,
    count_accuracy,
    format_count_table,
    run_hcm,
    score_wer,
)
from hcm.simulate import SimConfig, generate_corpus, synthetic_provider
from hcm.textdist import (
    distance_only,
    edit_distance,
    normalized_edit_distance,
    words,
)

ORACLE_VOCAB = ("a", "b", "c")
ORACLE_MAX_LEN = 6


def _oracle_universe():
    return [
        seq
        for length in range(ORACLE_MAX_LEN + 1)
        for seq in itertools.product(ORACLE_VOCAB, repeat=length)
    ]


def _oracle_sweep(row_slice):
    """Compare edit_distance against the naive three-way recursion on all
    (a, b) pairs with a in the given strided row slice (striding balances
    the workers: rows are ordered by sequence length).

    The recursion is memoized on suffix-id pairs: every suffix of a
    sequence in the universe is itself in the universe, so one flat table
    caches the whole recursion tree across pairs.
    """
    start, step = row_slice
    seqs = _oracle_universe()
    n = len(seqs)
    index = {s: i for i, s in enumerate(seqs)}
    tail = [index[s[1:]] if s else -1 for s in seqs]
    head = [s[0] if s else "" for s in seqs]
    length = [len(s) for s in seqs]
    memo = [-1] * (n * n)

    def orc(ia, ib):
        la, lb = length[ia], length[ib]
        if la == 0:
            return lb
        if lb == 0:
            return la
        key = ia * n + ib
        v = memo[key]
        if v >= 0:
            return v
        if head[ia] == head[ib]:
            v = orc(tail[ia], tail[ib])
        else:
            v = 1 + min(
                orc(tail[ia], tail[ib]),
                orc(tail[ia], ib),
                orc(ia, tail[ib]),
            )
        memo[key] = v
        return v

    mismatches = 0
    for ia in range(start, n, step):
        a = seqs[ia]
        for ib in range(n):
            if edit_distance(a, seqs[ib]).distance != orc(ia, ib):
                mismatches += 1
    return mismatches


def test_edit_distance_exhaustive_oracle():
    """All pairs of word sequences, length <= 6 over a 3-word vocabulary."""
    start = time.perf_counter()
    n = len(_oracle_universe())
    assert n == 1093
    with ProcessPoolExecutor(max_workers=2) as pool:
        mismatches = sum(pool.map(_oracle_sweep, [(0, 2), (1, 2)]))
    elapsed = time.perf_counter() - start
    assert mismatches == 0
    assert elapsed < 10.0, f"exhaustive oracle sweep took {elapsed:.1f}s"
    print(f"\n[acceptance] edit-distance exhaustive oracle: PASS "
          f"({n * n} pairs, {elapsed:.1f}s)")


def test_normalized_distance_bounds_and_symmetry():
    rng = random.Random(2024)
    vocab = ["w%d" % i for i in range(7)]
    violations = 0
    for _ in range(10_000):
        a = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 9)))
        b = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 9)))
        fwd = normalized_edit_distance(a, b)
        rev = normalized_edit_distance(b, a)
        if not 0.0 <= fwd <= 1.0:
            violations += 1
        if fwd != rev:
            violations += 1
        if (fwd == 0.0) != (a == b):
            violations += 1
        if distance_only(a, b) != distance_only(b, a):
            violations += 1
    assert violations == 0
    print("\n[acceptance] normalized-distance bounds and symmetry: PASS "
          "(10000 pairs, 0 violations)")


def _two_blob_instance(rng):
    """Two hypothesis groups with verified within < 0.2, cross > 0.8."""
    hyps, groups = [], []
    for g, prefix in enumerate(("l", "r")):
        base_len = rng.randint(11, 15)
        base = [f"{prefix}{rng.randint(0, 40)}" for _ in range(base_len)]
        members = []
        for m in range(rng.randint(2, 6)):
            text = list(base)
            if m > 0:
                text[rng.randrange(base_len)] = f"{prefix}alt{m}"
            members.append(len(hyps))
            hyps.append(
                Hypothesis(
                    speaker_token=g * 100 + m,
                    text=tuple(text),
                    score=rng.random(),
                    source_rank=len(hyps),
                )
            )
        groups.append(frozenset(members))
    return hyps, groups


def test_ahc_two_blob_recovery():
    rng = random.Random(555)
    recovered = 0
    for case in range(200):
        hyps, groups = _two_blob_instance(rng)
        mat = pairwise_matrix(hyps)
        for group in groups:
            for i in group:
                for j in group:
                    assert mat[i][j] < 0.2
        for i in groups[0]:
            for j in groups[1]:
                assert mat[i][j] > 0.8
        clustering = ahc_threshold(hyps, 0.5)
        partition = {frozenset(part) for part in clustering.member_indices}
        if partition == set(groups):
            recovered += 1
        fixed = cluster_fixed_k(hyps, len(clustering.clusters))
        assert {frozenset(p) for p in fixed.member_indices} == partition
    assert recovered == 200
    print("\n[acceptance] AHC two-blob recovery: PASS (200/200, "
          "fixed-K agreement on every case)")


def test_rover_majority_dominance():
    rng = random.Random(999)
    vocab = ["v%d" % i for i in range(15)]
    dominated = 0
    for case in range(500):
        majority = tuple(rng.choice(vocab) for _ in range(rng.randint(1, 9)))
        m = rng.randint(2, 6)
        minority = rng.randint(0, m - 1)  # strict majority by construction
        cluster = [
            Hypothesis(0, majority, rng.random(), i) for i in range(m)
        ]
        for i in range(minority):
            other = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 9)))
            cluster.append(Hypothesis(1, other, rng.random(), m + i))
        if rover_vote(build_confusion_network(cluster)) == majority:
            dominated += 1
        # unanimity on the majority block alone
        unanimous = [Hypothesis(0, majority, rng.random(), i) for i in range(m)]
        assert rover_vote(build_confusion_network(unanimous)) == majority
        # idempotence on the merged result
        merged = rover_vote(build_confusion_network(cluster))
        again = rover_vote(build_confusion_network([Hypothesis(0, merged, 0.0, 0)]))
        assert again == merged
    assert dominated == 500
    print("\n[acceptance] ROVER majority dominance: PASS (500/500, "
          "unanimity and idempotence held)")


def test_permutation_wer_exactness():
    from hcm.merging import MergedOutput, MergedTranscription
    from hcm.pipeline import Reference, ReferenceSet

    rng = random.Random(424242)
    vocab = ["w%d" % i for i in range(8)]
    exact = 0
    for case in range(1000):
        n_out, n_ref = rng.randint(1, 4), rng.randint(1, 4)
        outs = [
            tuple(rng.choice(vocab) for _ in range(rng.randint(0, 6)))
            for _ in range(n_out)
        ]
        refs = [
            tuple(rng.choice(vocab) for _ in range(rng.randint(0, 6)))
            for _ in range(n_ref)
        ]
        entry = score_wer(
            MergedOutput(
                transcriptions=tuple(
                    MergedTranscription(t, 1, (0,)) for t in outs
                )
            ),
            ReferenceSet("m", tuple(Reference(None, r) for r in refs)),
        )
        n = max(n_out, n_ref)
        padded_out = outs + [()] * (n - n_out)
        padded_ref = refs + [()] * (n - n_ref)
        brute = min(
            sum(distance_only(padded_ref[i], padded_out[perm[i]]) for i in range(n))
            for perm in itertools.permutations(range(n))
        )
        if entry.errors == brute:
            exact += 1
    assert exact == 1000
    print("\n[acceptance] permutation-WER exactness: PASS (1000/1000)")


def _corpus_config(num_mixes, noise_rate, seed=0):
    return SimConfig(
        num_speakers_pool=50,
        embedding_dim=16,
        blob_sigma=0.01,
        vocab_size=300,
        utt_len_range=(8, 16),
        mix_sizes=(1, 2, 3),
        num_mixes=num_mixes,
        noise_rate=noise_rate,
        softmax_temp=0.05,
        seed=seed,
        codebook_k=32,
    )


def _corpus_wer(corpus, provider, n, mode="top-n", method="rover",
                threshold=0.5, oracle_k=False, seed=7):
    refs = {r.mix_id: r for r in corpus.references}
    report = WerReport()
    counts = []
    for dist in corpus.token_dists:
        fixed_k = len(refs[dist.mix_id].refs) if oracle_k else None
        out = run_hcm(
            dist, provider, n, mode=mode, threshold=threshold,
            fixed_k=fixed_k, merge_method=method, seed=seed,
        )
        report.per_mix.append(score_wer(out, refs[dist.mix_id]))
        counts.append((len(out.transcriptions), len(refs[dist.mix_id].refs)))
    return report, counts


def test_end_to_end_noiseless_recovery():
    """Pool 50, k=32, mixes 1/2/3, 300 mixtures, eps=0, sigma=0.01."""
    start = time.perf_counter()
    corpus = generate_corpus(_corpus_config(num_mixes=300, noise_rate=0.0))
    provider = synthetic_provider(corpus)
    report, counts = _corpus_wer(corpus, provider, n=8, threshold=0.5)
    elapsed = time.perf_counter() - start
    assert report.aggregate_wer == 0.0
    table = count_accuracy(counts)
    for row in table.rows:
        assert row.percentages[str(row.actual)] == 100.0, row
    assert elapsed < 60.0, f"end-to-end run took {elapsed:.1f}s"
    print(f"\n[acceptance] noiseless end-to-end recovery: PASS "
          f"(WER 0.0%, diagonal 100%, {elapsed:.1f}s single-threaded)")


def test_noisy_trend_reproduction():
    """Direction checks on a 500-mixture corpus at eps=0.1 (ties allowed)."""
    corpus = generate_corpus(_corpus_config(num_mixes=500, noise_rate=0.1))
    provider = synthetic_provider(corpus)

    top = {
        n: _corpus_wer(corpus, provider, n)[0].aggregate_wer for n in (4, 8, 16, 32)
    }
    rand = {
        n: _corpus_wer(corpus, provider, n, mode="random")[0].aggregate_wer
        for n in (4, 8)
    }
    simple32 = _corpus_wer(
        corpus, provider, 32, method="simple", oracle_k=True
    )[0].aggregate_wer

    assert top[4] <= rand[4], (top[4], rand[4])
    assert top[8] <= rand[8], (top[8], rand[8])
    assert top[4] >= top[8] >= top[16] >= top[32], top
    assert top[32] <= simple32, (top[32], simple32)
    print("\n[acceptance] noisy trend reproduction: PASS "
          f"(top-N {[round(top[n], 2) for n in (4, 8, 16, 32)]}%, "
          f"random {[round(rand[n], 2) for n in (4, 8)]}%, "
          f"simple@32 {simple32:.2f}%)")


def test_speaker_counting_structure():
    """Counting accuracy thresholds on the eps=0.05 corpus."""
    corpus = generate_corpus(_corpus_config(num_mixes=500, noise_rate=0.05))
    provider = synthetic_provider(corpus)
    _, counts = _corpus_wer(corpus, provider, n=8, threshold=0.5)
    report = count_accuracy(counts)
    diag = {row.actual: row.percentages[str(row.actual)] for row in report.rows}
    assert diag[1] >= 95.0, diag
    assert diag[2] >= 95.0, diag
    assert diag[3] >= 80.0, diag
    table = format_count_table(report)
    header = " ".join(table.splitlines()[1].split())
    assert header.endswith("1 2 3 more")
    print("\n[acceptance] speaker-counting structure: PASS "
          f"(diagonal {diag[1]:.2f}/{diag[2]:.2f}/{diag[3]:.2f}%, "
          "layout: 1 2 3 more)")
    print(table)


def test_full_pipeline_determinism(tmp_path):
    """Two identical CLI runs produce byte-identical outputs."""
    digests = []
    for run in ("one", "two"):
        base = tmp_path / run
        corpus_dir = base / "corpus"
        sim_args = [
            "simulate", "--outdir", str(corpus_dir), "--pool", "16", "--dim", "8",
            "--num-mixes", "30", "--codebook-k", "12", "--noise", "0.1",
            "--seed", "3",
        ]
        assert cli_main(sim_args) == 0
        merged = base / "merged.jsonl"
        assert cli_main([
            "merge",
            "--dists", str(corpus_dir / "token_dists.jsonl"),
            "--provider", str(corpus_dir / "provider.jsonl"),
            "--n", "8", "--mode", "random", "--seed", "3",
            "--out", str(merged),
        ]) == 0
        wer_json = base / "wer.json"
        assert cli_main([
            "score-wer", "--merged", str(merged),
            "--refs", str(corpus_dir / "references.jsonl"),
            "--out", str(wer_json),
        ]) == 0
        count_json = base / "counts.json"
        assert cli_main([
            "count-speakers", "--merged", str(merged),
            "--refs", str(corpus_dir / "references.jsonl"),
            "--out", str(count_json),
        ]) == 0
        files = sorted(corpus_dir.iterdir()) + [merged, wer_json, count_json]
        digests.append([hashlib.sha256(p.read_bytes()).hexdigest() for p in files])
    assert digests[0] == digests[1]
    print("\n[acceptance] full-pipeline determinism: PASS "
          f"({len(digests[0])} files byte-identical)")
