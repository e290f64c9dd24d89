"""Tests for the synthetic corpus generator and decoder simulator."""

import hashlib
from pathlib import Path

import numpy as np
import pytest

from hcm.errors import DataError, ValidationError
from hcm.pipeline import WerReport, run_hcm, score_wer
from hcm.simulate import (
    CORPUS_FILES,
    SimConfig,
    generate_corpus,
    load_manifest,
    synthetic_provider,
    write_corpus,
)


def small_config(**overrides):
    base = dict(
        num_speakers_pool=10,
        embedding_dim=8,
        blob_sigma=0.005,
        vocab_size=120,
        utt_len_range=(4, 10),
        mix_sizes=(1, 2, 3),
        num_mixes=24,
        noise_rate=0.0,
        softmax_temp=0.05,
        seed=0,
        codebook_k=8,
    )
    base.update(overrides)
    return SimConfig(**base)


def test_corpus_internally_consistent():
    corpus = generate_corpus(small_config())
    assert len(corpus.mixtures) == 24
    ids = [m.mix_id for m in corpus.mixtures]
    assert ids == [r.mix_id for r in corpus.references]
    assert ids == [d.mix_id for d in corpus.token_dists]
    for mix, ref, dist in zip(corpus.mixtures, corpus.references, corpus.token_dists):
        assert len(mix.sources) == len(ref.refs)
        dist.validate(k=corpus.codebook.k)
        # every true token is in the distribution support
        assert all(s.speaker_token in dist.probs for s in mix.sources)
        assert all(0 <= s.speaker_token < corpus.codebook.k for s in mix.sources)


def test_zero_jitter_argmax_is_assigned_token():
    corpus = generate_corpus(small_config(blob_sigma=0.0, mix_sizes=(1,)))
    for mix, dist in zip(corpus.mixtures, corpus.token_dists):
        top = max(dist.probs.items(), key=lambda kv: (kv[1], -kv[0]))[0]
        assert top == mix.sources[0].speaker_token


def test_empty_corpus_valid():
    corpus = generate_corpus(small_config(num_mixes=0))
    assert corpus.mixtures == []
    assert corpus.codebook.k == 8  # codebook still trained from enrollment


def test_true_tokens_occupy_top_slots():
    corpus = generate_corpus(small_config(mix_sizes=(3,), num_mixes=12))
    for mix, dist in zip(corpus.mixtures, corpus.token_dists):
        true_tokens = {s.speaker_token for s in mix.sources}
        ranked = sorted(dist.probs.items(), key=lambda kv: (-kv[1], kv[0]))
        top = {t for t, _ in ranked[: len(true_tokens)]}
        assert top == true_tokens
        # derived check: ranking matches an exhaustive distance computation
        sources = corpus.sources_by_mix[mix.mix_id]
        dmin = [
            min(float(np.linalg.norm(c - s.embedding)) for s in sources)
            for c in corpus.codebook.centroids
        ]
        brute = sorted(range(corpus.codebook.k), key=lambda t: (dmin[t], t))
        assert [t for t, _ in ranked] == brute


def test_infeasible_configs_rejected():
    with pytest.raises(ValidationError, match="mix size"):
        generate_corpus(small_config(mix_sizes=(11,)))
    with pytest.raises(ValidationError, match="codebook_k"):
        small_config(codebook_k=1000).validate()
    with pytest.raises(ValidationError):
        small_config(noise_rate=1.0).validate()
    with pytest.raises(ValidationError):
        small_config(utt_len_range=(0, 4)).validate()


def test_provider_noiseless_returns_exact_transcripts():
    corpus = generate_corpus(small_config())
    provider = synthetic_provider(corpus)
    for mix_id, sources in corpus.sources_by_mix.items():
        for token in range(corpus.codebook.k):
            hyp = provider(mix_id, token)
            # independent scan: the mapped source is the nearest one
            centroid = corpus.codebook.centroids[token]
            nearest = min(
                sources,
                key=lambda s: float(np.sum((centroid - s.embedding) ** 2)),
            )
            assert hyp.text == nearest.transcript
            assert hyp.score == 0.0


def test_provider_redundant_tokens_give_identical_texts():
    corpus = generate_corpus(small_config(mix_sizes=(1,), num_mixes=6))
    provider = synthetic_provider(corpus)
    for mix in corpus.mixtures:
        # single source: every prompt maps to it, texts identical
        hyps = [provider(mix.mix_id, t) for t in range(corpus.codebook.k)]
        assert {h.text for h in hyps} == {mix.sources[0].text}
        assert [h.speaker_token for h in hyps] == list(range(corpus.codebook.k))


def test_provider_unknown_ids():
    corpus = generate_corpus(small_config())
    provider = synthetic_provider(corpus)
    with pytest.raises(DataError, match="unknown mix_id"):
        provider("nope", 0)
    with pytest.raises(DataError, match="outside codebook"):
        provider("mix000000", 99)


def test_provider_deterministic_per_seed():
    corpus = generate_corpus(small_config(noise_rate=0.2))
    p1 = synthetic_provider(corpus, seed=5)
    p2 = synthetic_provider(corpus, seed=5)
    p3 = synthetic_provider(corpus, seed=6)
    same = [p1("mix000003", t) == p2("mix000003", t) for t in range(8)]
    assert all(same)
    assert any(p1("mix000003", t) != p3("mix000003", t) for t in range(8))


def test_corruption_rate_near_epsilon():
    corpus = generate_corpus(
        small_config(noise_rate=0.1, num_mixes=60, utt_len_range=(8, 14), vocab_size=500)
    )
    provider = synthetic_provider(corpus)
    from hcm.textdist import distance_only

    total_words = 0
    total_errors = 0
    for mix_id, sources in corpus.sources_by_mix.items():
        for token in range(corpus.codebook.k):
            centroid = corpus.codebook.centroids[token]
            src = min(
                sources,
                key=lambda s: float(np.sum((centroid - s.embedding) ** 2)),
            )
            hyp = provider(mix_id, token)
            total_words += len(src.transcript)
            total_errors += distance_only(src.transcript, hyp.text)
    assert total_words >= 1000
    rate = total_errors / total_words
    assert 0.07 <= rate <= 0.13


def test_provider_score_tracks_clean_words():
    corpus = generate_corpus(small_config(noise_rate=0.3))
    provider = synthetic_provider(corpus)
    mix = corpus.mixtures[0]
    hyp = provider(mix.mix_id, mix.sources[0].speaker_token)
    assert hyp.score <= 0.0


def test_ground_truth_recoverable_noiseless():
    corpus = generate_corpus(small_config(num_mixes=30))
    provider = synthetic_provider(corpus)
    refs = {r.mix_id: r for r in corpus.references}
    report = WerReport()
    for dist in corpus.token_dists:
        out = run_hcm(dist, provider, 8, threshold=0.5)
        entry = score_wer(out, refs[dist.mix_id])
        report.per_mix.append(entry)
        assert len(out.transcriptions) == len(refs[dist.mix_id].refs)
    assert report.aggregate_wer == 0.0


def test_noise_monotonicity():
    corpus = generate_corpus(small_config(num_mixes=90, utt_len_range=(8, 14)))
    refs = {r.mix_id: r for r in corpus.references}
    wers = []
    for eps in (0.0, 0.05, 0.1, 0.2):
        provider = synthetic_provider(corpus, noise_rate=eps, seed=11)
        report = WerReport()
        for dist in corpus.token_dists:
            out = run_hcm(dist, provider, 8, threshold=0.5)
            report.per_mix.append(score_wer(out, refs[dist.mix_id]))
        wers.append(report.aggregate_wer)
    assert wers == sorted(wers)


def test_regeneration_byte_identical(tmp_path):
    cfg = small_config(noise_rate=0.05)
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    write_corpus(generate_corpus(cfg), dir_a)
    write_corpus(generate_corpus(cfg), dir_b)
    for name in CORPUS_FILES:
        ha = hashlib.sha256((dir_a / name).read_bytes()).hexdigest()
        hb = hashlib.sha256((dir_b / name).read_bytes()).hexdigest()
        assert ha == hb, name


def test_manifest_round_trip(tmp_path):
    cfg = small_config()
    paths = write_corpus(generate_corpus(cfg), tmp_path)
    assert load_manifest(paths["manifest.json"]) == cfg


def test_manifest_rejects_unknown_keys():
    with pytest.raises(ValidationError, match="unknown"):
        SimConfig.from_dict({**small_config().to_dict(), "bogus": 1})
