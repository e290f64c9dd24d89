"""Synthetic corpus and decoder simulator.

Generates speaker blobs on the unit sphere, random transcripts, mixture
records, per-mixture token distributions, and a noise-corrupting stand-in
for the prompted decoder, so the whole pipeline can be verified at desk
scale with known ground truth. Everything is deterministic per seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import io
from .clustering import Hypothesis
from .errors import DataError, ValidationError
from .pipeline import Reference, ReferenceSet, TokenDistribution
from .speaker_tokens import (
    Codebook,
    MixSource,
    MixtureRecord,
    SpeakerEmbedding,
    assign_token,
    kmeans_train,
)
from .textdist import WordSeq
from .util import derive_seed


@dataclass(frozen=True)
class SimConfig:
    num_speakers_pool: int
    embedding_dim: int
    blob_sigma: float
    vocab_size: int
    utt_len_range: tuple[int, int]
    mix_sizes: tuple[int, ...]
    num_mixes: int
    noise_rate: float
    softmax_temp: float
    seed: int
    codebook_k: int
    enroll_per_speaker: int = 4

    def validate(self) -> None:
        if self.num_speakers_pool < 1:
            raise ValidationError("num_speakers_pool must be >= 1")
        if self.embedding_dim < 1:
            raise ValidationError("embedding_dim must be >= 1")
        if self.blob_sigma < 0:
            raise ValidationError("blob_sigma must be >= 0")
        if self.vocab_size < 1:
            raise ValidationError("vocab_size must be >= 1")
        lo, hi = self.utt_len_range
        if not 1 <= lo <= hi:
            raise ValidationError(f"bad utt_len_range: {self.utt_len_range}")
        if self.num_mixes < 0:
            raise ValidationError("num_mixes must be >= 0")
        if self.num_mixes > 0 and not self.mix_sizes:
            raise ValidationError("mix_sizes must be non-empty")
        if any(s < 1 for s in self.mix_sizes):
            raise ValidationError("mix sizes must be >= 1")
        if any(s > self.num_speakers_pool for s in self.mix_sizes):
            raise ValidationError(
                "infeasible config: mix size exceeds the speaker pool"
            )
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValidationError("noise_rate must be in [0, 1)")
        if self.softmax_temp <= 0:
            raise ValidationError("softmax_temp must be > 0")
        if self.codebook_k < 1:
            raise ValidationError("codebook_k must be >= 1")
        if self.enroll_per_speaker < 1:
            raise ValidationError("enroll_per_speaker must be >= 1")
        if self.codebook_k > self.num_speakers_pool * self.enroll_per_speaker:
            raise ValidationError(
                "infeasible config: codebook_k exceeds enrollment utterances"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["utt_len_range"] = list(self.utt_len_range)
        d["mix_sizes"] = list(self.mix_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown SimConfig keys: {sorted(unknown)}")
        missing = {k for k in known if k not in d and k != "enroll_per_speaker"}
        if missing:
            raise ValidationError(f"missing SimConfig keys: {sorted(missing)}")
        kwargs = dict(d)
        kwargs["utt_len_range"] = tuple(int(x) for x in d["utt_len_range"])
        kwargs["mix_sizes"] = tuple(int(x) for x in d["mix_sizes"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


def make_vocab(size: int) -> list[str]:
    width = len(str(size - 1)) if size > 1 else 1
    return [f"w{i:0{width}d}" for i in range(size)]


@dataclass(frozen=True)
class SimSource:
    utt_id: str
    speaker_id: int
    embedding: np.ndarray
    token: int
    transcript: WordSeq
    weight: float


@dataclass
class SimCorpus:
    config: SimConfig
    embeddings: list[SpeakerEmbedding]
    codebook: Codebook
    mixtures: list[MixtureRecord]
    references: list[ReferenceSet]
    token_dists: list[TokenDistribution]
    sources_by_mix: dict[str, list[SimSource]]
    vocab: list[str]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def generate_corpus(cfg: SimConfig) -> SimCorpus:
    """Build a full synthetic corpus from a config.

    Speaker identities are Gaussian blobs on the unit sphere (uniform
    centers, per-utterance jitter re-normalized). The codebook is trained
    on per-speaker enrollment utterances. Each mixture's token distribution
    is a softmax over -min distance from each centroid to any source
    embedding, scaled by the temperature, so every mixture's true tokens
    are always in the support.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    vocab = make_vocab(cfg.vocab_size)
    lo, hi = cfg.utt_len_range

    centers = rng.normal(size=(cfg.num_speakers_pool, cfg.embedding_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)

    def jittered(speaker: int) -> np.ndarray:
        vec = centers[speaker]
        if cfg.blob_sigma > 0:
            vec = vec + rng.normal(scale=cfg.blob_sigma, size=cfg.embedding_dim)
        return _unit(vec)

    embeddings: list[SpeakerEmbedding] = []
    enroll: list[SpeakerEmbedding] = []
    for spk in range(cfg.num_speakers_pool):
        for e in range(cfg.enroll_per_speaker):
            emb = SpeakerEmbedding(f"spk{spk:04d}_e{e}", jittered(spk))
            enroll.append(emb)
            embeddings.append(emb)

    codebook = kmeans_train(enroll, cfg.codebook_k, seed=cfg.seed)

    mixtures: list[MixtureRecord] = []
    references: list[ReferenceSet] = []
    token_dists: list[TokenDistribution] = []
    sources_by_mix: dict[str, list[SimSource]] = {}
    for m in range(cfg.num_mixes):
        mix_id = f"mix{m:06d}"
        size = cfg.mix_sizes[m % len(cfg.mix_sizes)]
        speakers = rng.choice(cfg.num_speakers_pool, size=size, replace=False)
        sources = []
        for s, spk in enumerate(speakers):
            vec = jittered(int(spk))
            length = int(rng.integers(lo, hi + 1))
            transcript = tuple(vocab[w] for w in rng.integers(0, cfg.vocab_size, length))
            weight = float(rng.uniform(0.1, 1.0))
            emb = SpeakerEmbedding(f"{mix_id}_s{s}", vec)
            embeddings.append(emb)
            sources.append(
                SimSource(
                    utt_id=emb.utt_id,
                    speaker_id=int(spk),
                    embedding=emb.vector,
                    token=assign_token(codebook, emb),
                    transcript=transcript,
                    weight=weight,
                )
            )
        sources_by_mix[mix_id] = sources
        mixtures.append(
            MixtureRecord(
                mix_id=mix_id,
                sources=tuple(
                    MixSource(s.token, s.transcript, s.weight) for s in sources
                ),
            )
        )
        references.append(
            ReferenceSet(
                mix_id=mix_id,
                refs=tuple(Reference(s.token, s.transcript) for s in sources),
            )
        )
        source_mat = np.stack([s.embedding for s in sources])
        dmin = np.min(
            np.linalg.norm(
                codebook.centroids[:, None, :] - source_mat[None, :, :], axis=2
            ),
            axis=1,
        )
        logits = -dmin / cfg.softmax_temp
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        token_dists.append(
            TokenDistribution(
                mix_id=mix_id,
                probs={t: float(p) for t, p in enumerate(probs)},
            )
        )

    return SimCorpus(
        config=cfg,
        embeddings=embeddings,
        codebook=codebook,
        mixtures=mixtures,
        references=references,
        token_dists=token_dists,
        sources_by_mix=sources_by_mix,
        vocab=vocab,
    )


class SyntheticProvider:
    """Decoder stand-in for a generated corpus.

    A prompt token resolves to the source in the mixture whose embedding
    is nearest that token's centroid, which is what makes several tokens
    yield near-identical transcriptions. The transcript is corrupted
    word-by-word: with probability `noise_rate` one of substitution,
    deletion, or insertion is applied, equiprobably. The score is the
    log of the (1 - noise_rate)^clean_words survival proxy. Deterministic
    per (mix_id, token, seed); safe to call from multiple threads.
    """

    def __init__(
        self,
        corpus: SimCorpus,
        noise_rate: float | None = None,
        seed: int | None = None,
    ):
        self.corpus = corpus
        self.noise_rate = (
            corpus.config.noise_rate if noise_rate is None else float(noise_rate)
        )
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValidationError("noise_rate must be in [0, 1)")
        self.seed = corpus.config.seed if seed is None else int(seed)
        self._cache: dict[tuple[str, int], Hypothesis] = {}

    def __call__(self, mix_id: str, speaker_token: int) -> Hypothesis:
        key = (mix_id, speaker_token)
        cached = self._cache.get(key)
        if cached is not None:
            return cached

        sources = self.corpus.sources_by_mix.get(mix_id)
        if sources is None:
            raise DataError(f"unknown mix_id: {mix_id!r}")
        if not 0 <= speaker_token < self.corpus.codebook.k:
            raise DataError(
                f"token {speaker_token} outside codebook [0, {self.corpus.codebook.k})"
            )
        centroid = self.corpus.codebook.centroids[speaker_token]
        d2 = [float(np.sum((centroid - s.embedding) ** 2)) for s in sources]
        src = sources[int(np.argmin(d2))]

        rng = np.random.default_rng(derive_seed(self.seed, "hyp", mix_id, speaker_token))
        vocab = self.corpus.vocab
        eps = self.noise_rate
        out: list[str] = []
        clean = 0
        for w in src.transcript:
            if eps > 0.0 and rng.random() < eps:
                op = int(rng.integers(3))
                if op == 0:  # substitution
                    out.append(vocab[int(rng.integers(len(vocab)))])
                elif op == 1:  # deletion
                    pass
                else:  # insertion after the kept word
                    out.append(w)
                    out.append(vocab[int(rng.integers(len(vocab)))])
            else:
                out.append(w)
                clean += 1
        score = clean * math.log(1.0 - eps) if eps > 0.0 else 0.0
        hyp = Hypothesis(speaker_token=speaker_token, text=tuple(out), score=score)
        self._cache[key] = hyp
        return hyp


def synthetic_provider(
    corpus: SimCorpus, noise_rate: float | None = None, seed: int | None = None
) -> SyntheticProvider:
    return SyntheticProvider(corpus, noise_rate=noise_rate, seed=seed)


CORPUS_FILES = (
    "embeddings.jsonl",
    "codebook.json",
    "mixtures.jsonl",
    "references.jsonl",
    "token_dists.jsonl",
    "provider.jsonl",
    "manifest.json",
)


def write_corpus(corpus: SimCorpus, outdir: str | Path) -> dict[str, Path]:
    """Write the corpus in the standard wire formats plus a manifest.

    provider.jsonl holds the simulated hypothesis for every
    (mixture, token) pair at the config's noise rate and seed, so merges
    can run from files alone.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {name: outdir / name for name in CORPUS_FILES}

    io.save_embeddings(paths["embeddings.jsonl"], corpus.embeddings)
    io.save_codebook(paths["codebook.json"], corpus.codebook)
    io.save_mixtures(paths["mixtures.jsonl"], corpus.mixtures, with_labels=True)
    io.save_references(paths["references.jsonl"], corpus.references)
    io.save_token_dists(paths["token_dists.jsonl"], corpus.token_dists)

    provider = SyntheticProvider(corpus)
    io.save_provider_rows(
        paths["provider.jsonl"],
        (
            (rec.mix_id, provider(rec.mix_id, token))
            for rec in corpus.mixtures
            for token in range(corpus.codebook.k)
        ),
    )
    manifest = {"format": "hcm-sim-corpus", "config": corpus.config.to_dict()}
    paths["manifest.json"].write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return paths


def load_manifest(path: str | Path) -> SimConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return SimConfig.from_dict(obj["config"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: invalid manifest: {exc}") from exc
