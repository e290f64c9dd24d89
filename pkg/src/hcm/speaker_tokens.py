"""Speaker tokenization: k-means codebook over speaker embeddings.

Embeddings are L2-normalized before any distance computation, so Euclidean
clustering matches cosine ordering on the unit sphere. The centroid index
is the speaker token id. Mixture records pair speaker tokens with
transcripts and mixing weights; no audio is touched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ValidationError
from .textdist import WordSeq, words

TOKEN_WORD_RE = re.compile(r"^<spk\d+>$")


def token_word(token: int) -> str:
    """Surface form used when a speaker token is serialized into text."""
    return f"<spk{token}>"


def strip_token_words(seq: WordSeq) -> WordSeq:
    """Drop any serialized speaker tokens from a word sequence."""
    if any(TOKEN_WORD_RE.match(w) for w in seq):
        return tuple(w for w in seq if not TOKEN_WORD_RE.match(w))
    return seq


@dataclass(frozen=True)
class SpeakerEmbedding:
    utt_id: str
    vector: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1:
            raise ValidationError(f"embedding {self.utt_id!r} is not a vector")
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"embedding {self.utt_id!r} has non-finite values")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class Codebook:
    """k centroids in the unit-normalized embedding space.

    The centroid index is the speaker token id. `inertia_history` records
    the within-cluster sum of squares at each training iteration and
    `training_labels` the assignment of the training embeddings under the
    final centroids; neither is serialized.
    """

    centroids: np.ndarray
    k: int
    seed: int
    inertia_history: tuple[float, ...] = ()
    training_labels: tuple[int, ...] = ()

    def __post_init__(self):
        cents = np.asarray(self.centroids, dtype=np.float64)
        if cents.ndim != 2 or cents.shape[0] != self.k:
            raise ValidationError(f"codebook needs exactly k={self.k} centroids")
        if not np.all(np.isfinite(cents)):
            raise ValidationError("codebook centroids must be finite")
        object.__setattr__(self, "centroids", cents)

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])


@dataclass(frozen=True)
class MixSource:
    speaker_token: int
    text: WordSeq
    weight: float


@dataclass(frozen=True)
class MixtureRecord:
    """One overlapped-speech item: per-source (token, transcript, weight).

    The waveform itself is out of scope; `audio_ref` is an opaque handle.
    1-source records are valid.
    """

    mix_id: str
    sources: tuple[MixSource, ...]
    audio_ref: str | None = None

    def __post_init__(self):
        if len(self.sources) < 1:
            raise ValidationError(f"mixture {self.mix_id!r} has no sources")
        if any(s.weight <= 0 for s in self.sources):
            raise ValidationError(f"mixture {self.mix_id!r} has non-positive weight")


def _normalize_rows(x: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValidationError(f"{what}: zero-norm embedding cannot be normalized")
    return x / norms


def _squared_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # elementwise form: exact ties stay exact, unlike the dot-product trick
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]), dtype=np.float64)
    centroids[0] = x[rng.integers(n)]
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        probs = d2 / d2.sum()
        idx = rng.choice(n, p=probs)
        centroids[i] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centroids[i]) ** 2, axis=1))
    return centroids


def kmeans_train(
    embeddings: list[SpeakerEmbedding],
    k: int,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-6,
) -> Codebook:
    """Lloyd's algorithm from k-means++ seeding; deterministic per seed.

    Stops when the largest centroid movement drops below `tol` or after
    `max_iters` iterations. A cluster that loses all members is re-seeded
    with the point farthest from its nearest centroid, so k never shrinks.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if len(embeddings) < k:
        raise ValidationError(
            f"need at least k={k} embeddings, got {len(embeddings)}"
        )
    dims = {e.vector.shape[0] for e in embeddings}
    if len(dims) != 1:
        raise ValidationError(f"embeddings have mixed dimensions: {sorted(dims)}")
    x = _normalize_rows(np.stack([e.vector for e in embeddings]), "kmeans_train")
    if np.unique(x, axis=0).shape[0] < k:
        raise ValidationError("insufficient distinct embeddings")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(x, k, rng)

    history: list[float] = []
    labels = np.zeros(len(x), dtype=np.int64)
    for _ in range(max_iters):
        d2 = _squared_dists(x, centroids)
        labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(len(x)), labels].sum()))

        new_centroids = centroids.copy()
        for c in range(k):
            members = x[labels == c]
            if len(members):
                new_centroids[c] = members.mean(axis=0)
        empties = [c for c in range(k) if not np.any(labels == c)]
        if empties:
            dmin = np.min(_squared_dists(x, new_centroids), axis=1)
            for c in empties:
                far = int(np.argmax(dmin))
                new_centroids[c] = x[far]
                dmin = np.minimum(dmin, np.sum((x - x[far]) ** 2, axis=1))
                dmin[far] = -1.0  # each re-seed takes a fresh point

        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < tol:
            break

    final_labels = np.argmin(_squared_dists(x, centroids), axis=1)
    return Codebook(
        centroids=centroids,
        k=k,
        seed=seed,
        inertia_history=tuple(history),
        training_labels=tuple(int(c) for c in final_labels),
    )


def assign_token(codebook: Codebook, embedding: SpeakerEmbedding) -> int:
    """Index of the nearest centroid (squared Euclidean); ties go to the
    lowest index."""
    vec = embedding.vector
    if vec.shape[0] != codebook.dim:
        raise ValidationError(
            f"embedding {embedding.utt_id!r} has dim {vec.shape[0]}, "
            f"codebook has dim {codebook.dim}"
        )
    vec = _normalize_rows(vec[None, :], f"assign_token({embedding.utt_id!r})")[0]
    d2 = np.sum((codebook.centroids - vec) ** 2, axis=1)
    return int(np.argmin(d2))


def build_mixture_records(
    utterances: list[tuple[str, str | WordSeq, SpeakerEmbedding]],
    grouping: list[list[str]],
    codebook: Codebook,
    weights: list[float] | None = None,
    weight_range: tuple[float, float] | None = None,
    seed: int = 0,
    mix_ids: list[str] | None = None,
) -> list[MixtureRecord]:
    """One MixtureRecord per id-group, with tokens from `assign_token`.

    `weights` fixes per-source weights positionally (every group must have
    that many sources); `weight_range=(lo, hi)` samples them uniformly with
    `seed`; with neither, all weights are 1.0.
    """
    if weights is not None and weight_range is not None:
        raise ValidationError("pass either weights or weight_range, not both")
    if weights is not None and any(w <= 0 for w in weights):
        raise ValidationError("mixing weights must be positive")
    if mix_ids is not None and len(mix_ids) != len(grouping):
        raise ValidationError("mix_ids must match grouping length")

    by_id: dict[str, tuple[WordSeq, int]] = {}
    for utt_id, transcript, emb in utterances:
        text = words(transcript) if isinstance(transcript, str) else tuple(transcript)
        by_id[utt_id] = (strip_token_words(text), assign_token(codebook, emb))

    rng = np.random.default_rng(seed)
    records = []
    for g, group in enumerate(grouping):
        if len(group) < 1:
            raise ValidationError(f"group {g} is empty")
        if weights is not None and len(weights) != len(group):
            raise ValidationError(
                f"group {g} has {len(group)} sources but {len(weights)} weights"
            )
        sources = []
        for s, utt_id in enumerate(group):
            if utt_id not in by_id:
                raise DataError(f"unknown utt_id: {utt_id!r}")
            text, token = by_id[utt_id]
            if weights is not None:
                w = float(weights[s])
            elif weight_range is not None:
                w = float(rng.uniform(weight_range[0], weight_range[1]))
            else:
                w = 1.0
            sources.append(MixSource(speaker_token=token, text=text, weight=w))
        mix_id = mix_ids[g] if mix_ids is not None else f"mix{g:06d}"
        records.append(MixtureRecord(mix_id=mix_id, sources=tuple(sources)))
    return records
