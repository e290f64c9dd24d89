"""JSON / JSON-lines readers and writers for every file format.

All readers are streaming and abort on the first malformed line with the
path and line number. All writers emit one compact JSON object per line
with stable key order, so identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np

from .clustering import Hypothesis
from .errors import DataError, ValidationError
from .merging import MergedOutput, MergedTranscription
from .pipeline import (
    CountReport,
    Reference,
    ReferenceSet,
    TokenDistribution,
    WerReport,
)
from .speaker_tokens import (
    Codebook,
    MixSource,
    MixtureRecord,
    SpeakerEmbedding,
    strip_token_words,
    token_word,
)
from .textdist import WordSeq, words


def _dumps(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line number, object) per non-empty line; abort on bad JSON."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON line: {exc}") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(_dumps(row))
            fh.write("\n")


def _require(obj: dict, key: str, path, lineno: int) -> Any:
    if key not in obj:
        raise DataError(f"{path}:{lineno}: missing key {key!r}")
    return obj[key]


# -- embeddings: {"utt_id": str, "vector": [float, ...]} --------------------

def load_embeddings(path: str | Path) -> list[SpeakerEmbedding]:
    out = []
    for lineno, obj in read_jsonl(path):
        utt_id = _require(obj, "utt_id", path, lineno)
        vector = _require(obj, "vector", path, lineno)
        try:
            out.append(SpeakerEmbedding(utt_id=str(utt_id), vector=np.asarray(vector)))
        except ValidationError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def save_embeddings(path: str | Path, embeddings: Iterable[SpeakerEmbedding]) -> None:
    write_jsonl(
        path,
        ({"utt_id": e.utt_id, "vector": e.vector.tolist()} for e in embeddings),
    )


# -- codebook: {"k", "dim", "seed", "centroids"} -----------------------------

def save_codebook(path: str | Path, codebook: Codebook) -> None:
    payload = {
        "k": codebook.k,
        "dim": codebook.dim,
        "seed": codebook.seed,
        "centroids": codebook.centroids.tolist(),
    }
    Path(path).write_text(_dumps(payload) + "\n", encoding="utf-8")


def load_codebook(path: str | Path) -> Codebook:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        codebook = Codebook(
            centroids=np.asarray(obj["centroids"], dtype=np.float64),
            k=int(obj["k"]),
            seed=int(obj["seed"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as exc:
        raise DataError(f"{path}: invalid codebook file: {exc}") from exc
    if codebook.dim != int(obj["dim"]):
        raise DataError(f"{path}: dim field disagrees with centroid shape")
    return codebook


# -- mixtures: {"mix_id", "sources": [{"token","text","weight"}], "audio_ref"}

def save_mixtures(
    path: str | Path, records: Iterable[MixtureRecord], with_labels: bool = False
) -> None:
    def rows():
        for rec in records:
            sources = []
            for s in rec.sources:
                row = {
                    "token": s.speaker_token,
                    "text": " ".join(s.text),
                    "weight": s.weight,
                }
                if with_labels:
                    # training-label serialization: speaker token prepended
                    row["label"] = " ".join((token_word(s.speaker_token),) + s.text)
                sources.append(row)
            yield {"mix_id": rec.mix_id, "sources": sources, "audio_ref": rec.audio_ref}

    write_jsonl(path, rows())


def load_mixtures(path: str | Path) -> list[MixtureRecord]:
    out = []
    for lineno, obj in read_jsonl(path):
        mix_id = _require(obj, "mix_id", path, lineno)
        sources = []
        for s in _require(obj, "sources", path, lineno):
            sources.append(
                MixSource(
                    speaker_token=int(_require(s, "token", path, lineno)),
                    text=strip_token_words(words(_require(s, "text", path, lineno))),
                    weight=float(_require(s, "weight", path, lineno)),
                )
            )
        try:
            out.append(
                MixtureRecord(
                    mix_id=str(mix_id),
                    sources=tuple(sources),
                    audio_ref=obj.get("audio_ref"),
                )
            )
        except ValidationError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


# -- token distributions: {"mix_id", "probs": {"<token>": p, ...}} -----------

def load_token_dists(path: str | Path) -> list[TokenDistribution]:
    out = []
    for lineno, obj in read_jsonl(path):
        mix_id = _require(obj, "mix_id", path, lineno)
        raw = _require(obj, "probs", path, lineno)
        try:
            probs = {int(t): float(p) for t, p in raw.items()}
            dist = TokenDistribution(mix_id=str(mix_id), probs=probs)
            dist.validate()
        except (ValueError, AttributeError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        out.append(dist)
    return out


def save_token_dists(path: str | Path, dists: Iterable[TokenDistribution]) -> None:
    write_jsonl(
        path,
        (
            {"mix_id": d.mix_id, "probs": {str(t): p for t, p in sorted(d.probs.items())}}
            for d in dists
        ),
    )


# -- provider rows: {"mix_id", "token", "text", "score"} ---------------------

def load_provider_rows(path: str | Path) -> dict[tuple[str, int], Hypothesis]:
    rows: dict[tuple[str, int], Hypothesis] = {}
    for lineno, obj in read_jsonl(path):
        mix_id = str(_require(obj, "mix_id", path, lineno))
        token = int(_require(obj, "token", path, lineno))
        key = (mix_id, token)
        if key in rows:
            raise DataError(
                f"{path}:{lineno}: duplicate provider row for "
                f"mix_id={mix_id!r} token={token}"
            )
        rows[key] = Hypothesis(
            speaker_token=token,
            text=strip_token_words(words(_require(obj, "text", path, lineno))),
            score=float(_require(obj, "score", path, lineno)),
        )
    return rows


def save_provider_rows(path: str | Path, rows: Iterable[Hypothesis | tuple]) -> None:
    """Rows are (mix_id, Hypothesis) pairs."""
    write_jsonl(
        path,
        (
            {
                "mix_id": mix_id,
                "token": h.speaker_token,
                "text": " ".join(h.text),
                "score": h.score,
            }
            for mix_id, h in rows
        ),
    )


# -- references: {"mix_id", "refs": [{"token": int|null, "text": str}]} ------

def load_references(path: str | Path) -> list[ReferenceSet]:
    out = []
    for lineno, obj in read_jsonl(path):
        mix_id = _require(obj, "mix_id", path, lineno)
        refs = []
        for r in _require(obj, "refs", path, lineno):
            token = r.get("token")
            refs.append(
                Reference(
                    speaker_token=int(token) if token is not None else None,
                    transcript=strip_token_words(words(_require(r, "text", path, lineno))),
                )
            )
        try:
            out.append(ReferenceSet(mix_id=str(mix_id), refs=tuple(refs)))
        except ValidationError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def save_references(path: str | Path, refsets: Iterable[ReferenceSet]) -> None:
    write_jsonl(
        path,
        (
            {
                "mix_id": rs.mix_id,
                "refs": [
                    {"token": r.speaker_token, "text": " ".join(r.transcript)}
                    for r in rs.refs
                ],
            }
            for rs in refsets
        ),
    )


# -- merged outputs: {"mix_id", "outputs": [{"text","support","tokens"}]} ----

def save_merged(path: str | Path, merged: Iterable[tuple[str, MergedOutput]]) -> None:
    write_jsonl(
        path,
        (
            {
                "mix_id": mix_id,
                "outputs": [
                    {
                        "text": " ".join(t.text),
                        "support": t.support,
                        "tokens": list(t.tokens),
                    }
                    for t in out.transcriptions
                ],
            }
            for mix_id, out in merged
        ),
    )


def load_merged(path: str | Path) -> list[tuple[str, MergedOutput]]:
    out = []
    for lineno, obj in read_jsonl(path):
        mix_id = str(_require(obj, "mix_id", path, lineno))
        transcriptions = []
        for t in _require(obj, "outputs", path, lineno):
            transcriptions.append(
                MergedTranscription(
                    text=words(_require(t, "text", path, lineno)),
                    support=int(_require(t, "support", path, lineno)),
                    tokens=tuple(int(x) for x in _require(t, "tokens", path, lineno)),
                )
            )
        out.append((mix_id, MergedOutput(transcriptions=tuple(transcriptions))))
    return out


# -- reports ------------------------------------------------------------------

def save_wer_report(path: str | Path, report: WerReport) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def save_count_report(path: str | Path, report: CountReport) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


# -- auxiliary inputs ---------------------------------------------------------

def load_transcripts(path: str | Path) -> dict[str, WordSeq]:
    """{"utt_id": str, "text": str} rows."""
    out = {}
    for lineno, obj in read_jsonl(path):
        utt_id = str(_require(obj, "utt_id", path, lineno))
        if utt_id in out:
            raise DataError(f"{path}:{lineno}: duplicate utt_id {utt_id!r}")
        out[utt_id] = strip_token_words(words(_require(obj, "text", path, lineno)))
    return out


def load_groups(path: str | Path) -> list[tuple[str, list[str]]]:
    """{"mix_id": str, "utt_ids": [str, ...]} rows."""
    out = []
    for lineno, obj in read_jsonl(path):
        mix_id = str(_require(obj, "mix_id", path, lineno))
        utt_ids = [str(u) for u in _require(obj, "utt_ids", path, lineno)]
        out.append((mix_id, utt_ids))
    return out
