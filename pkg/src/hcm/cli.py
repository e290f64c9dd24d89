"""Command-line surface.

Subcommands: kmeans-train, assign-tokens, make-mixtures, simulate,
select-candidates, merge, score-wer, count-speakers. Every subcommand is
deterministic: same files and flags give the same output bytes, and all
randomness flows through explicit --seed flags (default 0).

Exit codes: 0 success, 2 validation error, 3 data-consistency error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import io
from .clustering import clustering_diagnostics
from .errors import DataError, ValidationError
from .merging import MergedOutput, MergedTranscription
from .pipeline import (
    FileProvider,
    WerReport,
    count_accuracy,
    format_count_table,
    run_hcm_detailed,
    score_wer,
    select_candidates,
)
from .simulate import SimConfig, SyntheticProvider, generate_corpus, load_manifest, write_corpus
from .speaker_tokens import assign_token, build_mixture_records, kmeans_train
from .textdist import words
from .util import derive_seed, normalize_text

_REQUIRED = object()


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="base RNG seed (default 0)")
    parser.add_argument("--workers", type=int, help="worker pool size (default 1)")
    parser.add_argument(
        "--config", help="JSON file of option defaults; explicit flags win"
    )


def _resolve(ns: argparse.Namespace, spec: dict[str, object]) -> argparse.Namespace:
    """Fill unset options from --config, then from defaults.

    Unknown config keys are rejected. Required options must end up set.
    """
    config = {}
    if ns.config:
        try:
            raw = json.loads(Path(ns.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValidationError(f"{ns.config}: config must be a JSON object")
        config = {str(k).replace("-", "_"): v for k, v in raw.items()}
        unknown = set(config) - set(spec)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    for name, default in spec.items():
        value = getattr(ns, name, None)
        if value is None or value is False:  # unset flag; 0/0.0 are explicit
            if name in config:
                value = config[name]
            elif value is None:
                value = None if default is _REQUIRED else default
        if value is None and default is _REQUIRED:
            raise ValidationError(f"missing required option --{name.replace('_', '-')}")
        setattr(ns, name, value)
    return ns


def _csv_ints(text: str, what: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x != ""]
    except ValueError as exc:
        raise ValidationError(f"bad {what}: {text!r}") from exc


def _csv_floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x != ""]
    except ValueError as exc:
        raise ValidationError(f"bad {what}: {text!r}") from exc


def _renormalize(seq):
    return words(normalize_text(" ".join(seq)))


# -- subcommands --------------------------------------------------------------

KMEANS_OPTS = {
    "embeddings": _REQUIRED,
    "k": _REQUIRED,
    "out": _REQUIRED,
    "max_iters": 100,
    "tol": 1e-6,
    "seed": 0,
    "workers": 1,
}


def cmd_kmeans_train(ns) -> int:
    _resolve(ns, KMEANS_OPTS)
    embeddings = io.load_embeddings(ns.embeddings)
    codebook = kmeans_train(
        embeddings, int(ns.k), seed=int(ns.seed), max_iters=int(ns.max_iters),
        tol=float(ns.tol),
    )
    io.save_codebook(ns.out, codebook)
    print(f"wrote codebook with k={codebook.k} dim={codebook.dim} to {ns.out}")
    return 0


ASSIGN_OPTS = {"codebook": _REQUIRED, "embeddings": _REQUIRED, "out": _REQUIRED,
               "seed": 0, "workers": 1}


def cmd_assign_tokens(ns) -> int:
    _resolve(ns, ASSIGN_OPTS)
    codebook = io.load_codebook(ns.codebook)
    embeddings = io.load_embeddings(ns.embeddings)
    io.write_jsonl(
        ns.out,
        (
            {"utt_id": e.utt_id, "token": assign_token(codebook, e)}
            for e in embeddings
        ),
    )
    print(f"assigned tokens for {len(embeddings)} utterances to {ns.out}")
    return 0


MAKE_MIX_OPTS = {
    "embeddings": _REQUIRED,
    "transcripts": _REQUIRED,
    "groups": _REQUIRED,
    "codebook": _REQUIRED,
    "out": _REQUIRED,
    "weights": None,
    "weight_range": None,
    "with_labels": False,
    "seed": 0,
    "workers": 1,
}


def cmd_make_mixtures(ns) -> int:
    _resolve(ns, MAKE_MIX_OPTS)
    codebook = io.load_codebook(ns.codebook)
    embeddings = {e.utt_id: e for e in io.load_embeddings(ns.embeddings)}
    transcripts = io.load_transcripts(ns.transcripts)
    groups = io.load_groups(ns.groups)
    utterances = []
    for utt_id, emb in embeddings.items():
        if utt_id not in transcripts:
            raise DataError(f"no transcript for utt_id {utt_id!r}")
        utterances.append((utt_id, transcripts[utt_id], emb))
    records = build_mixture_records(
        utterances,
        [ids for _, ids in groups],
        codebook,
        weights=_csv_floats(ns.weights, "--weights") if ns.weights else None,
        weight_range=(
            tuple(_csv_floats(ns.weight_range, "--weight-range"))
            if ns.weight_range
            else None
        ),
        seed=int(ns.seed),
        mix_ids=[mix_id for mix_id, _ in groups],
    )
    io.save_mixtures(ns.out, records, with_labels=bool(ns.with_labels))
    print(f"wrote {len(records)} mixture records to {ns.out}")
    return 0


SIMULATE_OPTS = {
    "outdir": _REQUIRED,
    "pool": 50,
    "dim": 16,
    "sigma": 0.01,
    "vocab_size": 200,
    "len_range": "4,12",
    "mix_sizes": "1,2,3",
    "num_mixes": 100,
    "noise": 0.0,
    "temp": 0.05,
    "codebook_k": 32,
    "enroll": 4,
    "seed": 0,
    "workers": 1,
}


def cmd_simulate(ns) -> int:
    _resolve(ns, SIMULATE_OPTS)
    len_range = _csv_ints(ns.len_range, "--len-range")
    if len(len_range) != 2:
        raise ValidationError(f"--len-range needs two integers, got {ns.len_range!r}")
    cfg = SimConfig(
        num_speakers_pool=int(ns.pool),
        embedding_dim=int(ns.dim),
        blob_sigma=float(ns.sigma),
        vocab_size=int(ns.vocab_size),
        utt_len_range=(len_range[0], len_range[1]),
        mix_sizes=tuple(_csv_ints(ns.mix_sizes, "--mix-sizes")),
        num_mixes=int(ns.num_mixes),
        noise_rate=float(ns.noise),
        softmax_temp=float(ns.temp),
        seed=int(ns.seed),
        codebook_k=int(ns.codebook_k),
        enroll_per_speaker=int(ns.enroll),
    )
    corpus = generate_corpus(cfg)
    paths = write_corpus(corpus, ns.outdir)
    print(f"wrote synthetic corpus ({cfg.num_mixes} mixtures) to {ns.outdir}")
    for name in sorted(paths):
        print(f"  {paths[name]}")
    return 0


SELECT_OPTS = {
    "dists": _REQUIRED,
    "n": _REQUIRED,
    "out": _REQUIRED,
    "mode": "top-n",
    "seed": 0,
    "workers": 1,
}


def cmd_select_candidates(ns) -> int:
    _resolve(ns, SELECT_OPTS)
    dists = sorted(io.load_token_dists(ns.dists), key=lambda d: d.mix_id)
    rows = []
    for dist in dists:
        seed = (
            derive_seed(int(ns.seed), "select", dist.mix_id)
            if ns.mode == "random"
            else 0
        )
        rows.append(
            {
                "mix_id": dist.mix_id,
                "tokens": select_candidates(dist, int(ns.n), mode=ns.mode, seed=seed),
            }
        )
    io.write_jsonl(ns.out, rows)
    print(f"selected {ns.n} candidates per mixture ({ns.mode}) to {ns.out}")
    return 0


MERGE_OPTS = {
    "dists": _REQUIRED,
    "n": _REQUIRED,
    "out": _REQUIRED,
    "provider": None,
    "simulate": None,
    "noise": None,
    "provider_seed": None,
    "mode": "top-n",
    "method": "rover",
    "threshold": 0.5,
    "fixed_k": None,
    "normalize_text": False,
    "diagnostics": None,
    "seed": 0,
    "workers": 1,
}


def cmd_merge(ns) -> int:
    _resolve(ns, MERGE_OPTS)
    if bool(ns.provider) == bool(ns.simulate):
        raise ValidationError("pass exactly one of --provider or --simulate")
    if ns.method == "simple" and ns.fixed_k is None:
        raise ValidationError("simple voting requires K: pass --fixed-k")

    if ns.provider:
        rows = io.load_provider_rows(ns.provider)
        if ns.normalize_text:
            rows = {
                key: h.__class__(h.speaker_token, _renormalize(h.text), h.score)
                for key, h in rows.items()
            }
        provider = FileProvider(rows)
    else:
        cfg = load_manifest(ns.simulate)
        corpus = generate_corpus(cfg)
        provider = SyntheticProvider(
            corpus,
            noise_rate=float(ns.noise) if ns.noise is not None else None,
            seed=int(ns.provider_seed) if ns.provider_seed is not None else None,
        )

    dists = sorted(io.load_token_dists(ns.dists), key=lambda d: d.mix_id)

    def run_one(dist):
        return run_hcm_detailed(
            dist,
            provider,
            int(ns.n),
            mode=ns.mode,
            threshold=float(ns.threshold),
            fixed_k=int(ns.fixed_k) if ns.fixed_k is not None else None,
            merge_method=ns.method,
            seed=int(ns.seed),
        )

    workers = max(1, int(ns.workers))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(run_one, dists))
    else:
        runs = [run_one(d) for d in dists]

    io.save_merged(ns.out, ((r.mix_id, r.outputs) for r in runs))
    if ns.diagnostics:
        io.write_jsonl(
            ns.diagnostics,
            (
                {"mix_id": r.mix_id, **clustering_diagnostics(r.hypotheses, r.clustering)}
                for r in runs
                if r.clustering is not None
            ),
        )
    print(f"merged {len(runs)} mixtures to {ns.out}")
    return 0


SCORE_OPTS = {
    "merged": _REQUIRED,
    "refs": _REQUIRED,
    "out": None,
    "normalize_text": False,
    "seed": 0,
    "workers": 1,
}


def cmd_score_wer(ns) -> int:
    _resolve(ns, SCORE_OPTS)
    merged = io.load_merged(ns.merged)
    refs = {r.mix_id: r for r in io.load_references(ns.refs)}
    report = WerReport()
    for mix_id, outputs in sorted(merged, key=lambda m: m[0]):
        if mix_id not in refs:
            raise DataError(f"no references for mix_id {mix_id!r}")
        refset = refs[mix_id]
        if ns.normalize_text:
            outputs = MergedOutput(
                transcriptions=tuple(
                    MergedTranscription(_renormalize(t.text), t.support, t.tokens)
                    for t in outputs.transcriptions
                )
            )
            refset = refset.__class__(
                mix_id=refset.mix_id,
                refs=tuple(
                    r.__class__(r.speaker_token, _renormalize(r.transcript))
                    for r in refset.refs
                ),
            )
        report.per_mix.append(score_wer(outputs, refset))
    if ns.out:
        io.save_wer_report(ns.out, report)
    print(f"WER: {report.aggregate_wer:.2f}%")
    return 0


COUNT_OPTS = {
    "merged": _REQUIRED,
    "refs": _REQUIRED,
    "out": None,
    "seed": 0,
    "workers": 1,
}


def cmd_count_speakers(ns) -> int:
    _resolve(ns, COUNT_OPTS)
    merged = io.load_merged(ns.merged)
    refs = {r.mix_id: r for r in io.load_references(ns.refs)}
    runs = []
    for mix_id, outputs in sorted(merged, key=lambda m: m[0]):
        if mix_id not in refs:
            raise DataError(f"no references for mix_id {mix_id!r}")
        runs.append((len(outputs.transcriptions), len(refs[mix_id].refs)))
    report = count_accuracy(runs)
    if ns.out:
        io.save_count_report(ns.out, report)
    print(format_count_table(report))
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcm",
        description="Cluster and merge redundant multi-talker ASR hypotheses.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("kmeans-train", help="train a speaker-token codebook")
    p.add_argument("--embeddings")
    p.add_argument("--k", type=int)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--tol", type=float)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_kmeans_train)

    p = sub.add_parser("assign-tokens", help="assign codebook tokens to embeddings")
    p.add_argument("--codebook")
    p.add_argument("--embeddings")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_assign_tokens)

    p = sub.add_parser("make-mixtures", help="build mixture records from groups")
    p.add_argument("--embeddings")
    p.add_argument("--transcripts")
    p.add_argument("--groups")
    p.add_argument("--codebook")
    p.add_argument("--weights")
    p.add_argument("--weight-range", dest="weight_range")
    p.add_argument("--with-labels", action="store_true", dest="with_labels")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_make_mixtures)

    p = sub.add_parser("simulate", help="generate a synthetic corpus")
    p.add_argument("--outdir")
    p.add_argument("--pool", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--vocab-size", type=int, dest="vocab_size")
    p.add_argument("--len-range", dest="len_range")
    p.add_argument("--mix-sizes", dest="mix_sizes")
    p.add_argument("--num-mixes", type=int, dest="num_mixes")
    p.add_argument("--noise", type=float)
    p.add_argument("--temp", type=float)
    p.add_argument("--codebook-k", type=int, dest="codebook_k")
    p.add_argument("--enroll", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("select-candidates", help="pick N speaker tokens per mixture")
    p.add_argument("--dists")
    p.add_argument("--n", type=int)
    p.add_argument("--mode", choices=["top-n", "random"])
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_select_candidates)

    p = sub.add_parser("merge", help="run candidate selection, clustering, merging")
    p.add_argument("--dists")
    p.add_argument("--provider")
    p.add_argument("--simulate", help="corpus manifest.json for a synthetic provider")
    p.add_argument("--noise", type=float, help="override simulated noise rate")
    p.add_argument("--provider-seed", type=int, dest="provider_seed")
    p.add_argument("--n", type=int)
    p.add_argument("--mode", choices=["top-n", "random"])
    p.add_argument("--method", choices=["rover", "simple"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--fixed-k", type=int, dest="fixed_k")
    p.add_argument("--normalize-text", action="store_true", dest="normalize_text")
    p.add_argument("--diagnostics")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("score-wer", help="permutation-optimal WER against references")
    p.add_argument("--merged")
    p.add_argument("--refs")
    p.add_argument("--normalize-text", action="store_true", dest="normalize_text")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_score_wer)

    p = sub.add_parser("count-speakers", help="speaker counting accuracy table")
    p.add_argument("--merged")
    p.add_argument("--refs")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_count_speakers)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
