"""Small shared helpers: seed derivation and text normalization."""

from __future__ import annotations

import hashlib
import re


def derive_seed(*parts: object) -> int:
    """Derive a stable 63-bit seed from a base seed and context parts.

    Hash-based so that per-mixture / per-token randomness is reproducible
    across runs and platforms (never wall-clock based).
    """
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1


_PUNCT_RE = re.compile(r"[^\w\s']", flags=re.UNICODE)


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace.

    Optional preprocessing for the CLI; the core distance/merge code treats
    words as opaque tokens and never normalizes.
    """
    return " ".join(_PUNCT_RE.sub(" ", text.lower()).split())
