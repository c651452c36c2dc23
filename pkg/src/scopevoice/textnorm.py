"""Utterance and phrase normalization shared by the grammar and the resolver."""

from __future__ import annotations

import re

_NON_WORD = re.compile(r"[^a-z0-9]+")


def norm_tokens(text: str) -> list[str]:
    """Lowercase word tokens; punctuation and underscores act as separators."""
    return [t for t in _NON_WORD.split(text.lower()) if t]


def norm_phrase(text: str) -> str:
    return " ".join(norm_tokens(text))
