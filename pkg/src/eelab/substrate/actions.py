"""Action text canonicalization.

All deduplication and equality checks in the pipeline compare canonical
forms.  Two surface grammars are normalized: bracketed commands like
``click[Buy Now]`` and plain imperative text like ``take book 3 from desk 1``.
Tagged forms (``<search>query</search>``) are tightened the same way.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_WS_RE = re.compile(r"\s+")
_BRACKET_RE = re.compile(r"(\w+)\s*\[\s*(.*?)\s*\]")
_TAG_OPEN_RE = re.compile(r"(<\w+>)\s+")
_TAG_CLOSE_RE = re.compile(r"\s+(</\w+>)")


def canonicalize(raw: str) -> str:
    """Lowercase, trim, collapse whitespace, tighten bracket/tag forms.

    Idempotent: canonicalize(canonicalize(x)) == canonicalize(x).
    Empty input canonicalizes to the empty string (flagged invalid downstream).
    """
    text = _WS_RE.sub(" ", raw.strip().lower())
    text = _BRACKET_RE.sub(lambda m: f"{m.group(1)}[{_WS_RE.sub(' ', m.group(2))}]", text)
    text = _TAG_OPEN_RE.sub(r"\1", text)
    text = _TAG_CLOSE_RE.sub(r"\1", text)
    return text


@dataclass(frozen=True)
class ActionText:
    """An action as emitted (raw) plus its canonical comparison form."""

    raw: str
    canonical: str

    @classmethod
    def of(cls, raw: str) -> "ActionText":
        return cls(raw=raw, canonical=canonicalize(raw))

    @property
    def is_empty(self) -> bool:
        return self.canonical == ""

    def __str__(self) -> str:
        return self.canonical
