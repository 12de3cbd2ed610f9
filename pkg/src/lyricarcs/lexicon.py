"""Sentiment and valence-shifter lexicon loading and querying.

Lexicons are TSV files (`term<TAB>value` / `term<TAB>class`), lowercased on
load and immutable afterwards. Sentiment values are kept on whatever scale
the file uses; no rescaling happens here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

SHIFTER_CLASSES = ("negator", "amplifier", "deamplifier", "adversative")


class LexiconError(ValueError):
    """Raised on parse failures, duplicate terms, or bad values."""


@dataclass(frozen=True)
class SentimentLexicon:
    name: str
    entries: dict  # term (1-3 lowercase tokens) -> polarity

    def __post_init__(self):
        if not self.entries:
            raise LexiconError(f"lexicon {self.name!r} has no entries")

    def __len__(self):
        return len(self.entries)

    @property
    def max_key_tokens(self) -> int:
        return max(k.count(" ") + 1 for k in self.entries)


@dataclass(frozen=True)
class ShifterLexicon:
    entries: dict  # term -> class, one of SHIFTER_CLASSES

    def __len__(self):
        return len(self.entries)


def load_lexicon(path, name: Optional[str] = None) -> SentimentLexicon:
    """Load a `term<TAB>value` TSV. Duplicate terms are an error."""
    path = Path(path)
    entries = {}
    duplicates = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise LexiconError(f"{path}:{lineno}: expected 2 tab-separated columns")
            term = " ".join(parts[0].lower().split())
            if not term or term.count(" ") > 2:
                raise LexiconError(f"{path}:{lineno}: key must be 1-3 tokens, got {parts[0]!r}")
            try:
                value = float(parts[1])
            except ValueError:
                raise LexiconError(f"{path}:{lineno}: non-numeric value {parts[1]!r}")
            if not math.isfinite(value):
                raise LexiconError(f"{path}:{lineno}: non-finite value for {term!r}")
            if term in entries:
                duplicates.append(term)
            entries[term] = value
    if duplicates:
        raise LexiconError(f"{path}: duplicate terms: {sorted(set(duplicates))}")
    return SentimentLexicon(name=name or path.stem, entries=entries)


def load_shifters(path=None) -> ShifterLexicon:
    """Load a `term<TAB>class` TSV; defaults to the bundled shifter list."""
    if path is None:
        ref = resources.files("lyricarcs.data") / "shifters.tsv"
        text = ref.read_text(encoding="utf-8")
        source = "bundled shifters.tsv"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise LexiconError(f"{source}:{lineno}: expected 2 tab-separated columns")
        term = " ".join(parts[0].lower().split())
        cls = parts[1].strip().lower()
        if cls not in SHIFTER_CLASSES:
            raise LexiconError(f"{source}:{lineno}: unknown shifter class {cls!r}")
        if term in entries:
            raise LexiconError(f"{source}:{lineno}: duplicate shifter term {term!r}")
        entries[term] = cls
    if not entries:
        raise LexiconError(f"{source}: no shifter entries")
    return ShifterLexicon(entries=entries)


def lookup(lex: SentimentLexicon, term: str) -> Optional[float]:
    """Case-insensitive exact key match; None when absent."""
    return lex.entries.get(" ".join(term.lower().split()))


@dataclass(frozen=True)
class LexiconDiff:
    only_a: list
    only_b: list
    value_disagreements: list  # (term, value_a, value_b), sorted by term


def lexicon_diff(a: SentimentLexicon, b: SentimentLexicon) -> LexiconDiff:
    """Partition the union of keys: a-only, b-only, and overlapping terms
    whose values disagree. Output is sorted for determinism."""
    keys_a, keys_b = set(a.entries), set(b.entries)
    disagreements = [
        (t, a.entries[t], b.entries[t])
        for t in sorted(keys_a & keys_b)
        if a.entries[t] != b.entries[t]
    ]
    return LexiconDiff(
        only_a=sorted(keys_a - keys_b),
        only_b=sorted(keys_b - keys_a),
        value_disagreements=disagreements,
    )
