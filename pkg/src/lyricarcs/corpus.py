"""Corpus loading, validation, and descriptive statistics.

The corpus arrives as prepared JSONL or CSV files (one song per row) with
optional YouTube engagement metadata. Everything here is pure over
immutable inputs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Optional, Sequence

Z_99 = 2.576  # normal quantile used for all 99% CIs

METADATA_KEYS = ("views", "likes", "dislikes", "comments", "days_active")


class CorpusError(ValueError):
    """Raised for unreadable, malformed, or invariant-violating corpus input."""


@dataclass(frozen=True)
class VideoMetadata:
    views: int
    likes: int
    dislikes: int
    comments: int
    days_active: float

    def __post_init__(self):
        for name in ("views", "likes", "dislikes", "comments"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise CorpusError(f"{name} must be a non-negative integer, got {v!r}")
        if not (self.days_active > 0):
            raise CorpusError(f"days_active must be > 0, got {self.days_active!r}")


@dataclass(frozen=True)
class LyricRecord:
    id: str
    artist: str
    title: str
    raw_text: str
    metadata: Optional[VideoMetadata] = None

    def __post_init__(self):
        if not self.raw_text.strip():
            raise CorpusError(f"record {self.id!r}: raw_text empty after trim")


@dataclass(frozen=True)
class RateMetrics:
    views_per_100d: float
    likes_per_100d: float
    dislikes_per_100d: float
    comments_per_100d: float
    engagement: float


@dataclass(frozen=True)
class VariableStats:
    mean: float
    sd: float
    ci99_low: float
    ci99_high: float


@dataclass(frozen=True)
class CorpusStats:
    """Per-variable mean/SD/99% CI, Table-style corpus descriptives."""

    variables: dict  # name -> VariableStats
    n: int


@dataclass(frozen=True)
class SkippedRecord:
    line: int
    record_id: str
    reason: str


@dataclass
class LoadResult:
    records: list
    skipped: list  # of SkippedRecord


def compute_rates(m: VideoMetadata) -> RateMetrics:
    """Per-100-day rates and the engagement index (likes + dislikes + comments rates)."""
    f = 100.0 / m.days_active
    likes = m.likes * f
    dislikes = m.dislikes * f
    comments = m.comments * f
    return RateMetrics(
        views_per_100d=m.views * f,
        likes_per_100d=likes,
        dislikes_per_100d=dislikes,
        comments_per_100d=comments,
        engagement=likes + dislikes + comments,
    )


def describe(values: Sequence[float]) -> VariableStats:
    """Mean, sample SD (n-1), and normal-z 99% CI of the mean."""
    n = len(values)
    if n < 2:
        raise CorpusError(f"need at least 2 values for descriptives, got {n}")
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    sd = math.sqrt(var)
    half = Z_99 * sd / math.sqrt(n)
    return VariableStats(mean=mean, sd=sd, ci99_low=mean - half, ci99_high=mean + half)


def corpus_descriptives(corpus: Sequence[LyricRecord], tokenizer=None) -> CorpusStats:
    """Table of corpus descriptives: tokens, type-token ratio, and metadata counts.

    Token counts are post-annotation-stripping (the tokenizer removes
    bracketed section headers before counting).
    """
    if len(corpus) < 2:
        raise CorpusError(f"need at least 2 records, got {len(corpus)}")
    if tokenizer is None:
        from .trajectory import tokenize

        tokenizer = lambda text: tokenize(text, source_id="").tokens

    token_lists = [tokenizer(r.raw_text) for r in corpus]
    variables = {
        "tokens": describe([len(t) for t in token_lists]),
        "type_token_ratio": describe([type_token_ratio(t) for t in token_lists]),
    }
    with_meta = [r.metadata for r in corpus if r.metadata is not None]
    if len(with_meta) >= 2:
        variables["comments"] = describe([m.comments for m in with_meta])
        variables["likes"] = describe([m.likes for m in with_meta])
        variables["dislikes"] = describe([m.dislikes for m in with_meta])
        variables["days_active"] = describe([m.days_active for m in with_meta])
    return CorpusStats(variables=variables, n=len(corpus))


def type_token_ratio(tokens: Sequence[str]) -> float:
    """Distinct / total tokens, case-folded."""
    if not tokens:
        raise CorpusError("type_token_ratio requires at least one token")
    folded = [t.casefold() for t in tokens]
    return len(set(folded)) / len(folded)


def oov_rate(tokens: Sequence[str], wordlist: Iterable[str]) -> float:
    """Fraction of tokens (case-folded) absent from the wordlist."""
    if not tokens:
        raise CorpusError("oov_rate requires at least one token")
    words = {w.casefold() for w in wordlist}
    if not words:
        raise CorpusError("oov_rate requires a non-empty wordlist")
    absent = sum(1 for t in tokens if t.casefold() not in words)
    return absent / len(tokens)


def load_wordlist(path) -> set:
    """One lowercase word per line, UTF-8."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            w = line.strip()
            if w:
                words.add(w.casefold())
    if not words:
        raise CorpusError(f"wordlist {path} is empty")
    return words


def _days_from_dates(row: dict, line: int, rid: str) -> Optional[float]:
    pub, ret = row.get("publish_date"), row.get("retrieval_date")
    if not pub or not ret:
        return None
    try:
        delta = date.fromisoformat(str(ret)) - date.fromisoformat(str(pub))
    except ValueError as exc:
        raise CorpusError(f"line {line}, record {rid!r}: bad date ({exc})")
    return float(delta.days)


def _parse_metadata(row: dict, line: int, rid: str) -> Optional[VideoMetadata]:
    # days_active may be derived from publish/retrieval dates when absent
    if row.get("days_active") in (None, ""):
        derived = _days_from_dates(row, line, rid)
        if derived is not None:
            row = dict(row, days_active=derived)
    present = [k for k in METADATA_KEYS if row.get(k) not in (None, "")]
    if not present:
        return None
    missing = [k for k in METADATA_KEYS if k not in present]
    if missing:
        raise CorpusError(
            f"line {line}, record {rid!r}: partial metadata, missing {missing}"
        )
    try:
        counts = {k: int(row[k]) for k in ("views", "likes", "dislikes", "comments")}
        days = float(row["days_active"])
    except (TypeError, ValueError) as exc:
        raise CorpusError(f"line {line}, record {rid!r}: bad metadata value ({exc})")
    return VideoMetadata(days_active=days, **counts)


def _parse_row(row: dict, line: int) -> LyricRecord:
    rid = row.get("id")
    if not rid:
        raise CorpusError(f"line {line}: missing id")
    rid = str(rid)
    text = row.get("lyrics") or ""
    if not str(text).strip():
        raise CorpusError(f"line {line}, record {rid!r}: empty lyrics")
    return LyricRecord(
        id=rid,
        artist=str(row.get("artist") or ""),
        title=str(row.get("title") or ""),
        raw_text=str(text),
        metadata=_parse_metadata(row, line, rid),
    )


def _iter_rows(path: Path, fmt: str):
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    yield lineno, json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})")
    elif fmt == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise CorpusError("CSV file has no header row")
            for lineno, row in enumerate(reader, start=2):
                yield lineno, row
    else:
        raise CorpusError(f"unknown corpus format {fmt!r} (expected jsonl or csv)")


def load_corpus(path, format: str = "jsonl", strict: bool = True) -> LoadResult:
    """Load and validate a corpus file.

    In strict mode any malformed row is fatal; otherwise bad rows are
    collected in `skipped` with line numbers and reasons. Duplicate ids are
    always fatal.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    records, skipped, seen = [], [], {}
    for lineno, row in _iter_rows(path, format):
        try:
            rec = _parse_row(row, lineno)
        except CorpusError as exc:
            if strict:
                raise
            rid = str(row.get("id", "?")) if isinstance(row, dict) else "?"
            skipped.append(SkippedRecord(line=lineno, record_id=rid, reason=str(exc)))
            continue
        if rec.id in seen:
            raise CorpusError(
                f"line {lineno}: duplicate id {rec.id!r} (first seen line {seen[rec.id]})"
            )
        seen[rec.id] = lineno
        records.append(rec)
    return LoadResult(records=records, skipped=skipped)
