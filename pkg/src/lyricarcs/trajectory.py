"""Narrative-time sentiment trajectories.

Tokenizes noisy lyric text, extracts a valence-shifted sparse sentiment
vector using +/- 3-token context windows around each sentiment match, and
standardizes it to a fixed 100-bin narrative time by keeping only the
leading DCT components and resampling.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct as _dct

from .lexicon import SentimentLexicon, ShifterLexicon

MIN_TRAJECTORY_TOKENS = 10  # shorter lyrics are excluded from trajectory analysis

_BRACKETED = re.compile(r"\[[^\]]*\]")
_STRIP_CHARS = string.punctuation.replace("'", "") + "‘’“”…"


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class TokenStream:
    tokens: tuple
    source_id: str

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class SparseSentimentVector:
    values: np.ndarray  # length = token count; zeros where no sentiment match

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Trajectory:
    bins: np.ndarray  # length out_len (default 100)
    lexicon_name: str
    source_id: str


@dataclass(frozen=True)
class ShifterWeights:
    """Correction-formula constants; all configuration-exposed."""

    amplifier: float = 0.8
    deamplifier: float = 0.8
    adversative: float = 0.25
    clamp_low: float = 0.1
    clamp_high: float = 3.0


def tokenize(raw_text: str, source_id: str = "") -> TokenStream:
    """Lowercase whitespace tokenization for noisy lyric text.

    Bracketed annotations (section headers like "[Chorus]") are removed,
    leading/trailing punctuation is stripped per token, and intra-word
    apostrophes survive (so "don't" stays one token).
    """
    if not raw_text.strip():
        raise TrajectoryError("empty text")
    cleaned = _BRACKETED.sub(" ", raw_text).lower()
    tokens = []
    for piece in cleaned.split():
        tok = piece.strip(_STRIP_CHARS).strip("'")
        if tok:
            tokens.append(tok)
    if not tokens:
        raise TrajectoryError("text empty after cleaning")
    return TokenStream(tokens=tuple(tokens), source_id=source_id)


def shifted_value(
    base: float, n_neg: int, n_amp: int, n_deamp: int, n_adv: int,
    weights: ShifterWeights = ShifterWeights(),
) -> float:
    """Apply the valence-shifter correction to a base polarity.

    Sign flips once per negator; intensity is 1 + w_a*A - w_d*D - w_adv*ADV
    clamped to [clamp_low, clamp_high].
    """
    intensity = 1.0 + weights.amplifier * n_amp - weights.deamplifier * n_deamp \
        - weights.adversative * n_adv
    intensity = min(max(intensity, weights.clamp_low), weights.clamp_high)
    return base * ((-1.0) ** n_neg) * intensity


def extract_sparse(
    stream: TokenStream,
    lex: SentimentLexicon,
    shifters: ShifterLexicon,
    window: int = 3,
    weights: ShifterWeights = ShifterWeights(),
) -> SparseSentimentVector:
    """Valence-shifted sparse sentiment vector over the token stream.

    Sentiment keys match longest-first (3-, 2-, then 1-grams), left to
    right, consuming matched tokens. For a match starting at position i,
    negators and adversatives are counted in the preceding half-window
    only; (de-)amplifiers count on both sides. The window is clipped at
    lyric boundaries and excludes the matched tokens themselves. Shifter
    tokens are never consumed and may serve several nearby matches.
    """
    if window < 1:
        raise TrajectoryError(f"window must be >= 1, got {window}")
    tokens = stream.tokens
    L = len(tokens)
    values = np.zeros(L)
    max_n = min(lex.max_key_tokens, 3)

    matches = []  # (start, length, base polarity)
    i = 0
    while i < L:
        for n in range(min(max_n, L - i), 0, -1):
            key = " ".join(tokens[i : i + n])
            if key in lex.entries:
                matches.append((i, n, lex.entries[key]))
                i += n
                break
        else:
            i += 1

    for start, length, base in matches:
        match_span = range(start, start + length)
        lo = max(0, start - window)
        hi = min(L - 1, start + window)
        n_neg = n_amp = n_deamp = n_adv = 0
        for j in range(lo, hi + 1):
            if j in match_span:
                continue
            cls = shifters.entries.get(tokens[j])
            if cls is None:
                continue
            preceding = j < start
            if cls == "negator" and preceding:
                n_neg += 1
            elif cls == "amplifier":
                n_amp += 1
            elif cls == "deamplifier":
                n_deamp += 1
            elif cls == "adversative" and preceding:
                n_adv += 1
        values[start] = shifted_value(base, n_neg, n_amp, n_deamp, n_adv, weights)

    return SparseSentimentVector(values=values)


def dct_standardize(
    v: SparseSentimentVector,
    out_len: int = 100,
    low_pass: int = 5,
    lexicon_name: str = "",
    source_id: str = "",
) -> Trajectory:
    """Low-pass DCT standardization to a fixed-length narrative-time curve.

    Forward DCT-II of the sparse vector, zero all but the first `low_pass`
    coefficients, then evaluate the inverse cosine series at `out_len`
    equally spaced points. No amplitude rescaling.
    """
    x = np.asarray(v.values, dtype=float)
    L = len(x)
    if L == 0:
        raise TrajectoryError("empty sentiment vector")
    if not (1 <= low_pass <= L):
        raise TrajectoryError(f"low_pass must be in [1, {L}], got {low_pass}")
    if out_len < 2:
        raise TrajectoryError(f"out_len must be >= 2, got {out_len}")

    # scipy's unnormalized DCT-II is 2 * sum(x_n cos(...)); halve to get the
    # plain cosine-series coefficients
    coeffs = _dct(x, type=2, norm=None)[:low_pass] / 2.0
    m = np.arange(out_len)
    bins = np.full(out_len, coeffs[0] / L)
    for k in range(1, low_pass):
        bins = bins + (2.0 / L) * coeffs[k] * np.cos(
            np.pi * k * (2 * m + 1) / (2.0 * out_len)
        )
    return Trajectory(bins=bins, lexicon_name=lexicon_name, source_id=source_id)


def bin_to_word_range(bin_lo: float, bin_hi: float, L: int):
    """Map a narrative-time percentage range to word positions (half-up rounding)."""
    if not (0 < bin_lo <= bin_hi <= 100):
        raise TrajectoryError(f"bins out of range: ({bin_lo}, {bin_hi})")
    if L < 1:
        raise TrajectoryError(f"L must be >= 1, got {L}")
    half_up = lambda x: int(np.floor(x + 0.5))
    return half_up(bin_lo / 100.0 * L), half_up(bin_hi / 100.0 * L)
