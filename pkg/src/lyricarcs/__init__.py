"""Sentiment trajectory analytics for noisy song-lyric corpora.

Extracts valence-shifted sentiment trajectories from lyrics, standardizes
them to a fixed 100-bin narrative time via low-pass DCT, clusters the
resulting arcs with k-means, and relates cluster membership to video
popularity and engagement through chi-square and negative binomial models.
"""

__version__ = "0.1.0"
