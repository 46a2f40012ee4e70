"""Binary frequency-occupancy signatures and Jaccard matching."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import welch

from .errors import ConfigError, DimensionError, SizeError

FLOOR_DB = -300.0

_WINDOWS = {"hann": "hann", "hamming": "hamming", "rect": "boxcar"}


@dataclass(frozen=True)
class FeatureConfig:
    segment_len: int = 64
    fft_len: int = 128
    overlap: float = 0.5
    window: str = "hann"

    def __post_init__(self):
        if self.segment_len < 1:
            raise ConfigError("segment_len must be positive")
        if self.fft_len < self.segment_len:
            raise ConfigError("fft_len must be >= segment_len")
        if not (0.0 <= self.overlap < 1.0):
            raise ConfigError("overlap must lie in [0, 1)")
        if self.window not in _WINDOWS:
            raise ConfigError(f"window must be one of {sorted(_WINDOWS)}")

    @property
    def hop(self) -> int:
        return max(1, int(round(self.segment_len * (1.0 - self.overlap))))


SUBBAND_FEATURES = FeatureConfig(segment_len=64, fft_len=128)
FULLBAND_FEATURES = FeatureConfig(segment_len=256, fft_len=512)


def welch_log_psd(x, cfg: FeatureConfig = SUBBAND_FEATURES) -> np.ndarray:
    """Welch PSD in dB over all ``fft_len`` bins (FFT order), floored at -300 dB.

    Segments are zero-padded to ``fft_len``; each periodogram is divided by
    the window energy.
    """
    x = np.asarray(x)
    if len(x) < cfg.segment_len:
        raise SizeError(f"need at least {cfg.segment_len} samples, got {len(x)}")
    _, p = welch(
        x,
        fs=1.0,
        window=_WINDOWS[cfg.window],
        nperseg=cfg.segment_len,
        noverlap=cfg.segment_len - cfg.hop,
        nfft=cfg.fft_len,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(p)
    return np.maximum(db, FLOOR_DB)


def binarize(log_psd) -> np.ndarray:
    """1 where the value reaches the mid-point of its max and min, else 0.

    Bins sitting on the -300 dB floor carry no power and are always 0, so a
    silent input gives an all-zero signature.
    """
    p = np.asarray(log_psd, dtype=float)
    threshold = (p.max() + p.min()) / 2.0
    return ((p >= threshold) & (p > FLOOR_DB)).astype(np.uint8)


def signature(x, cfg: FeatureConfig = SUBBAND_FEATURES) -> np.ndarray:
    return binarize(welch_log_psd(x, cfg))


def jaccard(a, b) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise DimensionError(f"bit vectors differ in length: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def jaccard_scores(query, candidates: Sequence) -> np.ndarray:
    return np.array([jaccard(query, c) for c in candidates])


def select_best(query, candidates: Sequence) -> int:
    """Index of the most similar candidate; ties go to the lowest index."""
    if len(candidates) == 0:
        raise ConfigError("no candidates to select from")
    return int(np.argmax(jaccard_scores(query, candidates)))
