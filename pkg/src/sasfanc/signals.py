"""Noise synthesis, acoustic path models and audio ingestion.

Every signal in the package travels as a :class:`SignalBuffer`. Paths are
plain FIR impulse responses; convolution is truncated to the input length so
that disturbance, reference and error stay sample-aligned.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.io import wavfile

from .errors import (
    BandSpecError,
    DegenerateInputError,
    MultiChannelError,
    SizeError,
    UnsupportedEncodingError,
    WavNotFoundError,
)

DEFAULT_RATE_HZ = 16000.0

# Band sets of the two-segment simulated scenario (Hz).
SCENARIO_BANDS_A = ((500.0, 2000.0), (3000.0, 6000.0), (7000.0, 7500.0))
SCENARIO_BANDS_B = ((20.0, 1000.0), (2000.0, 5000.0), (6000.0, 7980.0))
CONTIGUOUS_BAND = ((20.0, 7980.0),)


@dataclass(frozen=True)
class SignalBuffer:
    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_RATE_HZ

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)  # own copy; the caller's array stays writeable
        if x.ndim != 1:
            raise SizeError(f"expected a 1-D signal, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DegenerateInputError("signal contains NaN or Inf")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def window(self, start: int, stop: int) -> "SignalBuffer":
        return SignalBuffer(self.samples[start:stop], self.sample_rate_hz)


@dataclass(frozen=True)
class BandSpec:
    """Union of disjoint pass bands, each with an optional amplitude."""

    bands: Tuple[Tuple[float, float], ...]
    gain_shape: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        bands = tuple((float(lo), float(hi)) for lo, hi in self.bands)
        if not bands:
            raise BandSpecError("at least one band is required")
        prev_hi = -math.inf
        for lo, hi in bands:
            if not (0.0 <= lo < hi):
                raise BandSpecError(f"invalid band edges ({lo}, {hi})")
            if lo < prev_hi:
                raise BandSpecError("bands must be sorted and non-overlapping")
            prev_hi = hi
        object.__setattr__(self, "bands", bands)
        if self.gain_shape is not None:
            gains = tuple(float(g) for g in self.gain_shape)
            if len(gains) != len(bands):
                raise BandSpecError("gain_shape needs one entry per band")
            if any(not math.isfinite(g) or g < 0 for g in gains):
                raise BandSpecError("gains must be finite and non-negative")
            object.__setattr__(self, "gain_shape", gains)

    @property
    def gains(self) -> Tuple[float, ...]:
        return self.gain_shape if self.gain_shape is not None else (1.0,) * len(self.bands)

    def validate_rate(self, rate_hz: float) -> None:
        if self.bands[-1][1] > rate_hz / 2 + 1e-9:
            raise BandSpecError(
                f"band edge {self.bands[-1][1]} Hz exceeds Nyquist for {rate_hz} Hz"
            )

    def mask(self, freqs_hz: np.ndarray) -> np.ndarray:
        """Amplitude mask evaluated at non-negative frequencies."""
        f = np.abs(np.asarray(freqs_hz, dtype=float))
        out = np.zeros(f.shape)
        for (lo, hi), g in zip(self.bands, self.gains):
            out[(f >= lo) & (f <= hi)] = g
        return out

    def intersect(self, lo: float, hi: float) -> Optional["BandSpec"]:
        """Restriction to [lo, hi]; None when nothing remains."""
        kept, gains = [], []
        for (blo, bhi), g in zip(self.bands, self.gains):
            a, b = max(blo, lo), min(bhi, hi)
            if b > a:
                kept.append((a, b))
                gains.append(g)
        if not kept:
            return None
        return BandSpec(tuple(kept), tuple(gains) if self.gain_shape is not None else None)

    def to_dict(self) -> dict:
        d = {"bands": [list(b) for b in self.bands]}
        if self.gain_shape is not None:
            d["gain_shape"] = list(self.gain_shape)
        return d


@dataclass(frozen=True)
class PathModel:
    impulse_response: np.ndarray
    label: str = field(default="path")

    def __post_init__(self):
        h = np.asarray(self.impulse_response, dtype=float).ravel()
        if h.size == 0:
            raise SizeError("impulse response must be non-empty")
        if not np.all(np.isfinite(h)):
            raise DegenerateInputError("impulse response contains NaN or Inf")
        h.setflags(write=False)
        object.__setattr__(self, "impulse_response", h)

    def __len__(self):
        return len(self.impulse_response)

    def frequency_response(self, freqs_hz, rate_hz: float = DEFAULT_RATE_HZ) -> np.ndarray:
        w = 2 * np.pi * np.asarray(freqs_hz, dtype=float) / rate_hz
        n = np.arange(len(self.impulse_response))
        return np.exp(-1j * np.outer(w, n)) @ self.impulse_response


def gen_bandlimited_noise(
    spec: BandSpec,
    duration_s: float,
    rate_hz: float = DEFAULT_RATE_HZ,
    seed: Optional[int] = 0,
) -> SignalBuffer:
    """Gaussian noise whose spectrum is an exact rectangle over ``spec.bands``.

    A white Gaussian sequence is transformed, bins outside the bands are
    zeroed (inside ones scaled by the per-band gain) and the result is
    rescaled to unit variance.
    """
    spec.validate_rate(rate_hz)
    if not duration_s > 0:
        raise SizeError("duration must be positive")
    n = int(round(duration_s * rate_hz))
    if n < 2:
        raise SizeError(f"{duration_s} s at {rate_hz} Hz gives fewer than 2 samples")
    rng = np.random.default_rng(seed)
    spectrum = np.fft.rfft(rng.standard_normal(n))
    mask = spec.mask(np.fft.rfftfreq(n, 1.0 / rate_hz))
    if not np.any(mask > 0):
        raise BandSpecError("bands are narrower than the frequency grid")
    x = np.fft.irfft(spectrum * mask, n=n)
    x /= np.std(x)
    return SignalBuffer(x, rate_hz)


def design_bandpass_path(
    f_lo_hz: float,
    f_hi_hz: float,
    num_taps: int,
    delay_taps: int,
    seed: Optional[int] = None,
    rate_hz: float = DEFAULT_RATE_HZ,
    label: str = "path",
) -> PathModel:
    """Hamming-windowed band-pass FIR whose main lobe is centred on ``delay_taps``.

    The linear-phase core spans ``2 * delay_taps + 1`` taps. With a seed, each
    core tap is jittered by up to 5 % and the remaining taps are filled with a
    decaying random tail at most 1 % of the peak.
    """
    if not (0.0 <= f_lo_hz < f_hi_hz <= rate_hz / 2):
        raise BandSpecError(f"invalid band edges ({f_lo_hz}, {f_hi_hz})")
    if not (num_taps > delay_taps >= 0):
        raise SizeError("need num_taps > delay_taps >= 0")

    core_len = min(2 * delay_taps + 1, num_taps)
    t = np.arange(core_len) - delay_taps
    w_lo = 2 * f_lo_hz / rate_hz
    w_hi = 2 * f_hi_hz / rate_hz
    core = w_hi * np.sinc(w_hi * t) - w_lo * np.sinc(w_lo * t)
    core *= np.hamming(2 * delay_taps + 1)[:core_len] if delay_taps else 1.0

    h = np.zeros(num_taps)
    h[:core_len] = core
    if seed is not None:
        rng = np.random.default_rng(seed)
        h[:core_len] *= 1.0 + 0.05 * rng.uniform(-1, 1, core_len)
        n_tail = num_taps - core_len
        if n_tail > 0:
            decay = np.exp(-np.arange(n_tail) / max(n_tail / 8.0, 1.0))
            h[core_len:] = 0.01 * np.max(np.abs(core)) * rng.uniform(-1, 1, n_tail) * decay
    return PathModel(h, label)


def default_primary_path(seed: Optional[int] = 11) -> PathModel:
    return design_bandpass_path(20.0, 7900.0, 256, 32, seed, label="primary")


def default_secondary_path(seed: Optional[int] = 12) -> PathModel:
    return design_bandpass_path(20.0, 7900.0, 128, 16, seed, label="secondary")


def convolve_truncated(h: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.convolve(x, h)[: len(x)]


def apply_path(path: PathModel, x: SignalBuffer) -> SignalBuffer:
    return SignalBuffer(convolve_truncated(path.impulse_response, x.samples), x.sample_rate_hz)


def mix_measurement_noise(x: SignalBuffer, snr_db: float, seed: Optional[int] = 0) -> SignalBuffer:
    """Add white Gaussian noise at ``snr_db`` below the signal power.

    ``snr_db=math.inf`` returns the input unchanged.
    """
    power = float(np.var(x.samples))
    if power <= 0.0:
        raise DegenerateInputError("cannot set an SNR against a silent signal")
    if math.isinf(snr_db) and snr_db > 0:
        return x
    sigma = math.sqrt(power * 10.0 ** (-snr_db / 10.0))
    rng = np.random.default_rng(seed)
    q = sigma * rng.standard_normal(len(x))
    return SignalBuffer(x.samples + q, x.sample_rate_hz)


def load_wav(path) -> SignalBuffer:
    """Read a mono PCM16 or float32 WAV file, normalised to [-1, 1]."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise WavNotFoundError(f"no such file: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise UnsupportedEncodingError(f"{path}: {exc}") from exc
    if data.ndim != 1:
        raise MultiChannelError(f"{path} has {data.shape[1]} channels; mono required")
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(float)
    else:
        raise UnsupportedEncodingError(f"{path}: unsupported sample type {data.dtype}")
    return SignalBuffer(x, float(rate))


def write_wav(path, x: SignalBuffer, encoding: str = "pcm16") -> None:
    samples = np.asarray(x.samples)
    if encoding == "pcm16":
        data = np.clip(np.round(samples * 32768.0), -32768, 32767).astype(np.int16)
    elif encoding == "float32":
        data = samples.astype(np.float32)
    else:
        raise UnsupportedEncodingError(f"unknown encoding {encoding!r}")
    wavfile.write(os.fspath(path), int(round(x.sample_rate_hz)), data)


def concatenate(buffers: Sequence[SignalBuffer]) -> SignalBuffer:
    rates = {b.sample_rate_hz for b in buffers}
    if len(rates) != 1:
        raise ValueError("cannot concatenate signals with different rates")
    return SignalBuffer(np.concatenate([b.samples for b in buffers]), rates.pop())
