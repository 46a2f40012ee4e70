"""Oversampled single-sideband polyphase-FFT analysis bank and FFT-1 weight stacking.

The bank has ``M`` complex band-pass channels built by modulating one real
low-pass prototype, decimated by ``D = M/2``. Only channels ``0..M/2`` are
kept because real inputs are conjugate symmetric. Subband control filters
of length ``L/D`` are turned back into one real fullband filter of length
``L`` by copying their FFT bins into the fullband spectrum.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.optimize import brentq

from .errors import ConfigError, DimensionError, SizeError


@dataclass(frozen=True)
class PrototypeFilter:
    coeffs: np.ndarray
    num_bands: int
    length: int

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=float)
        if len(a) != self.length:
            raise DimensionError("coefficient count does not match length")
        if self.length % self.num_bands:
            raise ConfigError("prototype length must be a multiple of the band count")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @cached_property
    def digest(self) -> bytes:
        """SHA-256 over (M, K, coefficients); identifies the bank on disk."""
        h = hashlib.sha256()
        h.update(np.array([self.num_bands, self.length], dtype="<u4").tobytes())
        h.update(self.coeffs.astype("<f8").tobytes())
        return h.digest()


def _windowed_sinc(cutoff: float, length: int) -> np.ndarray:
    n = np.arange(length) - (length - 1) / 2
    h = (cutoff / np.pi) * np.sinc(cutoff * n / np.pi) * np.hamming(length)
    return h / h.sum()


def design_prototype(M: int, K: int) -> PrototypeFilter:
    """Hamming windowed-sinc low-pass with its -3 dB point at pi/M and unit DC gain.

    The sinc cutoff is nudged so that adjacent modulated channels cross at
    -3 dB; the summed channel power is then flat across the band.
    """
    if M < 4 or M % 2:
        raise ConfigError(f"band count must be even and >= 4, got {M}")
    if K <= 0 or K % M:
        raise ConfigError(f"prototype length {K} is not a positive multiple of {M}")

    edge = np.pi / M
    target = 1.0 / np.sqrt(2.0)
    n = np.arange(K)

    def excess(cutoff):
        h = _windowed_sinc(cutoff, K)
        return abs(np.sum(h * np.exp(-1j * edge * n))) - target

    try:
        cutoff = brentq(excess, 0.5 * edge, 2.0 * edge, xtol=1e-13)
    except ValueError:
        # too short to shape a transition band
        cutoff = edge
    return PrototypeFilter(_windowed_sinc(cutoff, K), M, K)


@dataclass(frozen=True)
class AnalysisBank:
    prototype: PrototypeFilter

    @property
    def M(self) -> int:
        return self.prototype.num_bands

    @property
    def K(self) -> int:
        return self.prototype.length

    @property
    def D(self) -> int:
        return self.M // 2

    @property
    def num_subbands(self) -> int:
        return self.M // 2 + 1

    @property
    def digest(self) -> bytes:
        return self.prototype.digest

    @cached_property
    def twiddles(self) -> np.ndarray:
        """(M, M/2+1) matrix of exp(j 2 pi p m / M)."""
        p = np.arange(self.M)[:, None]
        m = np.arange(self.num_subbands)[None, :]
        return np.exp(2j * np.pi * p * m / self.M)

    @cached_property
    def modulated(self) -> np.ndarray:
        """(K, M/2+1) analysis impulse responses a_k exp(j 2 pi k m / M)."""
        k = np.arange(self.K)[:, None]
        m = np.arange(self.num_subbands)[None, :]
        return self.prototype.coeffs[:, None] * np.exp(2j * np.pi * k * m / self.M)

    def frequency_responses(self, n_points: int = 8192, all_bands: bool = False) -> np.ndarray:
        """Channel responses on ``n_points`` bins of [0, 2 pi)."""
        bands = self.M if all_bands else self.num_subbands
        k = np.arange(self.K)[:, None]
        m = np.arange(bands)[None, :]
        h = self.prototype.coeffs[:, None] * np.exp(2j * np.pi * k * m / self.M)
        return np.fft.fft(h, n_points, axis=0).T


def make_bank(M: int = 8, K: int = 128) -> AnalysisBank:
    return AnalysisBank(design_prototype(M, K))


@dataclass(frozen=True)
class SubbandFrame:
    data: np.ndarray  # (M/2+1, n_decimated) complex
    decimated_rate_hz: float

    @property
    def num_samples(self) -> int:
        return self.data.shape[1]

    def __getitem__(self, m):
        return self.data[m]


_CHUNK = 4096


def _analyze_array(bank: AnalysisBank, x: np.ndarray, history: np.ndarray, offset: int):
    """Polyphase analysis of ``x`` given the K-1 preceding samples.

    Outputs are produced at the positions ``t`` of ``x`` with
    ``(offset + t) % D == 0``.
    """
    K, M, D = bank.K, bank.M, bank.D
    xp = np.concatenate([history, x])
    first = (-offset) % D
    positions = np.arange(first, len(x), D)
    out = np.empty((bank.num_subbands, len(positions)), dtype=complex)
    if len(positions) == 0:
        return out
    windows = sliding_window_view(xp, K)  # row t holds x(t-K+1 .. t)
    a_rev = bank.prototype.coeffs[::-1]
    for c0 in range(0, len(positions), _CHUNK):
        pos = positions[c0 : c0 + _CHUNK]
        # u[n, k] = x(t_n - k) a_k, then fold k -> k mod M
        u = windows[pos] * a_rev
        v = u[:, ::-1].reshape(len(pos), K // M, M).sum(axis=1)
        out[:, c0 : c0 + len(pos)] = (M * np.fft.ifft(v, axis=1))[:, : bank.num_subbands].T
    return out


def analyze(bank: AnalysisBank, x, rate_hz: float = None) -> SubbandFrame:
    """Decimated subband outputs for the sample positions t = nD, n = 0..floor(N/D)-1.

    ``x`` may be a SignalBuffer or a real/complex array. The history before
    the first sample is zero.
    """
    if hasattr(x, "samples"):
        rate_hz = x.sample_rate_hz
        x = x.samples
    x = np.asarray(x)
    if len(x) < bank.D:
        raise SizeError(f"need at least D={bank.D} samples, got {len(x)}")
    x = x[: (len(x) // bank.D) * bank.D]
    dtype = complex if np.iscomplexobj(x) else float
    out = _analyze_array(bank, x.astype(dtype), np.zeros(bank.K - 1, dtype=dtype), 0)
    rate = (rate_hz / bank.D) if rate_hz else float("nan")
    return SubbandFrame(out, rate)


def analyze_direct(bank: AnalysisBank, x) -> np.ndarray:
    """Literal double sum over k for every output; slow reference implementation."""
    x = np.asarray(x)
    K, D = bank.K, bank.D
    n_out = len(x) // D
    h = bank.modulated
    out = np.zeros((bank.num_subbands, n_out), dtype=complex)
    for n in range(n_out):
        t = n * D
        for k in range(min(K, t + 1)):
            out[:, n] += x[t - k] * h[k]
    return out


class StreamingAnalyzer:
    """Block-by-block analysis with carried history; owned by one stream."""

    def __init__(self, bank: AnalysisBank, dtype=float):
        self.bank = bank
        self.history = np.zeros(bank.K - 1, dtype=dtype)
        self.offset = 0

    def process(self, block) -> np.ndarray:
        block = np.asarray(block, dtype=self.history.dtype)
        out = _analyze_array(self.bank, block, self.history, self.offset)
        tail = np.concatenate([self.history, block])[-(self.bank.K - 1):] if self.bank.K > 1 else self.history
        self.history = tail.copy()
        self.offset += len(block)
        return out


@dataclass(frozen=True)
class SubbandFilterSet:
    weights: np.ndarray  # (M/2+1, L_s) complex
    fullband_length: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex)
        if w.ndim != 2 or w.shape[0] < 3:
            raise DimensionError(f"expected (M/2+1, L_s) weights, got shape {w.shape}")
        D = w.shape[0] - 1
        if self.fullband_length % D or w.shape[1] != self.fullband_length // D:
            raise DimensionError(
                f"subband length {w.shape[1]} inconsistent with L={self.fullband_length}, D={D}"
            )
        object.__setattr__(self, "weights", w)

    @property
    def M(self) -> int:
        return 2 * (self.weights.shape[0] - 1)

    @property
    def D(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def subband_length(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, M: int, L: int) -> "SubbandFilterSet":
        return cls(np.zeros((M // 2 + 1, L // (M // 2)), dtype=complex), L)


def stacking_indices(L: int, M: int) -> Tuple[np.ndarray, np.ndarray]:
    """(subband, bin) source of every fullband bin l in [0, L/2).

    The subband is round(l M / L) with halves rounded up; the bin is l mod 2L/M.
    """
    if L % (M // 2):
        raise DimensionError(f"L={L} is not divisible by D={M // 2}")
    l = np.arange(L // 2)
    band = (2 * l * M + L) // (2 * L)
    return band, l % (2 * L // M)


def stack_bins(subband_bins: np.ndarray, L: int) -> np.ndarray:
    """Full L-bin conjugate-symmetric spectrum from per-subband FFT bins."""
    subband_bins = np.asarray(subband_bins)
    M = 2 * (subband_bins.shape[0] - 1)
    if subband_bins.shape[1] * (M // 2) != L:
        raise DimensionError(
            f"subband length {subband_bins.shape[1]} inconsistent with L={L}, D={M // 2}"
        )
    band, f = stacking_indices(L, M)
    W = np.zeros(L, dtype=complex)
    W[: L // 2] = subband_bins[band, f]
    # subband 0 of a real input is real, so its DC bin is; enforce it exactly
    W[0] = W[0].real
    W[L // 2 + 1 :] = np.conj(W[1 : L // 2][::-1])
    return W


def stack_fft1(filters: SubbandFilterSet, return_residue: bool = False):
    """Real fullband filter (length L) from subband weights by FFT-1 stacking."""
    bins = np.fft.fft(filters.weights, axis=1)
    W = stack_bins(bins, filters.fullband_length)
    w = np.fft.ifft(W)
    if return_residue:
        return w.real, float(np.max(np.abs(w.imag)))
    return w.real


class FastStacker:
    """Stacking from time-domain subband weights using a half-spectrum inverse FFT.

    Equivalent to :func:`stack_fft1`; used inside adaptive loops.
    """

    def __init__(self, L: int, M: int):
        self.L = L
        self.band, self.bin = stacking_indices(L, M)
        self._half = np.zeros(L // 2 + 1, dtype=complex)

    def __call__(self, weights: np.ndarray) -> np.ndarray:
        bins = np.fft.fft(weights, axis=1)
        self._half[: self.L // 2] = bins[self.band, self.bin]
        return np.fft.irfft(self._half, self.L)

    def from_bins(self, bins: np.ndarray) -> np.ndarray:
        half = np.zeros(self.L // 2 + 1, dtype=complex)
        half[: self.L // 2] = bins[self.band, self.bin]
        return np.fft.irfft(half, self.L)
