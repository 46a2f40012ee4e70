"""Fullband FxNLMS and delayless subband FxNLMS (SAF-FxNLMS).

In the delayless structure the control filter always runs at the full
sample rate. The reference filtered through the secondary-path estimate and
the residual error are split into subbands, each subband filter is updated
by complex NLMS at the decimated rate, and the fullband filter is rebuilt by
FFT-1 stacking every ``stack_stride`` decimated steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .errors import ConfigError, DimensionError
from .filterbank import AnalysisBank, FastStacker, SubbandFilterSet, analyze
from .signals import PathModel, SignalBuffer, convolve_truncated


@dataclass(frozen=True)
class NlmsConfig:
    mu: float = 0.01
    eps: float = 1e-6
    L: int = 1024
    stack_stride: int = 1

    def __post_init__(self):
        if not (0 < self.mu <= 2):
            raise ConfigError(f"step size must lie in (0, 2], got {self.mu}")
        if not self.eps > 0:
            raise ConfigError("regularizer must be positive")
        if self.L < 1:
            raise ConfigError("filter length must be positive")
        if self.stack_stride < 1:
            raise ConfigError("stack_stride must be >= 1")

    def check_bank(self, bank: AnalysisBank) -> None:
        if self.L % bank.D:
            raise DimensionError(f"L={self.L} is not divisible by D={bank.D}")


@dataclass(frozen=True)
class FullbandFilter:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(w)):
            raise ValueError("filter weights must be finite")
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)


@dataclass
class AdaptiveRunResult:
    error: SignalBuffer
    disturbance: SignalBuffer
    final_filter: FullbandFilter
    final_subband_filters: Optional[SubbandFilterSet] = None
    weight_snapshots: List[Tuple[int, FullbandFilter]] = field(default_factory=list)
    subband_updates: int = 0
    stack_count: int = 0


def _check_pair(reference: SignalBuffer, disturbance: SignalBuffer) -> None:
    if len(reference) != len(disturbance):
        raise DimensionError(
            f"reference has {len(reference)} samples, disturbance {len(disturbance)}"
        )


def _segments(n: int, every: Optional[int]):
    if not every:
        return [(0, n)]
    edges = list(range(0, n, every)) + [n]
    return list(zip(edges[:-1], edges[1:]))


def fullband_fxnlms(
    reference: SignalBuffer,
    disturbance: SignalBuffer,
    secondary: PathModel,
    secondary_estimate: PathModel,
    cfg: NlmsConfig = NlmsConfig(),
    initial: Optional[np.ndarray] = None,
    snapshot_every: Optional[int] = None,
    backend=None,
) -> AdaptiveRunResult:
    _check_pair(reference, disturbance)
    impl = backend or kernels
    L = cfg.L
    r = reference.samples
    fref = convolve_truncated(secondary_estimate.impulse_response, r)
    ref_pad = np.concatenate([np.zeros(L - 1), r])
    fref_pad = np.concatenate([np.zeros(L - 1), fref])
    s = np.ascontiguousarray(secondary.impulse_response)
    y_pad = np.zeros(len(r) + len(s) - 1)
    e = np.zeros(len(r))
    w = np.zeros(L) if initial is None else np.array(initial, dtype=float)
    d = np.ascontiguousarray(disturbance.samples)

    snapshots = []
    for t0, t1 in _segments(len(r), snapshot_every):
        impl.fxnlms_loop(ref_pad, fref_pad, d, s, w, y_pad, e, cfg.mu, cfg.eps, t0, t1)
        if snapshot_every:
            snapshots.append((t1, FullbandFilter(w.copy())))

    rate = reference.sample_rate_hz
    return AdaptiveRunResult(
        error=SignalBuffer(e, rate),
        disturbance=disturbance,
        final_filter=FullbandFilter(w),
        weight_snapshots=snapshots,
    )


def saf_fxnlms(
    reference: SignalBuffer,
    disturbance: SignalBuffer,
    secondary: PathModel,
    secondary_estimate: PathModel,
    bank: AnalysisBank,
    cfg: NlmsConfig = NlmsConfig(),
    initial: Optional[SubbandFilterSet] = None,
    snapshot_every: Optional[int] = None,
    backend=None,
) -> AdaptiveRunResult:
    """Delayless subband FxNLMS; one complex NLMS step per subband every D samples."""
    _check_pair(reference, disturbance)
    cfg.check_bank(bank)
    impl = backend or kernels
    L, D, K = cfg.L, bank.D, bank.K
    Ls = L // D
    r = reference.samples
    n = len(r)

    fref = convolve_truncated(secondary_estimate.impulse_response, r)
    n_dec = -(-n // D)
    rsub = np.zeros((bank.num_subbands, n_dec + Ls - 1), dtype=complex)
    if n >= D:
        sub = analyze(bank, fref).data
        rsub[:, Ls - 1 : Ls - 1 + sub.shape[1]] = sub
    if n_dec > n // D:
        # trailing partial block: its first sample is still a decimation instant
        tail = np.zeros(D)
        tail[: n - (n // D) * D] = fref[(n // D) * D :]
        padded = np.concatenate([fref[: (n // D) * D], tail])
        rsub[:, Ls - 1 + n_dec - 1] = analyze(bank, padded).data[:, -1]

    stacker = FastStacker(L, bank.M)
    if initial is None:
        wsub = np.zeros((bank.num_subbands, Ls), dtype=complex)
        w = np.zeros(L)
    else:
        if initial.weights.shape != (bank.num_subbands, Ls):
            raise DimensionError("initial subband filters do not match the bank and L")
        wsub = initial.weights.copy()
        w = stacker(wsub)

    s = np.ascontiguousarray(secondary.impulse_response)
    ref_pad = np.concatenate([np.zeros(L - 1), r])
    y_pad = np.zeros(n + len(s) - 1)
    e_pad = np.zeros(n + K - 1)
    d = np.ascontiguousarray(disturbance.samples)
    proto = np.ascontiguousarray(bank.prototype.coeffs)
    twiddles = np.ascontiguousarray(bank.twiddles)
    counters = np.zeros(2, dtype=np.int64)

    snapshots = []
    for t0, t1 in _segments(n, snapshot_every):
        impl.saf_loop(
            ref_pad, d, s, y_pad, e_pad, w, rsub, proto, twiddles, wsub,
            cfg.mu, cfg.eps, D, cfg.stack_stride, stacker, t0, t1, counters,
        )
        if snapshot_every:
            snapshots.append((t1, FullbandFilter(w.copy())))

    rate = reference.sample_rate_hz
    return AdaptiveRunResult(
        error=SignalBuffer(e_pad[K - 1 :], rate),
        disturbance=disturbance,
        final_filter=FullbandFilter(w.copy()),
        final_subband_filters=SubbandFilterSet(wsub, L),
        weight_snapshots=snapshots,
        subband_updates=int(counters[0]),
        stack_count=int(counters[1]),
    )
