"""Scenario harness, noise-reduction metrics and the mismatched-bandwidth MSE check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.signal import fftconvolve

from .adaptive import FullbandFilter, NlmsConfig, saf_fxnlms
from .controllers import ControlFrame, SaSfancController, SfancController
from .database import FullbandDatabase, SubbandDatabase
from .errors import BandSpecError, ConfigError, DimensionError, NumericError, SizeError
from .filterbank import AnalysisBank, make_bank
from .signals import (
    DEFAULT_RATE_HZ,
    SCENARIO_BANDS_A,
    SCENARIO_BANDS_B,
    BandSpec,
    PathModel,
    SignalBuffer,
    apply_path,
    concatenate,
    convolve_truncated,
    default_primary_path,
    default_secondary_path,
    design_bandpass_path,
    gen_bandlimited_noise,
    mix_measurement_noise,
)

ALGORITHMS = ("anc_off", "saf_fxnlms", "sfanc", "sa_sfanc")

DEFAULT_SEGMENTS = (
    (BandSpec(SCENARIO_BANDS_A), 12.0),
    (BandSpec(SCENARIO_BANDS_B), 12.0),
)


@lru_cache(maxsize=8)
def cached_bank(M: int, K: int) -> AnalysisBank:
    return make_bank(M, K)


@dataclass(frozen=True)
class ScenarioConfig:
    segments: Tuple[Tuple[BandSpec, float], ...] = DEFAULT_SEGMENTS
    sample_rate_hz: float = DEFAULT_RATE_HZ
    snr_db: float = 20.0
    primary: PathModel = field(default_factory=default_primary_path)
    secondary: PathModel = field(default_factory=default_secondary_path)
    algorithm: str = "sa_sfanc"
    noise_seed: int = 100
    measurement_seed: int = 200
    nlms: NlmsConfig = NlmsConfig()
    M: int = 8
    K: int = 128

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if not self.segments or sum(d for _, d in self.segments) <= 0:
            raise ConfigError("scenario needs a positive total duration")
        for spec, _ in self.segments:
            spec.validate_rate(self.sample_rate_hz)

    @property
    def onsets_s(self) -> List[float]:
        out, t = [], 0.0
        for _, dur in self.segments:
            out.append(t)
            t += dur
        return out

    @property
    def bank(self) -> AnalysisBank:
        return cached_bank(self.M, self.K)

    def primary_noise(self) -> SignalBuffer:
        return concatenate([
            gen_bandlimited_noise(spec, dur, self.sample_rate_hz, self.noise_seed + k)
            for k, (spec, dur) in enumerate(self.segments)
        ])


@dataclass
class RunResult:
    error: SignalBuffer
    disturbance: SignalBuffer
    nr_per_second: np.ndarray
    selections: Optional[List[ControlFrame]] = None
    algorithm: str = ""
    counters: dict = field(default_factory=dict)


def noise_reduction_per_second(d: SignalBuffer, e: SignalBuffer) -> np.ndarray:
    """10 log10(sum d^2 / sum e^2) for every whole second; silent seconds give 0 dB."""
    if len(d) != len(e):
        raise DimensionError("disturbance and error differ in length")
    frame = int(round(d.sample_rate_hz))
    n = len(d) // frame
    if n < 1:
        raise SizeError("need at least one second of signal")
    dd = d.samples[: n * frame].reshape(n, frame)
    ee = e.samples[: n * frame].reshape(n, frame)
    pd = np.sum(dd**2, axis=1)
    pe = np.sum(ee**2, axis=1)
    out = np.zeros(n)
    live = pd > 0
    with np.errstate(divide="ignore"):
        out[live] = 10 * np.log10(pd[live] / pe[live])
    return out


def run_scenario(
    cfg: ScenarioConfig,
    db: Optional[SubbandDatabase] = None,
    fullband_db: Optional[FullbandDatabase] = None,
    reference_override: Optional[SignalBuffer] = None,
) -> RunResult:
    """Simulate one scenario: d = p * x, r = x + q, then the selected algorithm.

    ``reference_override`` replaces the synthetic primary noise x (e.g. a
    recording) while keeping paths and measurement noise.
    """
    x = reference_override if reference_override is not None else cfg.primary_noise()
    d = apply_path(cfg.primary, x)
    r = mix_measurement_noise(x, cfg.snr_db, cfg.measurement_seed)
    s = cfg.secondary
    selections = None
    counters = {}

    if cfg.algorithm == "anc_off":
        e = d
    elif cfg.algorithm == "saf_fxnlms":
        run = saf_fxnlms(r, d, s, s, cfg.bank, cfg.nlms)
        e = run.error
        counters = {"subband_updates": run.subband_updates, "stacks": run.stack_count}
    elif cfg.algorithm == "sa_sfanc":
        if db is None:
            raise ConfigError("sa_sfanc needs a subband database")
        ctl = SaSfancController(db, cfg.bank)
        y, selections = ctl.run(r)
        e = SignalBuffer(d.samples - convolve_truncated(s.impulse_response, y.samples), d.sample_rate_hz)
        counters = {"selections": ctl.selections, "stacks": ctl.stacks}
    else:
        if fullband_db is None:
            raise ConfigError("sfanc needs a fullband database")
        ctl = SfancController(fullband_db)
        y, selections = ctl.run(r)
        e = SignalBuffer(d.samples - convolve_truncated(s.impulse_response, y.samples), d.sample_rate_hz)
        counters = {"selections": ctl.selections}

    return RunResult(e, d, noise_reduction_per_second(d, e), selections, cfg.algorithm, counters)


def steady_state_nr(nr: np.ndarray, onsets_s: Sequence[float], skip: int = 1) -> float:
    """Mean NR over all seconds except the first ``skip`` after every onset."""
    keep = np.ones(len(nr), dtype=bool)
    for t in onsets_s:
        k = int(round(t))
        keep[k : k + skip] = False
    return float(np.mean(nr[keep]))


def segment_bounds(onsets_s: Sequence[float], total_s: int) -> List[Tuple[int, int]]:
    edges = [int(round(t)) for t in onsets_s] + [total_s]
    return list(zip(edges[:-1], edges[1:]))


def time_to_fraction(nr_segment: np.ndarray, fraction: float = 0.9, tail: int = 2) -> Optional[int]:
    """Seconds after onset until NR first reaches ``fraction`` of its asymptote.

    The asymptote is the mean of the last ``tail`` seconds; the return value
    counts whole seconds up to the end of the first qualifying second.
    """
    asym = float(np.mean(nr_segment[-tail:]))
    hits = np.nonzero(nr_segment >= fraction * asym)[0]
    return int(hits[0]) + 1 if len(hits) else None


# ---------------------------------------------------------------- Wiener oracle

def _lagged_covariance(u: np.ndarray, L: int) -> np.ndarray:
    """R[i, j] = sum_n u(n-i) u(n-j) over n in [0, N) with u(<0) = 0."""
    N = len(u)
    full = fftconvolve(u, u[::-1])
    c = full[N - 1 : N - 1 + L]  # c[tau] = sum_n u(n) u(n - tau)
    # the window loses u(N-1-k) u(N-1-k-tau) for k < i when both indices shift by i
    tail = u[::-1][:L]  # tail[k] = u(N-1-k)
    tail_pad = np.concatenate([tail, np.zeros(L)])
    lost = tail[:, None] * np.stack([tail_pad[tau : tau + L] for tau in range(L)], axis=1)
    cum = np.vstack([np.zeros(L), np.cumsum(lost, axis=0)[:-1]])
    R = np.empty((L, L))
    for tau in range(L):
        i = np.arange(L - tau)
        R[i, i + tau] = c[tau] - cum[i, tau]
        R[i + tau, i] = R[i, i + tau]
    return R


def wiener_oracle(
    reference: SignalBuffer, disturbance: SignalBuffer, L: int, secondary: PathModel
) -> FullbandFilter:
    """Least-squares L-tap control filter minimising ||d - s * (w * r)||^2 on the batch."""
    r = reference.samples
    d = disturbance.samples
    if len(r) != len(d):
        raise DimensionError("reference and disturbance differ in length")
    if len(r) < 4 * L:
        raise SizeError(f"need at least {4 * L} samples for an {L}-tap oracle")
    u = convolve_truncated(secondary.impulse_response, r)
    R = _lagged_covariance(u, L)
    N = len(u)
    p = fftconvolve(d, u[::-1])[N - 1 : N - 1 + L]  # p[j] = sum_n d(n) u(n-j)
    ridge = 1e-8 * np.trace(R)
    try:
        w = linalg.solve(R + ridge * np.eye(L), p, assume_a="pos")
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"normal equations are singular: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericError("oracle produced non-finite weights")
    return FullbandFilter(w)


def residual(reference: SignalBuffer, disturbance: SignalBuffer, w, secondary: PathModel) -> np.ndarray:
    weights = w.weights if hasattr(w, "weights") else np.asarray(w)
    y = convolve_truncated(weights, reference.samples)
    return disturbance.samples - convolve_truncated(secondary.impulse_response, y)


# ---------------------------------------------------------------- bandwidth mismatch

@dataclass
class MseReport:
    empirical_mse: float
    predicted_mse: float
    mmse: float
    band_params: dict
    per_seed: List[dict] = field(default_factory=list)

    @property
    def empirical_excess(self) -> float:
        return self.empirical_mse - self.mmse

    @property
    def predicted_excess(self) -> float:
        return self.predicted_mse - self.mmse

    def check(self, matched_tol: float = 0.10, excess_tol: float = 0.20) -> bool:
        """Agreement test: relative to the MMSE when no excess is predicted, else to the excess."""
        if self.predicted_excess == 0.0:
            return abs(self.empirical_mse - self.mmse) <= matched_tol * self.mmse
        return abs(self.empirical_excess - self.predicted_excess) <= excess_tol * self.predicted_excess

    def to_dict(self) -> dict:
        return {
            "empirical_mse": self.empirical_mse,
            "predicted_mse": self.predicted_mse,
            "mmse": self.mmse,
            "empirical_excess": self.empirical_excess,
            "predicted_excess": self.predicted_excess,
            "band_params": self.band_params,
            "pass": self.check(),
        }


def _band(center: float, width: float) -> BandSpec:
    return BandSpec(((center - width / 2, center + width / 2),))


def validate_eq6(
    B_t_hz: float,
    B_c_hz: float,
    center_hz: float = 4000.0,
    snr_db: float = 20.0,
    seeds: Sequence[int] = tuple(range(10)),
    duration_s: float = 2.0,
    L: int = 256,
    rate_hz: float = DEFAULT_RATE_HZ,
    secondary: Optional[PathModel] = None,
) -> MseReport:
    """MSE of a filter trained on a wide band and applied to a narrower one.

    Bandwidths are full pass-band widths centred on ``center_hz``. The
    prediction is mmse + (sigma_q^2 / pi) * (B_t - B_c) with the widths in
    radians (2 pi B / rate). The primary path is a pure delay (unit gain).
    """
    if not (B_t_hz >= B_c_hz > 0):
        raise BandSpecError("need B_t >= B_c > 0")
    if center_hz - B_t_hz / 2 <= 0 or center_hz + B_t_hz / 2 >= rate_hz / 2:
        raise BandSpecError("bands must lie strictly inside (0, Nyquist)")
    s = secondary if secondary is not None else default_secondary_path()
    p = design_bandpass_path(0.0, rate_hz / 2, 64, 32, None, rate_hz, "unit-delay")
    sigma2 = 0.0 if math.isinf(snr_db) else 10.0 ** (-snr_db / 10.0)
    skip = L + len(s)

    def draw(width, seed):
        x = gen_bandlimited_noise(_band(center_hz, width), duration_s, rate_hz, seed)
        rng = np.random.default_rng(seed + 7_777_777)
        r = SignalBuffer(x.samples + math.sqrt(sigma2) * rng.standard_normal(len(x)), rate_hz)
        return r, apply_path(p, x)

    rows = []
    for seed in seeds:
        base = 1000 * int(seed)
        r_t, d_t = draw(B_t_hz, base + 1)
        r_m, d_m = draw(B_c_hz, base + 2)
        r_c, d_c = draw(B_c_hz, base + 3)
        w_t = wiener_oracle(r_t, d_t, L, s)
        w_m = wiener_oracle(r_m, d_m, L, s)
        emp = float(np.mean(residual(r_c, d_c, w_t, s)[skip:] ** 2))
        mm = float(np.mean(residual(r_c, d_c, w_m, s)[skip:] ** 2))
        rows.append({"seed": int(seed), "empirical_mse": emp, "mmse": mm})

    emp = float(np.mean([row["empirical_mse"] for row in rows]))
    mmse = float(np.mean([row["mmse"] for row in rows]))
    excess = sigma2 / math.pi * (2 * math.pi * (B_t_hz - B_c_hz) / rate_hz)
    params = {"B_t_hz": B_t_hz, "B_c_hz": B_c_hz, "center_hz": center_hz,
              "sigma_q2": sigma2, "snr_db": snr_db, "L": L, "duration_s": duration_s,
              "seeds": [int(s_) for s_ in seeds]}
    return MseReport(emp, mmse + excess, mmse, params, rows)
