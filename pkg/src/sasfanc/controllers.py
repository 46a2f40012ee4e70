"""Off-line training and on-line frame-rate control for SA-SFANC and the SFANC baseline.

Both controllers select on frame ``t`` and apply the resulting filter from
frame ``t + 1``; frame 0 is filtered with the zero filter.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .adaptive import FullbandFilter, NlmsConfig, fullband_fxnlms, saf_fxnlms
from .database import (
    DatabaseMeta,
    FullbandDatabase,
    FullbandRecord,
    SubbandDatabase,
    SubFilterRecord,
)
from .errors import ConfigError, TrainingError
from .features import (
    FULLBAND_FEATURES,
    SUBBAND_FEATURES,
    FeatureConfig,
    jaccard_scores,
    signature,
)
from .filterbank import AnalysisBank, FastStacker, StreamingAnalyzer, analyze
from .signals import (
    CONTIGUOUS_BAND,
    DEFAULT_RATE_HZ,
    SCENARIO_BANDS_A,
    SCENARIO_BANDS_B,
    BandSpec,
    PathModel,
    SignalBuffer,
    apply_path,
    default_primary_path,
    default_secondary_path,
    gen_bandlimited_noise,
)

log = logging.getLogger(__name__)

DEFAULT_TRAINING_NOISES = (
    BandSpec(CONTIGUOUS_BAND),
    BandSpec(SCENARIO_BANDS_A),
    BandSpec(SCENARIO_BANDS_B),
)


@dataclass(frozen=True)
class TrainingSpec:
    training_noises: Tuple[BandSpec, ...] = DEFAULT_TRAINING_NOISES
    duration_s: float = 30.0
    primary: PathModel = field(default_factory=default_primary_path)
    secondary: PathModel = field(default_factory=default_secondary_path)
    nlms: NlmsConfig = NlmsConfig()
    features: FeatureConfig = SUBBAND_FEATURES
    sample_rate_hz: float = DEFAULT_RATE_HZ
    seed: int = 1000
    min_final_nr_db: float = 10.0

    def __post_init__(self):
        if len(self.training_noises) < 1:
            raise ConfigError("at least one training noise is required")
        if self.duration_s < 1.0:
            raise ConfigError("training noises must last at least one second")

    def noise(self, i: int) -> SignalBuffer:
        return gen_bandlimited_noise(
            self.training_noises[i], self.duration_s, self.sample_rate_hz, self.seed + i
        )


def final_second_nr(d: np.ndarray, e: np.ndarray, frame_len: int) -> float:
    if len(d) < frame_len:
        frame_len = len(d)
    pd = np.sum(d[-frame_len:] ** 2)
    pe = np.sum(e[-frame_len:] ** 2)
    if pd == 0:
        return 0.0
    return float(10 * np.log10(pd / pe)) if pe > 0 else float("inf")


def subband_signatures(x, bank: AnalysisBank, features: FeatureConfig) -> np.ndarray:
    """(M/2+1, V) bit matrix of a fullband signal."""
    sub = analyze(bank, x).data
    return np.stack([signature(row, features) for row in sub])


def train_sa_sfanc(
    spec: TrainingSpec,
    bank: AnalysisBank,
    on_noise: Optional[Callable[[int, float], None]] = None,
) -> SubbandDatabase:
    """Run SAF-FxNLMS on every clean training noise and store the converged sub-filters."""
    spec.nlms.check_bank(bank)
    frame_len = int(round(spec.sample_rate_hz))
    meta = DatabaseMeta(
        L=spec.nlms.L, M=bank.M, K=bank.K, V=spec.features.fft_len,
        num_noises=len(spec.training_noises), sample_rate_hz=spec.sample_rate_hz,
        features=spec.features, prototype_digest=bank.digest,
    )
    db = SubbandDatabase(meta)
    for i in range(len(spec.training_noises)):
        x = spec.noise(i)
        d = apply_path(spec.primary, x)
        run = saf_fxnlms(x, d, spec.secondary, spec.secondary, bank, spec.nlms)
        nr = final_second_nr(d.samples, run.error.samples, frame_len)
        log.info("training noise %d: final-second NR %.2f dB", i, nr)
        if on_noise is not None:
            on_noise(i, nr)
        if not nr >= spec.min_final_nr_db:
            raise TrainingError(i, nr, spec.min_final_nr_db)
        bins = np.fft.fft(run.final_subband_filters.weights, axis=1)
        sigs = subband_signatures(x, bank, spec.features)
        for m in range(bank.num_subbands):
            db.insert(SubFilterRecord(i, m, bins[m], sigs[m]))
    return db


def subband_ranges(M: int, rate_hz: float) -> List[Tuple[float, float]]:
    """Nominal [lo, hi] frequency range (Hz) covered by each kept subband."""
    half = rate_hz / (2 * M)
    return [
        (max(0.0, m * rate_hz / M - half), min(rate_hz / 2, m * rate_hz / M + half))
        for m in range(M // 2 + 1)
    ]


def sfanc_training_noises(
    training_noises: Sequence[BandSpec], M: int, rate_hz: float = DEFAULT_RATE_HZ
) -> List[BandSpec]:
    """Each (noise, subband) pair's occupied range promoted to a fullband noise."""
    out = []
    for spec in training_noises:
        for lo, hi in subband_ranges(M, rate_hz):
            part = spec.intersect(lo, hi)
            if part is not None:
                out.append(part)
    return out


def train_sfanc(
    spec: TrainingSpec,
    M: int,
    features: FeatureConfig = FULLBAND_FEATURES,
    on_noise: Optional[Callable[[int, float], None]] = None,
) -> FullbandDatabase:
    """Fullband FxNLMS filters for the SFANC baseline, one per promoted noise band."""
    noises = sfanc_training_noises(spec.training_noises, M, spec.sample_rate_hz)
    frame_len = int(round(spec.sample_rate_hz))
    db = FullbandDatabase(spec.nlms.L, features.fft_len, spec.sample_rate_hz, features)
    for j, band in enumerate(noises):
        x = gen_bandlimited_noise(band, spec.duration_s, spec.sample_rate_hz, spec.seed + 100 + j)
        d = apply_path(spec.primary, x)
        run = fullband_fxnlms(x, d, spec.secondary, spec.secondary, spec.nlms)
        nr = final_second_nr(d.samples, run.error.samples, frame_len)
        log.info("SFANC filter %d %s: final-second NR %.2f dB", j, band.bands, nr)
        if on_noise is not None:
            on_noise(j, nr)
        if not nr >= spec.min_final_nr_db:
            raise TrainingError(j, nr, spec.min_final_nr_db)
        db.insert(FullbandRecord(j, run.final_filter.weights, signature(x.samples, features)))
    return db


@dataclass
class ControlFrame:
    """Selection made from frame ``frame_index``; its filter is applied from the next frame."""

    frame_index: int
    selected_indices: np.ndarray
    stacked_filter: FullbandFilter
    scores: List[List[float]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "frame": self.frame_index,
            "selected": [int(i) for i in np.atleast_1d(self.selected_indices)],
            "scores": self.scores,
        })


def _frames(n: int, frame_len: int):
    for f, t0 in enumerate(range(0, n, frame_len)):
        yield f, t0, min(t0 + frame_len, n)


class SaSfancController:
    """Per-subband Jaccard selection and FFT-1 stacking, once per frame."""

    def __init__(self, db: SubbandDatabase, bank: AnalysisBank, frame_len: Optional[int] = None):
        db.require_complete()
        db.require_bank(bank)
        self.db = db
        self.bank = bank
        self.frame_len = frame_len or int(round(db.meta.sample_rate_hz))
        self.stacker = FastStacker(db.meta.L, bank.M)
        self.candidates = [
            [db.records[(i, m)].signature for i in range(db.meta.num_noises)]
            for m in range(bank.num_subbands)
        ]
        self.selections = 0
        self.stacks = 0

    def select(self, subband_block: np.ndarray):
        sel = np.zeros(self.bank.num_subbands, dtype=int)
        scores = []
        for m in range(self.bank.num_subbands):
            bits = signature(subband_block[m], self.db.meta.features)
            sc = jaccard_scores(bits, self.candidates[m])
            sel[m] = int(np.argmax(sc))
            scores.append([float(v) for v in sc])
        self.selections += 1
        return sel, scores

    def stack(self, selection) -> np.ndarray:
        self.stacks += 1
        return self.stacker.from_bins(self.db.bins(selection))

    def run(self, reference: SignalBuffer) -> Tuple[SignalBuffer, List[ControlFrame]]:
        r = np.ascontiguousarray(reference.samples)
        L = self.db.meta.L
        ref_pad = np.concatenate([np.zeros(L - 1), r])
        y = np.zeros(len(r))
        w = np.zeros(L)
        analyzer = StreamingAnalyzer(self.bank)
        frames = []
        for f, t0, t1 in _frames(len(r), self.frame_len):
            kernels.fir_loop(ref_pad, w, y, t0, t1)
            if t1 - t0 < self.frame_len:
                break
            sel, scores = self.select(analyzer.process(r[t0:t1]))
            w = self.stack(sel)
            frames.append(ControlFrame(f, sel, FullbandFilter(w), scores))
        return SignalBuffer(y, reference.sample_rate_hz), frames


def control_sa_sfanc(reference: SignalBuffer, db: SubbandDatabase, bank: AnalysisBank):
    return SaSfancController(db, bank).run(reference)


class SfancController:
    """Single fullband filter chosen per frame from the baseline library."""

    def __init__(self, db: FullbandDatabase, frame_len: Optional[int] = None):
        if len(db) == 0:
            raise ConfigError("fullband database is empty")
        self.db = db
        self.frame_len = frame_len or int(round(db.sample_rate_hz))
        self.candidates = [rec.signature for rec in db.records]
        self.selections = 0

    def run(self, reference: SignalBuffer) -> Tuple[SignalBuffer, List[ControlFrame]]:
        r = np.ascontiguousarray(reference.samples)
        L = self.db.L
        ref_pad = np.concatenate([np.zeros(L - 1), r])
        y = np.zeros(len(r))
        w = np.zeros(L)
        frames = []
        for f, t0, t1 in _frames(len(r), self.frame_len):
            kernels.fir_loop(ref_pad, w, y, t0, t1)
            if t1 - t0 < self.frame_len:
                break
            bits = signature(r[t0:t1], self.db.features)
            sc = jaccard_scores(bits, self.candidates)
            j = int(np.argmax(sc))
            self.selections += 1
            w = self.db.records[j].weights_time
            frames.append(ControlFrame(f, np.array([j]), FullbandFilter(w), [[float(v) for v in sc]]))
        return SignalBuffer(y, reference.sample_rate_hz), frames


def run_sfanc_baseline(reference: SignalBuffer, db_fullband: FullbandDatabase):
    return SfancController(db_fullband).run(reference)
