"""Command-line front end: ``train``, ``run``, ``compare``, ``validate-eq6``, ``inspect``.

Exit codes: 0 success, 1 tolerance or convergence failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .adaptive import NlmsConfig
from .controllers import DEFAULT_TRAINING_NOISES, TrainingSpec, train_sa_sfanc, train_sfanc
from .database import (
    FullbandDatabase,
    SubbandDatabase,
    db_load,
    db_save,
    describe,
    detect_kind,
    load_fullband,
    save_fullband,
)
from .errors import SampleRateError, SasfancError, TrainingError
from .features import FULLBAND_FEATURES, FeatureConfig
from .sim import (
    DEFAULT_SEGMENTS,
    RunResult,
    ScenarioConfig,
    cached_bank,
    run_scenario,
    steady_state_nr,
    validate_eq6,
)
from .signals import DEFAULT_RATE_HZ, BandSpec, PathModel, design_bandpass_path, load_wav

log = logging.getLogger("sasfanc")

SCHEMA_VERSION = 1
OUTPUT_ENV = "SASFANC_OUTPUT_DIR"
EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE = 0, 1, 2

ALGO_NAMES = {"off": "anc_off", "saf": "saf_fxnlms", "sfanc": "sfanc", "sasfanc": "sa_sfanc"}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BandsCfg(_Strict):
    bands: List[Tuple[float, float]]
    gains: Optional[List[float]] = None

    def to_spec(self) -> BandSpec:
        return BandSpec(tuple(self.bands), None if self.gains is None else tuple(self.gains))


class SegmentCfg(BandsCfg):
    duration_s: float = Field(gt=0)


class PathCfg(_Strict):
    f_lo_hz: float = 20.0
    f_hi_hz: float = 7900.0
    num_taps: int = Field(256, gt=0)
    delay_taps: int = Field(32, ge=0)
    seed: Optional[int] = 11

    def to_path(self, rate_hz: float, label: str) -> PathModel:
        return design_bandpass_path(
            self.f_lo_hz, self.f_hi_hz, self.num_taps, self.delay_taps, self.seed, rate_hz, label
        )


class BankCfg(_Strict):
    M: int = 8
    K: int = 128

    @model_validator(mode="after")
    def _check(self):
        if self.M < 4 or self.M % 2:
            raise ValueError("M must be even and >= 4")
        if self.K <= 0 or self.K % self.M:
            raise ValueError(f"K={self.K} must be a positive multiple of M={self.M}")
        return self


class NlmsCfg(_Strict):
    mu: float = Field(0.01, gt=0, le=2)
    eps: float = Field(1e-6, gt=0)
    L: int = Field(1024, gt=0)
    stack_stride: int = Field(1, ge=1)


class FeaturesCfg(_Strict):
    segment_len: int = Field(64, gt=0)
    fft_len: int = Field(128, gt=0)
    overlap: float = Field(0.5, ge=0, lt=1)
    window: str = "hann"

    def to_features(self) -> FeatureConfig:
        return FeatureConfig(self.segment_len, self.fft_len, self.overlap, self.window)


def _bands_of(spec: BandSpec) -> dict:
    return {"bands": [list(b) for b in spec.bands], "gains": spec.gain_shape and list(spec.gain_shape)}


class TrainingCfg(_Strict):
    noises: List[BandsCfg] = Field(
        default_factory=lambda: [BandsCfg(**_bands_of(s)) for s in DEFAULT_TRAINING_NOISES]
    )
    duration_s: float = Field(30.0, ge=1)
    seed: int = 1000
    min_final_nr_db: float = 10.0
    sfanc_features: FeaturesCfg = Field(
        default_factory=lambda: FeaturesCfg(
            segment_len=FULLBAND_FEATURES.segment_len, fft_len=FULLBAND_FEATURES.fft_len
        )
    )


class ScenarioCfg(_Strict):
    segments: List[SegmentCfg] = Field(
        default_factory=lambda: [
            SegmentCfg(duration_s=d, **_bands_of(s)) for s, d in DEFAULT_SEGMENTS
        ]
    )
    snr_db: float = 20.0
    noise_seed: int = 100
    measurement_seed: int = 200


class CliConfig(_Strict):
    sample_rate_hz: float = Field(DEFAULT_RATE_HZ, gt=0)
    bank: BankCfg = Field(default_factory=BankCfg)
    nlms: NlmsCfg = Field(default_factory=NlmsCfg)
    features: FeaturesCfg = Field(default_factory=FeaturesCfg)
    training: TrainingCfg = Field(default_factory=TrainingCfg)
    scenario: ScenarioCfg = Field(default_factory=ScenarioCfg)
    primary: PathCfg = Field(default_factory=PathCfg)
    secondary: PathCfg = Field(
        default_factory=lambda: PathCfg(num_taps=128, delay_taps=16, seed=12)
    )
    output_dir: str = "out"

    @model_validator(mode="after")
    def _check(self):
        D = self.bank.M // 2
        if self.nlms.L % D:
            raise ValueError(f"L={self.nlms.L} must be divisible by D={D}")
        if self.features.fft_len < self.features.segment_len:
            raise ValueError("features.fft_len must be >= features.segment_len")
        return self

    # domain objects ---------------------------------------------------------

    def nlms_config(self) -> NlmsConfig:
        return NlmsConfig(self.nlms.mu, self.nlms.eps, self.nlms.L, self.nlms.stack_stride)

    def paths(self) -> Tuple[PathModel, PathModel]:
        return (
            self.primary.to_path(self.sample_rate_hz, "primary"),
            self.secondary.to_path(self.sample_rate_hz, "secondary"),
        )

    def training_spec(self) -> TrainingSpec:
        p, s = self.paths()
        return TrainingSpec(
            training_noises=tuple(n.to_spec() for n in self.training.noises),
            duration_s=self.training.duration_s,
            primary=p,
            secondary=s,
            nlms=self.nlms_config(),
            features=self.features.to_features(),
            sample_rate_hz=self.sample_rate_hz,
            seed=self.training.seed,
            min_final_nr_db=self.training.min_final_nr_db,
        )

    def scenario_config(self, algorithm: str) -> ScenarioConfig:
        p, s = self.paths()
        sc = self.scenario
        return ScenarioConfig(
            segments=tuple((seg.to_spec(), seg.duration_s) for seg in sc.segments),
            sample_rate_hz=self.sample_rate_hz,
            snr_db=sc.snr_db,
            primary=p,
            secondary=s,
            algorithm=algorithm,
            noise_seed=sc.noise_seed,
            measurement_seed=sc.measurement_seed,
            nlms=self.nlms_config(),
            M=self.bank.M,
            K=self.bank.K,
        )


class UsageError(Exception):
    pass


def load_config(path: Optional[str]) -> CliConfig:
    """Parse a YAML or JSON config file; ``None`` gives the defaults."""
    if path is None:
        return CliConfig()
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise UsageError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"config {path} must be a mapping")
    try:
        return CliConfig.model_validate(raw)
    except ValidationError as exc:
        raise UsageError(f"invalid config {path}:\n{exc}") from exc


def output_dir(cfg: CliConfig, override: Optional[str]) -> Path:
    out = Path(override or os.environ.get(OUTPUT_ENV) or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _finite(v: float):
    return v if math.isfinite(v) else str(v)


# ---------------------------------------------------------------- train

def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.training.seed = args.seed
    spec = cfg.training_spec()
    bank = cached_bank(cfg.bank.M, cfg.bank.K)

    def report(i, nr):
        print(f"noise {i}: final-second NR {nr:.2f} dB")

    try:
        db = train_sa_sfanc(spec, bank, on_noise=report)
    except TrainingError as exc:
        print(f"error: training noise {exc.noise_index} did not converge: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    db_save(db, args.out)
    print(f"wrote {len(db)} records to {args.out}")

    if args.sfanc:
        def report_fb(j, nr):
            print(f"fullband filter {j}: final-second NR {nr:.2f} dB")

        try:
            fb = train_sfanc(spec, cfg.bank.M, cfg.training.sfanc_features.to_features(), report_fb)
        except TrainingError as exc:
            print(f"error: fullband noise {exc.noise_index} did not converge: {exc}", file=sys.stderr)
            return EXIT_TOLERANCE
        save_fullband(fb, args.sfanc)
        print(f"wrote {len(fb)} fullband filters to {args.sfanc}")
    return EXIT_OK


# ---------------------------------------------------------------- run / compare

def _load_dbs(db_path: Optional[str], sfanc_path: Optional[str]):
    sub, fb = None, None
    for path in (db_path, sfanc_path):
        if path is None:
            continue
        if not os.path.isfile(path):
            raise UsageError(f"no such database: {path}")
        if detect_kind(path) == "subband":
            sub = db_load(path)
        else:
            fb = load_fullband(path)
    return sub, fb


def _require(algorithm: str, sub: Optional[SubbandDatabase], fb: Optional[FullbandDatabase]):
    if algorithm == "sa_sfanc" and sub is None:
        raise UsageError("--algo sasfanc needs a subband database (--db)")
    if algorithm == "sfanc" and fb is None:
        raise UsageError("--algo sfanc needs a fullband database (--sfanc-db or --db)")


def _apply_seed_overrides(cfg: CliConfig, args) -> None:
    if args.noise_seed is not None:
        cfg.scenario.noise_seed = args.noise_seed
    if args.measurement_seed is not None:
        cfg.scenario.measurement_seed = args.measurement_seed


def _reference(cfg: CliConfig, wav: Optional[str]):
    if wav is None:
        return None, [0.0]
    x = load_wav(wav)
    if x.sample_rate_hz != cfg.sample_rate_hz:
        raise SampleRateError(
            f"{wav} is sampled at {x.sample_rate_hz:g} Hz; the config expects {cfg.sample_rate_hz:g} Hz"
        )
    if len(x) < int(cfg.sample_rate_hz):
        raise UsageError(f"{wav} is shorter than one second")
    return x, [0.0]


def write_csv(path: Path, res: RunResult) -> None:
    n = len(res.disturbance)
    table = np.column_stack([np.arange(n), res.disturbance.samples, res.error.samples])
    np.savetxt(path, table, fmt=("%d", "%.9g", "%.9g"), delimiter=",", header="sample,d,e", comments="")


def summarize(res: RunResult, onsets_s, cfg: CliConfig, extra: Optional[dict] = None) -> dict:
    nr = res.nr_per_second
    out = {
        "schema_version": SCHEMA_VERSION,
        "algorithm": res.algorithm,
        "nr_per_second_db": [float(v) for v in nr],
        "steady_state_nr_db": _finite(steady_state_nr(nr, onsets_s)) if len(nr) > 1 else None,
        "frames": len(nr),
        "selections": [
            {"frame": f.frame_index, "selected": [int(i) for i in np.atleast_1d(f.selected_indices)]}
            for f in (res.selections or [])
        ],
        "counters": {k: int(v) for k, v in res.counters.items()},
        "seeds": {
            "noise_seed": cfg.scenario.noise_seed,
            "measurement_seed": cfg.scenario.measurement_seed,
        },
        "config": cfg.model_dump(mode="json"),
    }
    if extra:
        out.update(extra)
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    _apply_seed_overrides(cfg, args)
    algorithm = ALGO_NAMES[args.algo]
    sub, fb = _load_dbs(args.db, args.sfanc_db)
    _require(algorithm, sub, fb)
    x, onsets = _reference(cfg, args.wav)
    scen = cfg.scenario_config(algorithm)
    if x is None:
        onsets = scen.onsets_s
    res = run_scenario(scen, sub, fb, reference_override=x)

    out = output_dir(cfg, args.out_dir)
    write_csv(out / f"{args.algo}.csv", res)
    summary = summarize(res, onsets, cfg, {"source": args.wav or "synthetic"})
    with open(out / f"{args.algo}_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    steady = summary["steady_state_nr_db"]
    print(f"{args.algo}: {summary['frames']} s, steady-state NR "
          f"{steady if steady is None or isinstance(steady, str) else round(steady, 2)} dB")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    _apply_seed_overrides(cfg, args)
    sub, fb = _load_dbs(args.db, args.sfanc_db)
    for algo in ALGO_NAMES.values():
        _require(algo, sub, fb)
    x, onsets = _reference(cfg, args.wav)

    results = {}
    for short, algo in ALGO_NAMES.items():
        scen = cfg.scenario_config(algo)
        if x is None:
            onsets = scen.onsets_s
        results[short] = run_scenario(scen, sub, fb, reference_override=x)
        log.info("%s done", short)

    out = output_dir(cfg, args.out_dir)
    names = list(ALGO_NAMES)
    n = len(results[names[0]].nr_per_second)
    table = np.column_stack([np.arange(n)] + [results[k].nr_per_second for k in names])
    np.savetxt(out / "compare.csv", table, fmt=["%d"] + ["%.9g"] * len(names),
               delimiter=",", header="second," + ",".join(names), comments="")
    steady = {k: _finite(steady_state_nr(results[k].nr_per_second, onsets)) for k in names}
    summary = {
        "schema_version": SCHEMA_VERSION,
        "nr_per_second_db": {k: [float(v) for v in results[k].nr_per_second] for k in names},
        "steady_state_nr_db": steady,
        "seeds": {"noise_seed": cfg.scenario.noise_seed,
                  "measurement_seed": cfg.scenario.measurement_seed},
        "config": cfg.model_dump(mode="json"),
    }
    with open(out / "compare_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)

    print("second  " + "  ".join(f"{k:>8}" for k in names))
    for t in range(n):
        print(f"{t:6d}  " + "  ".join(f"{results[k].nr_per_second[t]:8.2f}" for k in names))
    print("steady  " + "  ".join(f"{steady[k]:8.2f}" for k in names))
    return EXIT_OK


# ---------------------------------------------------------------- validate-eq6 / inspect

def cmd_validate_eq6(args) -> int:
    rep = validate_eq6(
        args.bt, args.bc, center_hz=args.center, snr_db=args.snr,
        seeds=tuple(range(args.seed0, args.seed0 + args.seeds)),
        duration_s=args.duration, L=args.L,
    )
    d = rep.to_dict()
    d["schema_version"] = SCHEMA_VERSION
    _emit(d)
    return EXIT_OK if d["pass"] else EXIT_TOLERANCE


def _centroid_hz(h: np.ndarray, rate_hz: float) -> float:
    """Power-weighted circular mean frequency of a channel response, in [0, rate)."""
    ang = 2 * np.pi * np.arange(len(h)) / len(h)
    z = np.sum(np.abs(h) ** 2 * np.exp(1j * ang))
    hz = float((np.angle(z) % (2 * np.pi)) * rate_hz / (2 * np.pi))
    return 0.0 if rate_hz - hz < 1e-6 * rate_hz else hz


def cmd_inspect(args) -> int:
    if args.db is not None:
        if not os.path.isfile(args.db):
            raise UsageError(f"no such database: {args.db}")
        db = db_load(args.db) if detect_kind(args.db) == "subband" else load_fullband(args.db)
        info = describe(db)
        info["schema_version"] = SCHEMA_VERSION
        _emit(info)
        return EXIT_OK

    cfg = load_config(args.config)
    bank = cached_bank(cfg.bank.M, cfg.bank.K)
    H = bank.frequency_responses(args.points)
    freqs = np.arange(args.points) * cfg.sample_rate_hz / args.points
    mag_db = 20 * np.log10(np.maximum(np.abs(H), 1e-15))
    if args.format == "csv":
        header = "freq_hz," + ",".join(f"band{m}_db" for m in range(bank.num_subbands))
        np.savetxt(sys.stdout, np.column_stack([freqs, mag_db.T]), fmt="%.9g",
                   delimiter=",", header=header, comments="")
        return EXIT_OK
    _emit({
        "schema_version": SCHEMA_VERSION,
        "M": bank.M, "K": bank.K, "D": bank.D,
        "prototype_sha256": bank.digest.hex(),
        "points": args.points,
        "center_hz": [_centroid_hz(h, cfg.sample_rate_hz) for h in H],
        "peak_db": [float(np.max(row)) for row in mag_db],
        "freq_hz": freqs.tolist(),
        "magnitude_db": mag_db.tolist(),
    })
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sasfanc", description="Subband selective fixed-filter ANC")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the subband filter library")
    p.add_argument("config", nargs="?")
    p.add_argument("--out", required=True, help="subband database path")
    p.add_argument("--sfanc", help="also train the fullband baseline library to this path")
    p.add_argument("--seed", type=int, help="override training.seed")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("run", cmd_run, "simulate one algorithm"),
        ("compare", cmd_compare, "simulate all algorithms on the same noise"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", nargs="?")
        p.add_argument("--db", help="subband (or fullband) database")
        p.add_argument("--sfanc-db", help="fullband baseline database")
        p.add_argument("--wav", help="mono WAV used as the primary noise")
        p.add_argument("--out-dir", help=f"output directory (else ${OUTPUT_ENV}, else config)")
        p.add_argument("--noise-seed", type=int)
        p.add_argument("--measurement-seed", type=int)
        if name == "run":
            p.add_argument("--algo", choices=sorted(ALGO_NAMES), default="sasfanc")
        p.set_defaults(func=func)

    p = sub.add_parser("validate-eq6", help="bandwidth-mismatch MSE check against the Wiener oracle")
    p.add_argument("--bt", type=float, default=2000.0, help="training bandwidth (Hz)")
    p.add_argument("--bc", type=float, default=1000.0, help="control bandwidth (Hz)")
    p.add_argument("--center", type=float, default=4000.0)
    p.add_argument("--snr", type=float, default=20.0, help="reference SNR in dB; 'inf' for clean")
    p.add_argument("--seeds", type=int, default=10, help="number of Monte-Carlo seeds")
    p.add_argument("--seed0", type=int, default=0)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--L", type=int, default=256)
    p.set_defaults(func=cmd_validate_eq6)

    p = sub.add_parser("inspect", help="describe a database or the analysis bank")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--db")
    g.add_argument("--bank", action="store_true")
    p.add_argument("--config")
    p.add_argument("--points", type=int, default=8192)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_inspect)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SasfancError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
