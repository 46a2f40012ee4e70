"""Subband selective fixed-filter active noise control."""

from .adaptive import AdaptiveRunResult, FullbandFilter, NlmsConfig, fullband_fxnlms, saf_fxnlms
from .controllers import (
    ControlFrame,
    SaSfancController,
    SfancController,
    TrainingSpec,
    control_sa_sfanc,
    run_sfanc_baseline,
    train_sa_sfanc,
    train_sfanc,
)
from .database import (
    DatabaseMeta,
    FullbandDatabase,
    SubbandDatabase,
    SubFilterRecord,
    db_insert,
    db_load,
    db_query,
    db_save,
    load_fullband,
    save_fullband,
)
from .errors import *  # noqa: F401,F403
from .features import FeatureConfig, binarize, jaccard, select_best, signature, welch_log_psd
from .filterbank import (
    AnalysisBank,
    PrototypeFilter,
    SubbandFilterSet,
    SubbandFrame,
    analyze,
    design_prototype,
    make_bank,
    stack_fft1,
)
from .kernels import BACKEND
from .signals import (
    BandSpec,
    PathModel,
    SignalBuffer,
    apply_path,
    design_bandpass_path,
    gen_bandlimited_noise,
    load_wav,
    mix_measurement_noise,
)
from .sim import (
    MseReport,
    RunResult,
    ScenarioConfig,
    noise_reduction_per_second,
    run_scenario,
    validate_eq6,
    wiener_oracle,
)

__version__ = "0.1.0"
