import os
import time

import numpy as np
import pytest

from sasfanc.adaptive import NlmsConfig
from sasfanc.controllers import TrainingSpec, train_sa_sfanc, train_sfanc
from sasfanc.signals import BandSpec
from sasfanc.sim import cached_bank


@pytest.fixture(scope="session")
def bank():
    return cached_bank(8, 128)


@pytest.fixture(scope="session")
def small_bank():
    return cached_bank(4, 64)


@pytest.fixture(scope="session")
def default_spec():
    return TrainingSpec()


@pytest.fixture(scope="session")
def timings():
    """Wall-clock seconds of expensive session fixtures, keyed by name."""
    return {}


@pytest.fixture(scope="session")
def default_db(default_spec, bank, timings):
    """The 3-noise, 5-subband library at full default settings (about 20 s to train)."""
    t0 = time.perf_counter()
    db = train_sa_sfanc(default_spec, bank)
    timings["train_default_db"] = time.perf_counter() - t0
    return db


@pytest.fixture(scope="session")
def fullband_db(default_spec):
    """15 fullband filters for the baseline (about 20 s to train)."""
    return train_sfanc(default_spec, 8)


@pytest.fixture(scope="session")
def small_spec():
    return TrainingSpec(
        training_noises=(BandSpec(((20.0, 7980.0),)), BandSpec(((600.0, 3400.0), (4600.0, 7400.0)))),
        duration_s=4.0,
        nlms=NlmsConfig(L=256),
    )


@pytest.fixture(scope="session")
def small_db(small_spec, small_bank):
    return train_sa_sfanc(small_spec, small_bank)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.delenv("SASFANC_OUTPUT_DIR", raising=False)
    return tmp_path


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):  # ids are zero-padded, so this is criterion order
        terminalreporter.write_line(line)
