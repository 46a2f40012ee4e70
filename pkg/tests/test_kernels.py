import os
import subprocess
import sys

import numpy as np
import pytest

from sasfanc import kernels
from sasfanc.adaptive import NlmsConfig, fullband_fxnlms, saf_fxnlms
from sasfanc.signals import BandSpec, apply_path, default_primary_path, default_secondary_path, gen_bandlimited_noise

try:
    compiled = kernels.get_backend("cython")
except ImportError:  # extension not built
    compiled = None

python = kernels.get_backend("python")
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


@pytest.fixture(scope="module")
def scene():
    x = gen_bandlimited_noise(BandSpec(((20.0, 7980.0),)), 0.5, 16000.0, seed=3)
    return x, apply_path(default_primary_path(), x), default_secondary_path()


def test_backend_flag():
    assert kernels.BACKEND in ("python", "cython")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_forces_python():
    env = dict(os.environ, SASFANC_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from sasfanc import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_ext
def test_fxnlms_equivalent(scene):
    x, d, s = scene
    cfg = NlmsConfig(L=128)
    a = fullband_fxnlms(x, d, s, s, cfg, backend=python)
    b = fullband_fxnlms(x, d, s, s, cfg, backend=compiled)
    assert np.allclose(a.error.samples, b.error.samples, atol=1e-10)
    assert np.allclose(a.final_filter.weights, b.final_filter.weights, atol=1e-10)


@needs_ext
@pytest.mark.parametrize("stride", [1, 3])
def test_saf_equivalent(scene, bank, stride):
    x, d, s = scene
    cfg = NlmsConfig(L=256, stack_stride=stride)
    a = saf_fxnlms(x, d, s, s, bank, cfg, backend=python)
    b = saf_fxnlms(x, d, s, s, bank, cfg, backend=compiled)
    assert np.allclose(a.error.samples, b.error.samples, atol=1e-10)
    assert np.allclose(a.final_subband_filters.weights, b.final_subband_filters.weights, atol=1e-10)
    assert (a.subband_updates, a.stack_count) == (b.subband_updates, b.stack_count)


@needs_ext
def test_fir_equivalent(rng):
    L, n = 64, 500
    r = np.concatenate([np.zeros(L - 1), rng.standard_normal(n)])
    w = rng.standard_normal(L)
    ya, yb = np.zeros(n), np.zeros(n)
    python.fir_loop(r, w, ya, 10, 400)
    compiled.fir_loop(r, w, yb, 10, 400)
    assert np.allclose(ya, yb, atol=1e-12)
    assert np.all(ya[:10] == 0) and np.all(ya[400:] == 0)


@needs_ext
def test_read_only_inputs(scene, bank):
    x, d, s = scene
    assert not x.samples.flags.writeable
    saf_fxnlms(x, d, s, s, bank, NlmsConfig(L=256), backend=compiled)
