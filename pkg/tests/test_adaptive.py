import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import lfilter

from sasfanc import kernels
from sasfanc.adaptive import NlmsConfig, fullband_fxnlms, saf_fxnlms
from sasfanc.errors import ConfigError, DimensionError
from sasfanc.filterbank import FastStacker, SubbandFilterSet, analyze, stack_fft1
from sasfanc.signals import (
    BandSpec,
    PathModel,
    SignalBuffer,
    apply_path,
    default_primary_path,
    default_secondary_path,
    gen_bandlimited_noise,
)
from sasfanc.sim import noise_reduction_per_second, wiener_oracle

RATE = 16000.0
DELTA = PathModel(np.array([1.0]))
FULL = BandSpec(((20.0, 7980.0),))


def _nr_last_second(d, e):
    return noise_reduction_per_second(d, e)[-1]


class TestConfig:
    def test_defaults(self):
        cfg = NlmsConfig()
        assert (cfg.mu, cfg.eps, cfg.L, cfg.stack_stride) == (0.01, 1e-6, 1024, 1)

    @pytest.mark.parametrize("kw", [{"mu": 0}, {"mu": 2.5}, {"eps": 0}, {"L": 0}, {"stack_stride": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            NlmsConfig(**kw)

    def test_bank_divisibility(self, bank):
        with pytest.raises(DimensionError):
            NlmsConfig(L=1022).check_bank(bank)


class TestFullband:
    def test_zero_disturbance_fixed_point(self, rng):
        r = SignalBuffer(rng.standard_normal(2000), RATE)
        d = SignalBuffer(np.zeros(2000), RATE)
        run = fullband_fxnlms(r, d, DELTA, DELTA, NlmsConfig(L=32))
        assert np.all(run.final_filter.weights == 0) and np.all(run.error.samples == 0)

    def test_converges_to_wiener(self):
        r = np.random.default_rng(8)
        x = SignalBuffer(r.standard_normal(160000), RATE)
        p = PathModel(r.standard_normal(32) * np.exp(-np.arange(32) / 8))
        d = apply_path(p, x)
        cfg = NlmsConfig(mu=0.01, L=64)
        w = fullband_fxnlms(x, d, DELTA, DELTA, cfg).final_filter.weights
        w_o = wiener_oracle(x, d, 64, DELTA).weights
        misalign = 10 * np.log10(np.sum((w - w_o) ** 2) / np.sum(w_o**2))
        assert misalign <= -30

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            fullband_fxnlms(SignalBuffer(np.ones(10), RATE), SignalBuffer(np.ones(9), RATE), DELTA, DELTA)

    def test_default_paths_reduce_noise(self):
        x = gen_bandlimited_noise(FULL, 4.0, RATE, seed=1)
        d = apply_path(default_primary_path(), x)
        s = default_secondary_path()
        run = fullband_fxnlms(x, d, s, s, NlmsConfig(mu=0.05, L=256))
        assert _nr_last_second(d, run.error) > 15

    def test_snapshots(self, rng):
        r = SignalBuffer(rng.standard_normal(1000), RATE)
        run = fullband_fxnlms(r, r, DELTA, DELTA, NlmsConfig(L=16), snapshot_every=300)
        assert [t for t, _ in run.weight_snapshots] == [300, 600, 900, 1000]
        assert np.array_equal(run.weight_snapshots[-1][1].weights, run.final_filter.weights)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), mu=st.floats(0.01, 1.0), L=st.integers(1, 24))
    def test_a_posteriori_contraction(self, seed, mu, L):
        r = np.random.default_rng(seed)
        n = L + 5
        ref = r.standard_normal(n)
        d = r.standard_normal(n)
        w = r.standard_normal(L)
        ref_pad = np.concatenate([np.zeros(L - 1), ref])
        y_pad = np.zeros(n)
        e = np.zeros(n)
        t = n - 1
        u = ref_pad[t : t + L][::-1]
        kernels.fxnlms_loop(ref_pad, ref_pad, d, np.array([1.0]), w, y_pad, e, mu, 1e-6, t, t + 1)
        assert abs(d[t] - w @ u) <= abs(e[t]) + 1e-12


class TestSaf:
    def test_zero_reference(self, bank):
        r = SignalBuffer(np.zeros(4000), RATE)
        d = gen_bandlimited_noise(FULL, 0.25, RATE, seed=2)
        run = saf_fxnlms(r, d, DELTA, DELTA, bank, NlmsConfig(L=256))
        assert np.all(run.final_subband_filters.weights == 0)
        assert np.array_equal(run.error.samples, d.samples)

    @pytest.mark.parametrize("n, updates", [(16000, 4000), (16002, 4001), (3, 1)])
    def test_update_count(self, bank, rng, n, updates):
        r = SignalBuffer(rng.standard_normal(n), RATE)
        run = saf_fxnlms(r, r, DELTA, DELTA, bank, NlmsConfig(L=256))
        assert run.subband_updates == updates
        assert run.stack_count == updates

    def test_stack_stride(self, bank, rng):
        r = SignalBuffer(rng.standard_normal(16000), RATE)
        run = saf_fxnlms(r, r, DELTA, DELTA, bank, NlmsConfig(L=256, stack_stride=8))
        assert run.subband_updates == 4000 and run.stack_count == 500

    def test_deterministic(self, bank):
        x = gen_bandlimited_noise(FULL, 0.5, RATE, seed=4)
        d = apply_path(default_primary_path(), x)
        s = default_secondary_path()
        a = saf_fxnlms(x, d, s, s, bank, NlmsConfig(L=256))
        b = saf_fxnlms(x, d, s, s, bank, NlmsConfig(L=256))
        assert np.array_equal(a.error.samples, b.error.samples)
        assert np.array_equal(a.final_subband_filters.weights, b.final_subband_filters.weights)

    def test_dimension_errors(self, bank, rng):
        r = SignalBuffer(rng.standard_normal(100), RATE)
        with pytest.raises(DimensionError):
            saf_fxnlms(r, SignalBuffer(np.ones(99), RATE), DELTA, DELTA, bank)
        with pytest.raises(DimensionError):
            saf_fxnlms(r, r, DELTA, DELTA, bank, NlmsConfig(L=256),
                       initial=SubbandFilterSet.zeros(8, 512))

    def test_reduces_noise_and_warm_start(self, bank):
        x = gen_bandlimited_noise(FULL, 3.0, RATE, seed=6)
        d = apply_path(default_primary_path(), x)
        s = default_secondary_path()
        cold = saf_fxnlms(x, d, s, s, bank, NlmsConfig(mu=0.05, L=256))
        assert _nr_last_second(d, cold.error) > 12
        warm = saf_fxnlms(x, d, s, s, bank, NlmsConfig(mu=0.05, L=256), initial=cold.final_subband_filters)
        assert noise_reduction_per_second(d, warm.error)[0] > 10

    def test_stacked_matches_subband_model(self, bank):
        x = gen_bandlimited_noise(FULL, 3.0, RATE, seed=7)
        d = apply_path(default_primary_path(), x)
        s = default_secondary_path()
        run = saf_fxnlms(x, d, s, s, bank, NlmsConfig(mu=0.05, L=256))
        w = run.final_filter.weights
        assert np.allclose(w, stack_fft1(run.final_subband_filters), atol=1e-12)
        wsub = run.final_subband_filters.weights
        for m in (1, 2, 3):
            probe = gen_bandlimited_noise(BandSpec(((2000.0 * m - 500, 2000.0 * m + 500),)), 2.0, RATE, seed=m)
            full = analyze(bank, np.convolve(probe.samples, w)[: len(probe)]).data[m]
            sub = lfilter(wsub[m], [1.0], analyze(bank, probe).data[m])
            skip = 200
            ratio = 10 * np.log10(np.mean(np.abs(full[skip:]) ** 2) / np.mean(np.abs(sub[skip:]) ** 2))
            assert abs(ratio) <= 1.0


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_subband_updates_are_independent(bank, backend):
    """Reordering the subbands inside the loop permutes the weights and nothing else."""
    try:
        impl = kernels.get_backend(backend)
    except ImportError:
        pytest.skip("compiled extension not built")
    r = np.random.default_rng(21)
    n, L, D, K = 400, 64, bank.D, bank.K
    Ls = L // D
    ref = r.standard_normal(n)
    d = r.standard_normal(n)
    s = np.array([1.0, 0.3])
    rsub = np.zeros((5, n // D + Ls - 1), dtype=complex)
    rsub[:, Ls - 1 :] = analyze(bank, np.convolve(ref, s)[:n]).data
    perm = np.array([3, 0, 4, 1, 2])
    inv = np.argsort(perm)

    def go(order):
        wsub = np.zeros((5, Ls), dtype=complex)
        stacker = FastStacker(L, bank.M)
        impl.saf_loop(
            np.concatenate([np.zeros(L - 1), ref]), d, s, np.zeros(n + 1), np.zeros(n + K - 1),
            np.zeros(L), np.ascontiguousarray(rsub[order]), bank.prototype.coeffs,
            np.ascontiguousarray(bank.twiddles[:, order]), wsub, 0.1, 1e-6, D, 1,
            lambda ws: stacker(ws[inv] if order is perm else ws), 0, n, np.zeros(2, dtype=np.int64),
        )
        return wsub

    base = go(np.arange(5))
    permuted = go(perm)
    assert np.array_equal(permuted[inv], base)
