"""Pure-Python/numpy versions of the loops in ``_kernels.pyx``.

Same signatures and buffer conventions; results agree with the compiled
loops to rounding error (summation order differs).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def fxnlms_loop(ref_pad, fref_pad, d, s, w, y_pad, e, mu, eps, t0, t1):
    L = len(w)
    S = len(s)
    s_rev = s[::-1]
    for t in range(t0, t1):
        x = ref_pad[t : t + L][::-1]
        y_pad[t + S - 1] = np.dot(w, x)
        e[t] = d[t] - np.dot(s_rev, y_pad[t : t + S])
        fx = fref_pad[t : t + L][::-1]
        w += (mu * e[t] / (np.dot(fx, fx) + eps)) * fx


def fir_loop(ref_pad, w, y, t0, t1):
    L = len(w)
    if t1 > t0:
        y[t0:t1] = np.convolve(ref_pad[t0 : t1 + L - 1], w, mode="valid")


def saf_loop(ref_pad, d, s, y_pad, e_pad, w, rsub_pad, proto, twiddles, wsub,
             mu, eps, D, stride, stack, t0, t1, counters):
    L = len(w)
    S = len(s)
    K = len(proto)
    M = twiddles.shape[0]
    Ls = wsub.shape[1]
    ref_win = sliding_window_view(ref_pad, L)
    t = t0
    while t < t1:
        # samples up to and including the next decimation instant share one filter
        nxt = min(t1, t + (-t) % D + 1)
        y_pad[t + S - 1 : nxt + S - 1] = ref_win[t:nxt] @ w[::-1]
        sy = np.convolve(y_pad[t : nxt + S - 1], s, mode="valid")
        e_pad[t + K - 1 : nxt + K - 1] = d[t:nxt] - sy
        last = nxt - 1
        t = nxt
        if last % D:
            continue
        n = last // D
        hist = e_pad[last : last + K][::-1]
        branch = (proto * hist).reshape(K // M, M).sum(axis=0)
        # column-wise sum, so each subband's value does not depend on the others
        em = (branch[:, None] * twiddles).sum(axis=0)
        reg = rsub_pad[:, n : n + Ls][:, ::-1]
        energy = np.einsum("ij,ij->i", reg.real, reg.real) + np.einsum("ij,ij->i", reg.imag, reg.imag)
        g = mu * em / (energy + eps)
        wsub += g[:, None] * np.conj(reg)
        counters[0] += 1
        if (n + 1) % stride == 0:
            w[:] = stack(wsub)
            counters[1] += 1
