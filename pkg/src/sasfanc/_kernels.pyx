# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sample-rate loops for the adaptive controllers.

Array layout (shared with ``_kernels_py``):

* ``ref_pad``/``fref_pad`` hold L-1 leading zeros, so the regressor at time t
  is ``ref_pad[t : t+L]`` read backwards.
* ``y_pad`` holds S-1 leading zeros for the secondary-path convolution.
* ``e_pad`` holds K-1 leading zeros for the subband analysis of the error.
* ``rsub_pad`` holds L_s-1 leading zeros per subband.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def fxnlms_loop(const double[::1] ref_pad, const double[::1] fref_pad, const double[::1] d,
                const double[::1] s, double[::1] w, double[::1] y_pad, double[::1] e,
                double mu, double eps, Py_ssize_t t0, Py_ssize_t t1):
    cdef Py_ssize_t L = w.shape[0]
    cdef Py_ssize_t S = s.shape[0]
    cdef Py_ssize_t t, j, base
    cdef double acc, sy, energy, g, v
    for t in range(t0, t1):
        base = t + L - 1
        acc = 0.0
        for j in range(L):
            acc += w[j] * ref_pad[base - j]
        y_pad[t + S - 1] = acc
        sy = 0.0
        for j in range(S):
            sy += s[j] * y_pad[t + S - 1 - j]
        e[t] = d[t] - sy
        energy = 0.0
        for j in range(L):
            v = fref_pad[base - j]
            energy += v * v
        g = mu * e[t] / (energy + eps)
        for j in range(L):
            w[j] += g * fref_pad[base - j]


def fir_loop(const double[::1] ref_pad, const double[::1] w, double[::1] y, Py_ssize_t t0, Py_ssize_t t1):
    """y[t] = sum_j w[j] r(t-j) for t in [t0, t1) with a fixed filter."""
    cdef Py_ssize_t L = w.shape[0]
    cdef Py_ssize_t t, j, base
    cdef double acc
    for t in range(t0, t1):
        base = t + L - 1
        acc = 0.0
        for j in range(L):
            acc += w[j] * ref_pad[base - j]
        y[t] = acc


def saf_loop(const double[::1] ref_pad, const double[::1] d, const double[::1] s, double[::1] y_pad,
             double[::1] e_pad, double[::1] w, const double complex[:, ::1] rsub_pad,
             const double[::1] proto, const double complex[:, ::1] twiddles, double complex[:, ::1] wsub,
             double mu, double eps, Py_ssize_t D, Py_ssize_t stride, stack,
             Py_ssize_t t0, Py_ssize_t t1, long long[::1] counters):
    cdef Py_ssize_t L = w.shape[0]
    cdef Py_ssize_t S = s.shape[0]
    cdef Py_ssize_t K = proto.shape[0]
    cdef Py_ssize_t M = twiddles.shape[0]
    cdef Py_ssize_t B = twiddles.shape[1]
    cdef Py_ssize_t Ls = wsub.shape[1]
    cdef Py_ssize_t t, j, k, p, m, n, base, eb, rb
    cdef double acc, sy, energy, re, im
    cdef double complex em, g, r
    cdef double[::1] branch = np.zeros(M)
    cdef double[::1] w_new
    for t in range(t0, t1):
        base = t + L - 1
        acc = 0.0
        for j in range(L):
            acc += w[j] * ref_pad[base - j]
        y_pad[t + S - 1] = acc
        sy = 0.0
        for j in range(S):
            sy += s[j] * y_pad[t + S - 1 - j]
        eb = t + K - 1
        e_pad[eb] = d[t] - sy
        if t % D != 0:
            continue
        n = t // D
        # polyphase branches of the error history, then an M-point DFT
        for p in range(M):
            branch[p] = 0.0
        for k in range(K):
            branch[k % M] += proto[k] * e_pad[eb - k]
        rb = n + Ls - 1
        for m in range(B):
            em = 0.0
            for p in range(M):
                em = em + branch[p] * twiddles[p, m]
            energy = 0.0
            for j in range(Ls):
                r = rsub_pad[m, rb - j]
                energy += r.real * r.real + r.imag * r.imag
            g = mu * em / (energy + eps)
            for j in range(Ls):
                r = rsub_pad[m, rb - j]
                # g * conj(r)
                re = g.real * r.real + g.imag * r.imag
                im = g.imag * r.real - g.real * r.imag
                wsub[m, j] = wsub[m, j] + (re + 1j * im)
        counters[0] += 1
        if (n + 1) % stride == 0:
            w_new = stack(np.asarray(wsub))
            for j in range(L):
                w[j] = w_new[j]
            counters[1] += 1
