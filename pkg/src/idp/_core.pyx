# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: PGF coefficient extraction and the Gillespie day loop.

``idp._fallback`` carries the same two functions in numpy / pure Python; the
signatures and random-number consumption must stay identical between them.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, cos, sin, log, atan2, fmax, M_PI

cnp.import_array()


def pgf_coefficients(const double[::1] lam, const cnp.int64_t[::1] src,
                     const cnp.int64_t[::1] dst, double p, Py_ssize_t n_grid,
                     double cutoff=-60.0):
    cdef Py_ssize_t n_half = n_grid // 2
    cdef Py_ssize_t n_pairs = lam.shape[0]
    cdef Py_ssize_t k, m, stop
    cdef cnp.int64_t i, j, idx, j_mod
    cdef double theta, c, s, re, im, total, lk, fi
    cdef double two_pi_over_n = 2.0 * M_PI / n_grid
    cdef double[::1] cos_t = np.empty(n_half + 1)
    cdef double[::1] sin_t = np.empty(n_half + 1)
    cdef double[::1] re_l = np.empty(n_half + 1)
    cdef double[::1] im_l = np.empty(n_half + 1)
    cdef double[::1] w = np.full(n_half + 1, 2.0)
    cdef double[::1] buf_re = np.empty(n_half + 1)
    cdef double[::1] buf_im = np.empty(n_half + 1)
    out = np.empty(n_pairs)
    cdef double[::1] out_v = out

    w[0] = 1.0
    w[n_half] = 1.0
    for m in range(n_half + 1):
        theta = two_pi_over_n * m
        c = cos(theta)
        s = sin(theta)
        cos_t[m] = c - 1.0
        sin_t[m] = s
        re = 1.0 - p + p * c
        im = p * s
        # floored so that i * log|.| stays finite (the PGF vanishes there)
        re_l[m] = 0.5 * log(fmax(re * re + im * im, 1e-300))
        im_l[m] = atan2(im, re)

    for k in range(n_pairs):
        i = src[k]
        j = dst[k]
        j_mod = j % n_grid
        lk = lam[k]
        fi = <double>i
        # |phi| decreases monotonically on [0, pi]: find the last useful node
        stop = n_half + 1
        for m in range(n_half + 1):
            if lk * cos_t[m] + fi * re_l[m] < cutoff:
                stop = m
                break
        idx = 0
        for m in range(stop):
            buf_re[m] = lk * cos_t[m] + fi * re_l[m]
            buf_im[m] = lk * sin_t[m] + fi * im_l[m] - two_pi_over_n * idx
            # idx tracks (j * m) mod n_grid
            idx = idx + j_mod
            if idx >= n_grid:
                idx = idx - n_grid
        total = 0.0
        for m in range(stop):
            total = total + w[m] * exp(buf_re[m]) * cos(buf_im[m])
        out_v[k] = total / n_grid
    return out


def simulate_chunk(const double[::1] rates, double mu, cnp.int64_t state,
                   Py_ssize_t day, double t_in_day, const double[::1] exps,
                   const double[::1] unifs, cnp.int64_t[::1] out):
    cdef Py_ssize_t t_max = rates.shape[0]
    cdef Py_ssize_t n = exps.shape[0]
    cdef Py_ssize_t k = 0
    cdef double a, psi, wait
    while day < t_max and k < n:
        a = rates[day]
        psi = a + mu * state
        if psi <= 0.0:
            day += 1
            t_in_day = 0.0
            out[day] = state
            continue
        wait = exps[k] / psi
        if t_in_day + wait < 1.0:
            t_in_day += wait
            if unifs[k] * psi < a:
                state += 1
            else:
                state -= 1
        else:
            day += 1
            t_in_day = 0.0
            out[day] = state
        k += 1
    return state, day, t_in_day, k
