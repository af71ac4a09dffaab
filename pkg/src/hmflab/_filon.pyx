# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of hmflab._filon_py.

Same phase-cell contract and the same per-term arithmetic as the numpy
route (multiplicative phase recurrences resynchronized every ``resync``
steps, truncated-series moments below ``series_cut``), reordered to run
cells outer and time inner so each cell stays in registers.  The moment
denominators i t (rate_b - rate_a) are purely imaginary, so the closed
forms divide by a real scalar instead of a complex one.  Threads split
the cell range and accumulate into private buffers that are summed at
the end; the hot loop releases the GIL either way.
"""

import threading

import numpy as np

from libc.math cimport INFINITY, fabs

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)

# Series moments sum x^k / (k! (k + 1)) and x^k / (k! (k + 2)) for
# k <= 9; the reciprocals are tabulated once at import.
cdef double _INV0[10]
cdef double _INV1[10]

cdef double _factorial = 1.0
cdef int _k
for _k in range(10):
    if _k:
        _factorial *= _k
    _INV0[_k] = 1.0 / (_factorial * (_k + 1))
    _INV1[_k] = 1.0 / (_factorial * (_k + 2))


cdef void _accumulate_cells(Py_ssize_t c0, Py_ssize_t c1,
                            double[::1] rate_a, double[::1] rate_b,
                            double[:, ::1] amps_a, double[:, ::1] amps_b,
                            double dt, Py_ssize_t n_times, Py_ssize_t resync,
                            double series_cut,
                            double complex[:, ::1] out) noexcept nogil:
    # amps_* are cell-major (n_cells, n_families); out is time-major
    # (n_times, n_families) so one step touches one cache line.
    cdef Py_ssize_t c, n, k, f
    cdef Py_ssize_t n_fam = amps_a.shape[1]
    cdef double d, abs_d, n_star, dn, inv
    cdef double complex step_p, step_e, p, e, x, term, m0, m1, w1, w2
    for c in range(c0, c1):
        d = dt * (rate_b[c] - rate_a[c])
        abs_d = fabs(d)
        n_star = series_cut / abs_d if abs_d > 0.0 else INFINITY
        step_p = cexp(1j * (dt * rate_a[c]))
        step_e = cexp(1j * d)
        p = 1.0
        e = 1.0
        for n in range(n_times):
            if n and n % resync == 0:
                p = cexp(1j * ((n * dt) * rate_a[c]))
                e = cexp(1j * (n * d))
            dn = n * d
            if n < n_star:
                x = 1j * dn
                m0 = 1.0
                m1 = 0.5
                term = 1.0
                for k in range(1, 10):
                    term = term * x
                    m0 = m0 + term * _INV0[k]
                    m1 = m1 + term * _INV1[k]
            else:
                inv = 1.0 / dn
                m0 = (e - 1.0) * inv * -1j
                m1 = (e * (1j * dn - 1.0) + 1.0) * -(inv * inv)
            w1 = p * (m0 - m1)
            w2 = p * m1
            for f in range(n_fam):
                out[n, f] = out[n, f] + amps_a[c, f] * w1 + amps_b[c, f] * w2
            p = p * step_p
            e = e * step_e


def _run_chunk(double[::1] rate_a, double[::1] rate_b,
               double[:, ::1] amps_a, double[:, ::1] amps_b,
               double dt, Py_ssize_t n_times, Py_ssize_t resync,
               double series_cut, double complex[:, ::1] out,
               Py_ssize_t c0, Py_ssize_t c1):
    with nogil:
        _accumulate_cells(c0, c1, rate_a, rate_b, amps_a, amps_b, dt,
                          n_times, resync, series_cut, out)


def filon_accumulate(rate_a, rate_b, amps_a, amps_b, double dt,
                     Py_ssize_t n_times, Py_ssize_t resync=256,
                     double series_cut=0.15, Py_ssize_t n_threads=1):
    """Sum the phase-cell contributions on the uniform time grid."""
    ra = np.ascontiguousarray(rate_a, dtype=np.float64)
    rb = np.ascontiguousarray(rate_b, dtype=np.float64)
    a = np.ascontiguousarray(np.transpose(amps_a), dtype=np.float64)
    b = np.ascontiguousarray(np.transpose(amps_b), dtype=np.float64)
    cdef Py_ssize_t n_cells = ra.shape[0]
    cdef Py_ssize_t n_fam = a.shape[1]
    if n_cells == 0:
        return np.zeros((n_fam, n_times), dtype=complex)
    if n_threads <= 1 or n_cells < 2048:
        out = np.zeros((n_times, n_fam), dtype=complex)
        _run_chunk(ra, rb, a, b, dt, n_times, resync, series_cut, out,
                   0, n_cells)
        return np.ascontiguousarray(out.T)
    n_chunks = int(min(n_threads, max(1, n_cells // 1024)))
    bounds = np.linspace(0, n_cells, n_chunks + 1).astype(np.intp)
    buffers = np.zeros((n_chunks, n_times, n_fam), dtype=complex)
    workers = [
        threading.Thread(
            target=_run_chunk,
            args=(ra, rb, a, b, dt, n_times, resync, series_cut,
                  buffers[i], int(bounds[i]), int(bounds[i + 1])),
        )
        for i in range(n_chunks)
    ]
    for worker in workers:
        worker.start()
    for worker in workers:
        worker.join()
    return np.ascontiguousarray(buffers.sum(axis=0).T)


def volterra_convolve(kernel, source, double dt):
    """March the product-trapezoid rule for y = F + K * y."""
    k_arr = np.ascontiguousarray(kernel, dtype=np.float64)
    f_arr = np.ascontiguousarray(source, dtype=np.float64)
    cdef double[::1] kv = k_arr
    cdef double[::1] fv = f_arr
    cdef Py_ssize_t n = kv.shape[0]
    y_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] y = y_arr
    cdef Py_ssize_t m, j
    cdef double acc, denominator
    with nogil:
        y[0] = fv[0]
        denominator = 1.0 - 0.5 * dt * kv[0]
        for m in range(1, n):
            acc = 0.5 * kv[m] * y[0]
            for j in range(1, m):
                acc += kv[m - j] * y[j]
            y[m] = (fv[m] + dt * acc) / denominator
    return y_arr
