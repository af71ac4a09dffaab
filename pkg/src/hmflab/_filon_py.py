"""Pure-numpy implementation of the oscillatory-sum hot loops.

Reference semantics for the compiled extension hmflab._filon; the
backend is picked in hmflab._accel.  Both operate on the shared
phase-cell layout: a cell is a subinterval of an energy grid carrying
endpoint phase rates (rate_a, rate_b) and, per output family, endpoint
amplitudes already multiplied by the cell width.  At time t = n dt the
cell contributes

    exp(i t rate_a) [a (M0 - M1) + b M1],

where M0 and M1 are the zeroth and first moments of exp(i delta s) on
the unit interval and delta = t (rate_b - rate_a).  The phase factors
run on multiplicative recurrences resynchronized every ``resync`` steps;
the moments switch to a truncated series below ``series_cut`` where the
closed forms cancel.

Callers are expected to go through hmflab._accel, which validates
arguments once and dispatches; these functions assume contiguous float64
inputs of consistent shape.
"""

import numpy as np

_SERIES_TERMS = 9


def filon_accumulate(rate_a, rate_b, amps_a, amps_b, dt, n_times,
                     resync=256, series_cut=0.15, n_threads=1):
    """Sum the phase-cell contributions on the uniform time grid.

    Returns a complex array of shape (n_families, n_times).  n_threads
    is accepted for signature parity with the compiled backend; the
    numpy route is single-threaded.
    """
    del n_threads
    n_fam = amps_a.shape[0]
    out = np.zeros((n_fam, n_times), dtype=complex)
    if rate_a.size == 0:
        return out

    d = dt * (rate_b - rate_a)
    step_p = np.exp(1j * dt * rate_a)
    step_e = np.exp(1j * d)
    p = np.ones(rate_a.size, dtype=complex)
    e = np.ones(rate_a.size, dtype=complex)
    abs_d = np.abs(d)
    n_star = np.where(abs_d > 0.0, series_cut / np.maximum(abs_d, 1e-300),
                      np.inf)

    for n in range(n_times):
        if n and n % resync == 0:
            p = np.exp(1j * (n * dt) * rate_a)
            e = np.exp(1j * (n * d))
        series = n < n_star
        dn = n * d
        den = np.where(series, 1.0j, 1j * dn)
        m0 = (e - 1.0) / den
        m1 = (e * (den - 1.0) + 1.0) / (den * den)
        if series.any():
            x = 1j * dn[series]
            s0 = np.ones_like(x)
            s1 = np.full_like(x, 0.5)
            term = np.ones_like(x)
            factorial = 1.0
            for k in range(1, _SERIES_TERMS + 1):
                term = term * x
                factorial *= k
                s0 = s0 + term / (factorial * (k + 1))
                s1 = s1 + term / (factorial * (k + 2))
            m0[series] = s0
            m1[series] = s1
        w1 = p * (m0 - m1)
        w2 = p * m1
        out[:, n] = amps_a @ w1 + amps_b @ w2
        p = p * step_p
        e = e * step_e
    return out


def volterra_convolve(kernel, source, dt):
    """March the product-trapezoid rule for y = F + K * y.

    y(t) = F(t) + int_0^t K(t - s) y(s) ds on the uniform grid carrying
    kernel and source; the diagonal weight is folded into the division,
    so the caller must ensure 1 - dt K[0] / 2 != 0.
    """
    n = kernel.size
    y = np.empty(n)
    y[0] = source[0]
    denominator = 1.0 - 0.5 * dt * kernel[0]
    for m in range(1, n):
        history = 0.5 * kernel[m] * y[0] + np.dot(kernel[1:m], y[m - 1:0:-1])
        y[m] = (source[m] + dt * history) / denominator
    return y
