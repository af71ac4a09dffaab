"""Backend selection and argument validation for the hot loops.

The compiled extension hmflab._filon is preferred when importable; the
pure-numpy module hmflab._filon_py is the fallback and the reference
semantics.  BACKEND records which one is active.

Environment:
    HMFLAB_FORCE_FALLBACK   any nonempty value forces the numpy backend.
    HMFLAB_NUM_THREADS      thread count for the compiled backend;
                            defaults to the visible CPU count.
"""

import os

import numpy as np

from . import _filon_py

_impl = _filon_py
BACKEND = "python"
if not os.environ.get("HMFLAB_FORCE_FALLBACK"):
    try:
        from . import _filon as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"


def num_threads() -> int:
    """Thread count for the compiled backend, from the environment."""
    raw = os.environ.get("HMFLAB_NUM_THREADS", "")
    if raw:
        count = int(raw)
        if count < 1:
            raise ValueError("HMFLAB_NUM_THREADS must be a positive integer")
        return count
    return os.cpu_count() or 1


def filon_accumulate(rate_a, rate_b, amps_a, amps_b, dt, n_times,
                     resync=256, series_cut=0.15, n_threads=None):
    """Validate the phase-cell arrays and dispatch to the active backend.

    rate_a, rate_b: endpoint phase rates, shape (n_cells,).
    amps_a, amps_b: endpoint amplitudes times cell width, shape
    (n_families, n_cells).  Returns complex (n_families, n_times).
    """
    ra = np.ascontiguousarray(rate_a, dtype=float)
    rb = np.ascontiguousarray(rate_b, dtype=float)
    a = np.ascontiguousarray(np.atleast_2d(amps_a), dtype=float)
    b = np.ascontiguousarray(np.atleast_2d(amps_b), dtype=float)
    if ra.ndim != 1 or rb.shape != ra.shape:
        raise ValueError("phase rates must be matching 1-D arrays")
    if a.shape != b.shape or a.shape[1] != ra.size:
        raise ValueError(
            f"amplitude arrays must be (n_families, {ra.size}), got "
            f"{a.shape} and {b.shape}"
        )
    if dt <= 0 or n_times < 1:
        raise ValueError("need dt > 0 and n_times >= 1")
    if resync < 1:
        raise ValueError("resync interval must be >= 1")
    threads = num_threads() if n_threads is None else int(n_threads)
    return _impl.filon_accumulate(ra, rb, a, b, float(dt), int(n_times),
                                  int(resync), float(series_cut), threads)


def volterra_convolve(kernel, source, dt):
    """Validate the marching inputs and dispatch to the active backend."""
    k_arr = np.ascontiguousarray(kernel, dtype=float)
    f_arr = np.ascontiguousarray(source, dtype=float)
    if k_arr.ndim != 1 or k_arr.shape != f_arr.shape:
        raise ValueError("kernel and source must be matching 1-D arrays")
    if k_arr.size == 0:
        raise ValueError("need at least one grid point")
    if dt <= 0:
        raise ValueError("need dt > 0")
    if 1.0 - 0.5 * dt * k_arr[0] == 0.0:
        raise ValueError("product-trapezoid weight 1 - dt K(0)/2 vanishes")
    return _impl.volterra_convolve(k_arr, f_arr, float(dt))
