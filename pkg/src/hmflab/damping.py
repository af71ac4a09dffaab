"""Algebraic decay of the linear response and its scattering limit.

Pairings of transported observables against test functions decay
algebraically because the pendulum frequency varies across the phase
portrait and stationary-phase cancellation sets in; observables that
are flatter at the origin of phase space decay faster.  The
magnetization deflections C(t), S(t) inherit those rates through the
Volterra system of :mod:`hmflab.volterra` once the stationary state
passes the spectral scan and the angle average of the perturbation
carries no cosine component; a fixed bump supported inside the
trapped-orbit region absorbs that component.  The perturbation
composed with the free flow then converges to a scattering profile
g_inf, reconstructed here row by row from the solved deflections, and
the endpoint-singular integral int_0^X u^{-1/2} e^{itu} du exhibits
the square-root time decay that caps the kernel envelopes.

Row conventions follow :mod:`hmflab.actionangle`: an observable f on a
chart is f(theta, h) = sum_l rows_l(h) e^{+i l theta} with rows from
the forward FFT over theta, so composition with the flow multiplies
rows_l by e^{+i l omega t} and the real pairing (1/2pi) iint f g is
sum_l int conj(f_l) g_l da.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from . import volterra as vt
from .actionangle import SpectralTable


class ProjectionError(RuntimeError):
    """Raised when the projection direction cannot absorb the defect."""


_DEFAULT_WINDOWS = {
    "C": (20.0, 200.0),
    "S": (20.0, 200.0),
    "FC": (20.0, 200.0),
    "FS": (20.0, 200.0),
}

# Fitted channel envelopes below this fraction of the perturbation
# amplitude are rounding residue, not decay data.
_SERIES_FLOOR = 1e-11


@dataclass(frozen=True)
class DampingReport:
    """Solved deflections with fitted envelope rates.

    slopes maps channel names C, S, FC, FS to (slope, halfwidth) pairs
    from the log-log envelope fit, or None when the channel stays at
    rounding level; targets maps the same names to (target, band).
    """

    grid: vt.TimeGrid
    c: np.ndarray
    s: np.ndarray
    f_c: np.ndarray
    f_s: np.ndarray
    p: int
    slopes: dict
    targets: dict
    windows: dict
    ortho_defect_before: float
    ortho_defect_after: float
    penrose_ref: dict
    rows_name: str
    series_floor: float
    passed: bool


@dataclass(frozen=True)
class ScatteringResult:
    """Scattering profile of the transported perturbation.

    g_inf maps charts to real (n_h, n_theta) fields, g_inf_rows to the
    underlying complex rows, and r_inf to the h-profile of the angle
    average (identical to the angle average of the initial rows, since
    the l = 0 row is a conserved quantity of the reconstruction).
    surrogate holds the discrete L1 distance between the transported
    perturbation and g_inf at sample_times.
    """

    theta: np.ndarray
    g_inf: dict
    g_inf_rows: dict
    r_inf: dict
    sample_times: np.ndarray
    surrogate: np.ndarray
    rate: Optional[tuple]
    theta_variance: float
    diagnostics: dict = field(default_factory=dict)


def _named_rows(table: SpectralTable, rows):
    """Yield (chart, chart_table, rows_array) for a name or mapping."""
    for chart, data in table.charts.items():
        if isinstance(rows, str):
            if rows not in data.observables:
                raise ValueError(
                    f"observable {rows!r} missing from table; available: "
                    f"{sorted(data.observables)}"
                )
            yield chart, data, data.observables[rows]
        else:
            yield chart, data, np.asarray(rows[chart])


def register_rows(table: SpectralTable, name: str, rows) -> None:
    """Install chart rows as a named observable on the table."""
    storage = {}
    for chart, data in table.charts.items():
        arr = np.asarray(rows[chart], dtype=complex)
        expected = (table.config.l_max + 1, data.h.size)
        if arr.shape != expected:
            raise ValueError(
                f"rows for {chart.name} have shape {arr.shape}; expected "
                f"{expected}"
            )
        storage[chart] = arr
    for chart, data in table.charts.items():
        data.observables[name] = storage[chart]


def projection_weight(h, m0: float) -> np.ndarray:
    """Fixed bump direction in h, supported inside the trapped region."""
    s = (np.asarray(h, dtype=float) + 0.5 * m0) / (0.4 * m0)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def orthogonality_defect(table: SpectralTable, rows) -> float:
    """Pairing of the angle average of rows with the C_0 row."""
    total = 0.0
    for _, data, r in _named_rows(table, rows):
        da = data.trapezoid_weights / data.omega
        total += float(np.sum(da * r[0].real * data.cos_rows[0]))
    return total


def orthogonal_projection(rows, table: SpectralTable, state=None,
                          direction=None) -> dict:
    """Remove the cosine component of the angle average of rows.

    Subtracts c times the fixed bump from the l = 0 row so the adjusted
    rows pair to zero with C_0; rows for l >= 1 are untouched.  Returns
    a chart -> rows mapping.  Rows that already pair to exactly zero
    come back unchanged (c = 0).
    """
    if state is not None:
        vt._check_state_matches(state, table)
    if direction is None:
        def direction(h):
            return projection_weight(h, table.m0)
    defect = 0.0
    overlap = 0.0
    scale = 0.0
    weights = {}
    for chart, data, r in _named_rows(table, rows):
        w = np.asarray(direction(data.h), dtype=float)
        weights[chart] = w
        da = data.trapezoid_weights / data.omega
        defect += float(np.sum(da * r[0].real * data.cos_rows[0]))
        overlap += float(np.sum(da * w * data.cos_rows[0]))
        scale += float(np.sum(da * np.abs(w) * np.abs(data.cos_rows[0])))
    if scale == 0.0 or abs(overlap) < 1e-10 * scale:
        raise ProjectionError(
            f"projection direction pairs to {overlap:.3e} with the cosine "
            "row and cannot absorb the defect"
        )
    c = defect / overlap
    adjusted = {}
    for chart, data, r in _named_rows(table, rows):
        out = np.array(r, dtype=complex)
        if c != 0.0:
            out[0] = out[0] - c * weights[chart]
        adjusted[chart] = out
    return adjusted


def dispersion_pairing(f: str, phi: str, table: SpectralTable, t,
                       theta_cut: float = vt._DEFAULT_THETA_CUT,
                       amp_cut: float = vt._DEFAULT_AMP_CUT,
                       truncation_tol=None,
                       n_threads: Optional[int] = None):
    """Weak pairing of the transported observable f against phi.

    Returns sum over charts of sum_l int conj(f_l) phi_l e^{i t l
    omega} da, the pairing (1/2pi) iint f (phi o psi_t) dx dv.  t may
    be a scalar, a 1-D array, or a TimeGrid (uniform fast path).
    """
    vt._check_truncation(table, truncation_tol)
    constant = 0.0
    rows_set = {}
    for chart, data in table.charts.items():
        for name in (f, phi):
            if name not in data.observables:
                raise ValueError(
                    f"observable {name!r} missing from table; available: "
                    f"{sorted(data.observables)}"
                )
        f_rows = data.observables[f]
        p_rows = data.observables[phi]
        da = data.trapezoid_weights / data.omega
        constant += float(np.sum(da * (f_rows[0].conj() * p_rows[0]).real))
        rows_set[chart] = f_rows.conj() * p_rows

    if isinstance(t, vt.TimeGrid):
        cells = vt.interpolated_cells(table, [rows_set], t.t_final,
                                      theta_cut, amp_cut)
        values = np.full(t.n_nodes, constant)
        if cells is not None:
            out = _accel.filon_accumulate(
                cells.rate_a, cells.rate_b, cells.amps_a, cells.amps_b,
                t.dt, t.n_nodes, n_threads=n_threads,
            )
            values += 2.0 * (out[0].real - out[1].imag)
        return values

    times = np.atleast_1d(np.asarray(t, dtype=float))
    if times.ndim != 1:
        raise ValueError("t must be a scalar, a 1-D array, or a TimeGrid")
    if np.any(times < 0.0):
        raise ValueError("pairing times must be nonnegative")
    t_max = max(float(times.max(initial=0.0)), 1.0)
    cells = vt.interpolated_cells(table, [rows_set], t_max,
                                  theta_cut, amp_cut)
    values = np.full(times.shape, constant)
    if cells is not None:
        for k, tk in enumerate(times):
            out = _accel.filon_accumulate(
                cells.rate_a, cells.rate_b, cells.amps_a, cells.amps_b,
                float(tk) if tk > 0.0 else 1.0, 2, n_threads=n_threads,
            )[:, 1 if tk > 0.0 else 0]
            values[k] += 2.0 * (out[0].real - out[1].imag)
    if np.ndim(t) == 0:
        return float(values[0])
    return values


def fit_algebraic_rate(times, values, window) -> tuple:
    """Least-squares slope of log|values| against log t on a window.

    Returns (slope, halfwidth) where halfwidth estimates a two-sigma
    confidence interval from the residual variance.  Raises ValueError
    when the window holds fewer than three samples or touches
    nonpositive values; widen the window past zero crossings instead.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = float(window[0]), float(window[1])
    if not 0.0 < lo < hi:
        raise ValueError("fit window must satisfy 0 < lo < hi")
    mask = (times >= lo) & (times <= hi)
    if int(mask.sum()) < 3:
        raise ValueError(
            f"fit window [{lo}, {hi}] holds fewer than three samples"
        )
    y = values[mask]
    if np.any(y <= 0.0):
        raise ValueError(
            "series is not strictly positive on the fit window; widen the "
            "window past zero crossings or fit envelope maxima"
        )
    log_t = np.log(times[mask])
    log_y = np.log(y)
    design = np.column_stack([log_t, np.ones_like(log_t)])
    coef, *_ = np.linalg.lstsq(design, log_y, rcond=None)
    residual = log_y - design @ coef
    dof = log_y.size - 2
    spread = float(np.sum((log_t - log_t.mean()) ** 2))
    if dof > 0 and spread > 0.0:
        halfwidth = 2.0 * math.sqrt(float(residual @ residual) / dof / spread)
    else:
        halfwidth = 0.0
    return float(coef[0]), halfwidth


def envelope_maxima(times, values):
    """Local maxima of |values|: peak times and peak heights."""
    times = np.asarray(times, dtype=float)
    y = np.abs(np.asarray(values, dtype=float))
    if y.size < 3:
        raise ValueError("need at least three samples to find envelope peaks")
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    idx = np.nonzero(inner)[0] + 1
    return times[idx], y[idx]


def _fit_envelope_rate(times, series, window, floor: float):
    """Fitted (slope, halfwidth) of the series envelope, None if flat."""
    series = np.asarray(series, dtype=float)
    if float(np.max(np.abs(series))) <= floor:
        return None
    peak_t, peak_v = envelope_maxima(times, series)
    lo, hi = window
    inside = (peak_t >= lo) & (peak_t <= hi)
    if int(inside.sum()) >= 3:
        return fit_algebraic_rate(peak_t, peak_v, window)
    positive = np.abs(series) > 0.0
    return fit_algebraic_rate(times[positive], np.abs(series)[positive],
                              window)


def _difference_stencil(order: int, step: float) -> np.ndarray:
    weights = np.array([1.0])
    base = np.array([-0.5, 0.0, 0.5]) / step
    for _ in range(order):
        weights = np.convolve(weights, base)
    return weights


def _partial_derivative(fn, ix: int, iv: int, step: float) -> float:
    wx = _difference_stencil(ix, step)
    wv = _difference_stencil(iv, step)
    xs = (np.arange(wx.size) - ix) * step
    vs = (np.arange(wv.size) - iv) * step
    grid = np.asarray(fn(xs[:, None], vs[None, :]), dtype=float)
    return float(wx @ grid @ wv)


def verify_flatness(fn, p: int, step: float = 0.02,
                    tol: float = 1e-6) -> None:
    """Check that fn(x, v) has vanishing derivatives through order p.

    All mixed partial derivatives of total order 1..p at the origin are
    estimated by Richardson-extrapolated central differences; fn must
    broadcast over arrays.  Raises ValueError on the first derivative
    above tol.
    """
    if p < 0:
        raise ValueError("flatness order must be nonnegative")
    for order in range(1, p + 1):
        for ix in range(order + 1):
            iv = order - ix
            coarse = _partial_derivative(fn, ix, iv, step)
            fine = _partial_derivative(fn, ix, iv, 0.5 * step)
            value = (4.0 * fine - coarse) / 3.0
            if abs(value) > tol:
                raise ValueError(
                    f"declared flatness p = {p} fails: the order "
                    f"({ix}, {iv}) derivative at the origin is {value:.3e}"
                )


def linear_damping_run(state, table: SpectralTable, r0: str,
                       grid: vt.TimeGrid, p: int = 0,
                       r0_callable=None, windows=None, penrose=None,
                       kernels: Optional[vt.KernelSeries] = None,
                       amp_cut: float = vt._DEFAULT_AMP_CUT,
                       n_threads: Optional[int] = None) -> DampingReport:
    """Solve the linear response for observable r0 and fit decay rates.

    Requires a passing spectral stability scan (run on demand when
    penrose is None; a PenroseScan or a summary dict is accepted).  The
    angle average of r0 is projected orthogonal to the cosine row and
    the adjusted rows are registered on the table under
    '<r0>.orthogonal'; kernels and sources then feed the two Volterra
    channels, whose envelope slopes are fitted on the configured
    windows against |C| ~ t^{-max(3, (p+5)/2)} and |S| ~ t^{-2}.
    """
    vt._check_state_matches(state, table)
    if penrose is None:
        penrose = vt.penrose_scan(state, table)
    if isinstance(penrose, vt.PenroseScan):
        reference = vt.scan_summary(penrose)
    else:
        reference = dict(penrose)
    if not reference.get("pass", False):
        raise ValueError(
            "spectral stability scan fails; algebraic decay of the "
            "response is not guaranteed for this state"
        )
    p = int(p)
    if p < 0:
        raise ValueError("flatness order must be nonnegative")
    if r0_callable is not None and p > 0:
        verify_flatness(r0_callable, p)

    before = orthogonality_defect(table, r0)
    adjusted = orthogonal_projection(r0, table, state)
    rows_name = f"{r0}.orthogonal"
    register_rows(table, rows_name, adjusted)
    after = orthogonality_defect(table, rows_name)
    amplitude = max(
        float(np.max(np.abs(rows))) for rows in adjusted.values()
    )
    floor = _SERIES_FLOOR * amplitude

    if kernels is None:
        kernels = vt.kernel_series(state, table, grid, n_threads=n_threads)
    elif kernels.grid != grid:
        raise ValueError("kernel series was built on a different time grid")
    f_c, f_s = vt.source_series(state, table, rows_name, grid,
                                amp_cut=amp_cut, n_threads=n_threads)
    sol_c = vt.solve_volterra(kernels.k_c, f_c, grid)
    sol_s = vt.solve_volterra(kernels.k_s, f_s, grid)

    win = dict(_DEFAULT_WINDOWS)
    win.update(windows or {})
    c_target = -max(3.0, 0.5 * (p + 5.0))
    targets = {"C": (c_target, 0.5), "S": (-2.0, 0.3),
               "FC": (c_target, 0.5), "FS": (-2.0, 0.3)}
    series = {"C": sol_c.y, "S": sol_s.y, "FC": f_c, "FS": f_s}
    slopes = {}
    passed = True
    for name, values in series.items():
        fitted = _fit_envelope_rate(grid.times, values, win[name], floor)
        slopes[name] = fitted
        if name in ("C", "S") and fitted is not None:
            target, band = targets[name]
            passed = passed and abs(fitted[0] - target) <= band
    return DampingReport(
        grid=grid, c=sol_c.y, s=sol_s.y, f_c=f_c, f_s=f_s, p=p,
        slopes=slopes, targets=targets, windows=win,
        ortho_defect_before=before, ortho_defect_after=after,
        penrose_ref=reference, rows_name=rows_name,
        series_floor=floor, passed=passed,
    )


def scattering_state(state, report: DampingReport, r0: str,
                     table: SpectralTable, n_theta: int = 64,
                     n_samples: int = 40, fit_window=None,
                     amp_cut: float = 1e-13,
                     block_rows: int = 512) -> ScatteringResult:
    """Reconstruct the scattering profile from the solved deflections.

    g_inf = r0 + int_0^inf [C(s) {eta, cos X} + S(s) {eta, sin X}] o
    psi_s ds, evaluated row by row: the bracket rows are
    -i l omega G'(h) times the cos (sin) coefficient rows, the s
    integral is a cumulative trapezoid against e^{+i l omega s}, and
    the tail beyond the run horizon is extrapolated from the fitted
    envelope exponents by first-order integration by parts.  Raises
    ValueError when a channel envelope decays too slowly for an
    integrable tail.
    """
    vt._check_state_matches(state, table)
    if report.rows_name not in (r0, f"{r0}.orthogonal"):
        raise ValueError(
            f"report was run for rows {report.rows_name!r}, not {r0!r}"
        )
    grid = report.grid
    times = grid.times
    dt = grid.dt
    horizon = grid.t_final
    n = grid.n_nodes
    for channel, series in (("C", report.c), ("S", report.s)):
        if float(np.max(np.abs(series))) <= report.series_floor:
            continue
        fitted = report.slopes.get(channel)
        if fitted is None or fitted[0] > -1.2:
            got = "no fit" if fitted is None else f"slope {fitted[0]:.3f}"
            raise ValueError(
                f"channel {channel} decays too slowly for an integrable "
                f"tail ({got}); extend the run or smooth the data"
            )
    q_c = 3.0 if report.slopes["C"] is None else -report.slopes["C"][0]
    q_s = 2.0 if report.slopes["S"] is None else -report.slopes["S"][0]

    if n_samples < 4:
        raise ValueError("need at least four surrogate sample times")
    targets = np.geomspace(max(2.0 * dt, 0.5), horizon, n_samples)
    idx = np.unique(np.concatenate([
        np.rint(targets / dt).astype(int), [n - 1]
    ]))
    idx = idx[(idx >= 1) & (idx <= n - 1)]
    sample_times = times[idx]

    l_max = table.config.l_max
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    phase_theta = np.exp(1j * np.outer(np.arange(1, l_max + 1), theta))
    g_prime = state.profile.g_prime
    run_active = (float(np.max(np.abs(report.c))) > report.series_floor
                  or float(np.max(np.abs(report.s))) > report.series_floor)

    prepared = {}
    reference = 0.0
    for chart, data in table.charts.items():
        if report.rows_name not in data.observables:
            raise ValueError(
                f"observable {report.rows_name!r} missing from table"
            )
        rows0 = data.observables[report.rows_name]
        gp = np.asarray(g_prime(data.h), dtype=float)
        l_omega = np.arange(l_max + 1)[:, None] * data.omega[None, :]
        c_rows = -1j * l_omega * gp * data.cos_rows
        s_rows = -1j * l_omega * gp * vt.actual_sin_rows(data)
        strength = np.maximum(np.abs(c_rows), np.abs(s_rows)).max(axis=1)
        prepared[chart] = (data, rows0, c_rows, s_rows, strength)
        reference = max(reference, float(strength.max()))

    g_inf_rows = {}
    g_inf = {}
    r_inf = {}
    l1 = np.zeros(idx.size)
    theta_variance = 0.0
    rows_per_chart = {}
    for chart, (data, rows0, c_rows, s_rows, strength) in prepared.items():
        nh = data.h.size
        rows_inf = np.array(rows0, dtype=complex)
        keep = np.nonzero(strength > amp_cut * reference)[0]
        keep = keep[keep >= 1]
        rows_per_chart[chart.name] = int(keep.size) * nh
        if keep.size and run_active:
            rates = (keep[:, None] * data.omega[None, :]).ravel()
            c_flat = c_rows[keep].reshape(-1)
            s_flat = s_rows[keep].reshape(-1)
            j_samples = np.zeros((rates.size, idx.size), dtype=complex)
            j_inf = np.zeros(rates.size, dtype=complex)
            for start in range(0, rates.size, block_rows):
                span = slice(start, min(start + block_rows, rates.size))
                phase = np.exp(1j * np.outer(rates[span], times))
                for series, q, coeff in ((report.c, q_c, c_flat[span]),
                                         (report.s, q_s, s_flat[span])):
                    f = phase * series[None, :]
                    partial = np.cumsum(f, axis=1)
                    u_samples = dt * (partial[:, idx]
                                      - 0.5 * (series[0] + f[:, idx]))
                    u_final = dt * (partial[:, -1]
                                    - 0.5 * (series[0] + f[:, -1]))
                    tail = (-series[-1]
                            * np.exp(1j * rates[span] * horizon)
                            / (1j * rates[span] - q / horizon))
                    j_samples[span] += coeff[:, None] * u_samples
                    j_inf[span] += coeff * (u_final + tail)
            rows_inf[keep] += j_inf.reshape(keep.size, nh)
            diff = (j_inf[:, None] - j_samples).reshape(
                keep.size, nh, idx.size)
            fields = 2.0 * np.real(np.einsum(
                "lhk,lt->htk", diff, phase_theta[keep - 1]))
            da = data.trapezoid_weights / data.omega
            l1 += np.sum(np.abs(fields) * da[:, None, None],
                         axis=(0, 1)) / n_theta
        field_inf = rows_inf[0].real[:, None] + 2.0 * np.real(
            np.einsum("lh,lt->ht", rows_inf[1:], phase_theta))
        g_inf_rows[chart] = rows_inf
        g_inf[chart] = field_inf
        r_inf[chart] = rows_inf[0].real.copy()
        centered = field_inf - field_inf.mean(axis=1, keepdims=True)
        theta_variance = max(
            theta_variance, float(np.max(np.mean(centered ** 2, axis=1))))

    if fit_window is None:
        fit_window = (20.0, min(200.0, horizon))
    if float(np.max(l1)) <= report.series_floor:
        rate = None
    else:
        rate = fit_algebraic_rate(sample_times, l1, fit_window)
    return ScatteringResult(
        theta=theta, g_inf=g_inf, g_inf_rows=g_inf_rows, r_inf=r_inf,
        sample_times=sample_times, surrogate=l1, rate=rate,
        theta_variance=theta_variance,
        diagnostics={"rows": rows_per_chart, "q_c": q_c, "q_s": q_s},
    )


def half_power_oscillatory(t: float, big_x: float, n_gauss: int = 12,
                           phase_step: float = math.pi / 4.0) -> complex:
    """I(t) = int_0^X u^{-1/2} e^{itu} du by phase-blocked quadrature.

    The substitution u = w^2 / t turns the endpoint singularity into
    the smooth integral (2/sqrt(t)) int_0^{sqrt(tX)} e^{i w^2} dw,
    evaluated by Gauss-Legendre panels holding at most phase_step of
    quadratic phase each.  sqrt(t) |I(t)| stays bounded as t grows.
    """
    if big_x <= 0.0:
        raise ValueError("upper limit X must be positive")
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return complex(2.0 * math.sqrt(big_x))
    total_phase = t * big_x
    n_seg = max(1, int(math.ceil(total_phase / phase_step)))
    edges = np.sqrt(np.minimum(np.arange(n_seg + 1) * phase_step,
                               total_phase))
    nodes, weights = np.polynomial.legendre.leggauss(n_gauss)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    w = mid[:, None] + half[:, None] * nodes[None, :]
    integral = complex(np.sum((half[:, None] * weights[None, :])
                              * np.exp(1j * w * w)))
    return 2.0 / math.sqrt(t) * integral


def report_summary(report: DampingReport) -> dict:
    """JSON-ready dictionary of fitted rates, targets, and defects."""
    def pack(fitted):
        if fitted is None:
            return None
        return {"slope": fitted[0], "halfwidth": fitted[1]}
    return {
        "p": report.p,
        "slopes": {name: pack(value)
                   for name, value in report.slopes.items()},
        "targets": {name: {"target": target, "band": band}
                    for name, (target, band) in report.targets.items()},
        "windows": {name: list(window)
                    for name, window in report.windows.items()},
        "pass": report.passed,
        "penrose_ref": report.penrose_ref,
        "ortho_defect_before": report.ortho_defect_before,
        "ortho_defect_after": report.ortho_defect_after,
    }


def write_damping_csv(path, report: DampingReport) -> None:
    """CSV with header t,C,S,F_C,F_S and shortest-roundtrip floats."""
    times = report.grid.times
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("t,C,S,F_C,F_S\n")
        for k in range(times.size):
            handle.write(
                f"{float(times[k])!r},{float(report.c[k])!r},"
                f"{float(report.s[k])!r},{float(report.f_c[k])!r},"
                f"{float(report.f_s[k])!r}\n"
            )
