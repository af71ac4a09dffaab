"""Kernels, sources, and solvers of the linearized magnetization system.

The cosine and sine magnetizations of a perturbation around a stable
stationary state satisfy Volterra equations y = F + K * y.  With the
chart sum Sigma_* (eye once, both rotation charts) and da = dh/omega,
the cosine-channel companions are

    Q_C(t) = Sigma_* Sigma_{l != 0} int G'(h) |C_l|^2 e^{i t l omega} da,
    K_C = dQ_C/dt,

with the angle-average part Q_0 = Sigma_* int G' C_0^2 da kept separate;
the sine channel carries |S_l|^2 with the opposite overall sign, so
Q_S(t) = -2 Sigma_* Sigma_{l>0} int G' |S_l|^2 cos(t l omega) da and
K_S = dQ_S/dt.

Fourier convention: hat F(xi) = int_0^inf F(t) e^{-i t xi} dt with
Im xi <= 0 and no 2 pi prefactor.  The Penrose quantities |1 - hat K|
are evaluated in this convention throughout.

Oscillatory h-integrals run on phase cells: each grid cell splits until
the phase swing t_max * l * |Delta omega| per piece stays below a cut
(pi/4 by default), amplitudes are linear per piece, and the backend in
hmflab._accel accumulates the moments over the time grid.  hat K reuses
the same cells with the pole factor integrated in closed form per
piece, which makes hat K_C(0) = -Q_C(0) an identity of the
discretization rather than a quadrature coincidence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from . import actionangle as aa
from .actionangle import Chart, SpectralTable

_FAMILIES = ("q_c", "k_c", "q_s", "k_s")
_DEFAULT_THETA_CUT = np.pi / 4.0
_DEFAULT_AMP_CUT = 1e-17
_HAT_REFINEMENT = 200.0


class TruncationError(ValueError):
    """Spectral table truncation certificate fails for the kernel sums."""


class StabilityError(RuntimeError):
    """Product-trapezoid step denominator too close to singular."""


class ResonanceError(RuntimeError):
    """Real-axis hat-kernel evaluation lands on a grid resonance."""

    def __init__(self, xi, ell, h_lo, h_hi):
        self.xi = xi
        self.ell = int(ell)
        self.h_lo = float(h_lo)
        self.h_hi = float(h_hi)
        super().__init__(
            f"xi={xi} within resonance tolerance of l*omega for l={ell} "
            f"on the energy cell [{h_lo!r}, {h_hi!r}]"
        )


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_n = n dt covering [0, t_final]."""

    dt: float
    t_final: float
    max_nodes: int = 4_000_001

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("t_final must be an integer multiple of dt")
        if round(steps) + 1 > self.max_nodes:
            raise ValueError(
                f"grid would carry {round(steps) + 1} nodes, above the "
                f"configured maximum {self.max_nodes}"
            )
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")

    @property
    def n_nodes(self) -> int:
        return int(round(self.t_final / self.dt)) + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.dt


@dataclass(frozen=True)
class KernelSeries:
    """Volterra kernels K_C, K_S with their companions Q_C, Q_S.

    q0 is the subtracted angle-average constant Sigma_* int G' C_0^2 da.
    """

    grid: TimeGrid
    k_c: np.ndarray
    k_s: np.ndarray
    q_c: np.ndarray
    q_s: np.ndarray
    q0: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class VolterraSolution:
    """Solution y of y = F + K * y with per-step residuals."""

    grid: TimeGrid
    y: np.ndarray
    source: np.ndarray
    residuals: np.ndarray
    resolvent: Optional[np.ndarray] = None


@dataclass(frozen=True)
class PhaseCells:
    """Linear-phase, linear-amplitude pieces of the chart h-integrals.

    Families are ordered as _FAMILIES with amplitudes already multiplied
    by piece width and chart multiplicity; rate arrays hold l omega at
    the piece ends.  ell and the h window identify pieces in error
    reports.
    """

    m0: float
    t_max: float
    rate_a: np.ndarray
    rate_b: np.ndarray
    amps_a: np.ndarray
    amps_b: np.ndarray
    ell: np.ndarray
    h_a: np.ndarray
    h_b: np.ndarray
    n_parent: int
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PenroseConfig:
    """Scan layout for the Penrose criterion.

    gamma_max None lets the scan choose the certified outer radius B
    with |1 - hat K| > 1/2 for |xi| > B; tau nodes are geometric in
    [tau_offset, tau_max] (as Im xi = -tau), always including
    2 tau_offset so the tau -> 0^- limit can be extrapolated linearly.
    After the uniform pass each channel zooms zoom_rounds times into a
    one-spacing window around its running minimum, so sharp dispersion
    minima are located even when the certified radius is large.
    """

    gamma_max: Optional[float] = None
    n_gamma: int = 61
    tau_max: float = 1.0
    n_tau: int = 7
    tau_offset: float = 1e-3
    t_refine: float = 100.0
    resonance_tol: float = 1e-6
    zoom_rounds: int = 2

    def __post_init__(self):
        if self.n_gamma < 3 or self.n_tau < 2:
            raise ValueError("scan needs at least 3 gamma and 2 tau nodes")
        if not 0 < self.tau_offset < self.tau_max:
            raise ValueError("need 0 < tau_offset < tau_max")
        if self.zoom_rounds < 0:
            raise ValueError("zoom_rounds must be nonnegative")


@dataclass(frozen=True)
class PenroseScan:
    """|1 - hat K| over the lower-half scan window with certificates."""

    gamma: np.ndarray
    tau: np.ndarray
    abs_one_minus_kc: np.ndarray
    abs_one_minus_ks: np.ndarray
    min_kc: float
    min_ks: float
    argmin_kc: complex
    argmin_ks: complex
    kappa: float
    limit_min_kc: float
    limit_min_ks: float
    one_minus_kc0: float
    one_minus_ks0: float
    outer_radius: float
    outer_radius_required: float
    outer_bound_certified: bool
    resonances: tuple
    passed: bool


def _check_state_matches(state, table: SpectralTable) -> None:
    m0 = float(state.M0)
    if abs(table.m0 - m0) > 1e-9 * max(1.0, abs(m0)):
        raise ValueError(
            f"table magnetization {table.m0!r} does not match state M0 {m0!r}"
        )


def _check_truncation(table: SpectralTable, tol=None) -> None:
    tol = table.config.parseval_tol if tol is None else float(tol)
    for chart, data in table.charts.items():
        tail = aa.truncation_tail(chart, data.h, table.m0, table.config.l_max)
        worst = float(np.max(tail))
        if worst > tol:
            raise TruncationError(
                f"coefficient tail {worst:.3e} above tolerance {tol:.3e} on "
                f"{chart.name}; raise l_max"
            )


def _split_for_harmonic(h, omega, ell, t_max, keep, theta_cut):
    """Subdivide kept cells until t_max * l * |Delta omega| < theta_cut.

    Returns refined nodes with piece index arrays (left, right) and the
    parent-cell index of each piece.
    """
    kept = np.nonzero(keep)[0]
    if kept.size == 0:
        empty = np.empty(0, dtype=int)
        return np.empty(0), empty, empty, empty
    swings = t_max * ell * np.abs(np.diff(omega)) / theta_cut
    counts = np.maximum(1, np.ceil(swings[kept]).astype(int))
    chunks = [
        np.linspace(h[j], h[j + 1], counts[i] + 1)
        for i, j in enumerate(kept)
    ]
    nodes = np.concatenate(chunks)
    offsets = np.concatenate([[0], np.cumsum(counts + 1)])
    index = np.arange(nodes.size)
    last = np.zeros(nodes.size, dtype=bool)
    last[offsets[1:] - 1] = True
    left = index[~last]
    right = left + 1
    parent = np.repeat(kept, counts)
    return nodes, left, right, parent


def phase_cells(state, table: SpectralTable, t_max: float,
                theta_cut: float = _DEFAULT_THETA_CUT,
                amp_cut: float = _DEFAULT_AMP_CUT,
                truncation_tol=None) -> PhaseCells:
    """Build the kernel-family phase cells from the tabulated rows.

    Phase rates l omega are re-evaluated exactly at the refined nodes;
    amplitudes interpolate the parent-node family values linearly, which
    keeps every t = 0 sum identical to the parent-grid trapezoid rule
    (and hence to the equilibria stability functionals).  (l, cell)
    pairs whose G'-weighted row amplitude falls below amp_cut relative
    to the chart maximum are dropped.
    """
    _check_state_matches(state, table)
    _check_truncation(table, truncation_tol)
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    m0 = table.m0
    config = table.config
    g_prime = state.profile.g_prime

    rate_a, rate_b = [], []
    amps_a, amps_b = [[] for _ in _FAMILIES], [[] for _ in _FAMILIES]
    ells, h_lo, h_hi = [], [], []
    n_parent = 0
    per_chart = {}
    for chart, mult in ((Chart.EYE, 1.0), (Chart.OUTER_UPPER, 2.0)):
        data = table[chart]
        gp_grid = np.asarray(g_prime(data.h), dtype=float)
        gp_abs = np.abs(gp_grid)
        row_energy = np.sum(data.cos_rows ** 2, axis=0) + np.sum(
            data.sin_rows ** 2, axis=0)
        reference = float(np.max(gp_abs * row_energy))
        chart_pieces = 0
        for ell in range(1, config.l_max + 1):
            cos_sq = data.cos_rows[ell] ** 2
            sin_sq = data.sin_rows[ell] ** 2
            cell_amp = np.maximum(
                np.maximum((gp_abs * cos_sq)[:-1], (gp_abs * cos_sq)[1:]),
                np.maximum((gp_abs * sin_sq)[:-1], (gp_abs * sin_sq)[1:]),
            )
            keep = cell_amp > amp_cut * reference
            nodes, left, right, parent = _split_for_harmonic(
                data.h, data.omega, ell, t_max, keep, theta_cut)
            if nodes.size == 0:
                continue
            n_parent += int(keep.sum())
            omega = aa.frequency(chart, nodes, m0, eps_sep=config.eps_sep)
            width = (nodes[right] - nodes[left]) * mult
            values = (gp_grid * cos_sq / data.omega,
                      ell * gp_grid * cos_sq,
                      gp_grid * sin_sq / data.omega,
                      ell * gp_grid * sin_sq)
            rate_a.append(ell * omega[left])
            rate_b.append(ell * omega[right])
            for fam, val in enumerate(values):
                fine = np.interp(nodes, data.h, val)
                amps_a[fam].append(fine[left] * width)
                amps_b[fam].append(fine[right] * width)
            ells.append(np.full(left.size, ell, dtype=int))
            h_lo.append(data.h[parent])
            h_hi.append(data.h[parent + 1])
            chart_pieces += left.size
        per_chart[chart.name] = chart_pieces

    if not rate_a:
        raise ValueError("no phase cells survive the amplitude cutoff")
    return PhaseCells(
        m0=m0,
        t_max=float(t_max),
        rate_a=np.concatenate(rate_a),
        rate_b=np.concatenate(rate_b),
        amps_a=np.vstack([np.concatenate(rows) for rows in amps_a]),
        amps_b=np.vstack([np.concatenate(rows) for rows in amps_b]),
        ell=np.concatenate(ells),
        h_a=np.concatenate(h_lo),
        h_b=np.concatenate(h_hi),
        n_parent=n_parent,
        diagnostics=per_chart,
    )


def _angle_average_constant(state, table: SpectralTable) -> float:
    total = 0.0
    for data in table.charts.values():
        gp = np.asarray(state.profile.g_prime(data.h), dtype=float)
        da = data.trapezoid_weights / data.omega
        total += float(np.sum(da * gp * data.cos_rows[0] ** 2))
    return total


def kernel_series(state, table: SpectralTable, grid: TimeGrid,
                  cells: Optional[PhaseCells] = None,
                  theta_cut: float = _DEFAULT_THETA_CUT,
                  amp_cut: float = _DEFAULT_AMP_CUT,
                  truncation_tol=None,
                  n_threads: Optional[int] = None) -> KernelSeries:
    """Assemble K_C, K_S, Q_C, Q_S on the time grid.

    The spectral sums run over the phase cells (built here unless
    passed in); K = dQ/dt is evaluated analytically through the
    l omega factors, never by differencing.
    """
    if cells is None:
        cells = phase_cells(state, table, grid.t_final, theta_cut, amp_cut,
                            truncation_tol)
    else:
        _check_state_matches(state, table)
        if cells.t_max < grid.t_final * (1.0 - 1e-12):
            raise ValueError(
                f"phase cells refined for t_max={cells.t_max} cannot serve "
                f"a grid reaching {grid.t_final}"
            )
    out = _accel.filon_accumulate(
        cells.rate_a, cells.rate_b, cells.amps_a, cells.amps_b,
        grid.dt, grid.n_nodes, n_threads=n_threads,
    )
    q_c = 2.0 * out[0].real
    k_c = -2.0 * out[1].imag
    q_s = -2.0 * out[2].real
    k_s = 2.0 * out[3].imag
    q0 = _angle_average_constant(state, table)
    diagnostics = {
        "n_pieces": int(cells.rate_a.size),
        "n_parent_pairs": int(cells.n_parent),
        "per_chart": dict(cells.diagnostics),
        "backend": _accel.BACKEND,
    }
    return KernelSeries(grid=grid, k_c=k_c, k_s=k_s, q_c=q_c, q_s=q_s,
                        q0=q0, diagnostics=diagnostics)


def interpolated_cells(table: SpectralTable, rows_sets, t_max: float,
                       theta_cut: float = _DEFAULT_THETA_CUT,
                       amp_cut: float = _DEFAULT_AMP_CUT) -> Optional[PhaseCells]:
    """Phase cells whose amplitudes interpolate given complex rows.

    rows_sets is a sequence of chart -> rows mappings (complex arrays of
    shape (l_max + 1, n_h)); each set contributes a (Re, Im) family pair
    with the da = dh/omega weight folded in.  The l = 0 rows are
    constants in time and left to the caller.  Returns None when every
    amplitude falls below the cutoff.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    reference = 0.0
    weighted = []
    for rows_map in rows_sets:
        entry = {}
        for chart, data in table.charts.items():
            amp = rows_map[chart] / data.omega
            entry[chart] = amp
            if amp.shape[0] > 1:
                reference = max(reference, float(np.max(np.abs(amp[1:]))))
        weighted.append(entry)
    if reference == 0.0:
        return None

    n_sets = len(rows_sets)
    rate_a, rate_b = [], []
    amps_a = [[] for _ in range(2 * n_sets)]
    amps_b = [[] for _ in range(2 * n_sets)]
    ells, h_lo, h_hi = [], [], []
    n_parent = 0
    per_chart = {}
    for chart, data in table.charts.items():
        chart_pieces = 0
        for ell in range(1, table.config.l_max + 1):
            cell_amp = np.zeros(data.h.size - 1)
            for entry in weighted:
                mag = np.abs(entry[chart][ell])
                cell_amp = np.maximum(cell_amp,
                                      np.maximum(mag[:-1], mag[1:]))
            keep = cell_amp > amp_cut * reference
            nodes, left, right, parent = _split_for_harmonic(
                data.h, data.omega, ell, t_max, keep, theta_cut)
            if nodes.size == 0:
                continue
            n_parent += int(keep.sum())
            omega = aa.frequency(chart, nodes, m0=table.m0,
                                 eps_sep=table.config.eps_sep)
            width = nodes[right] - nodes[left]
            rate_a.append(ell * omega[left])
            rate_b.append(ell * omega[right])
            for k, entry in enumerate(weighted):
                for fam, component in ((2 * k, entry[chart][ell].real),
                                       (2 * k + 1, entry[chart][ell].imag)):
                    fine = np.interp(nodes, data.h, component)
                    amps_a[fam].append(fine[left] * width)
                    amps_b[fam].append(fine[right] * width)
            ells.append(np.full(left.size, ell, dtype=int))
            h_lo.append(data.h[parent])
            h_hi.append(data.h[parent + 1])
            chart_pieces += left.size
        per_chart[chart.name] = chart_pieces
    if not rate_a:
        return None
    return PhaseCells(
        m0=table.m0,
        t_max=float(t_max),
        rate_a=np.concatenate(rate_a),
        rate_b=np.concatenate(rate_b),
        amps_a=np.vstack([np.concatenate(rows) for rows in amps_a]),
        amps_b=np.vstack([np.concatenate(rows) for rows in amps_b]),
        ell=np.concatenate(ells),
        h_a=np.concatenate(h_lo),
        h_b=np.concatenate(h_hi),
        n_parent=n_parent,
        diagnostics=per_chart,
    )


def actual_sin_rows(data) -> np.ndarray:
    """Signed complex sin coefficients of a chart table (l >= 0 rows)."""
    if data.chart is Chart.EYE:
        return data.sin_rows.astype(complex)
    return -1j * data.chart.sign * data.sin_rows


def source_series(state, table: SpectralTable, r0: str, grid: TimeGrid,
                  theta_cut: float = _DEFAULT_THETA_CUT,
                  amp_cut: float = _DEFAULT_AMP_CUT,
                  truncation_tol=None,
                  n_threads: Optional[int] = None):
    """Source terms F_C, F_S for the observable named r0.

    F_C(t) = Sigma_* Sigma_l int (r0)_l C_{-l} e^{i t l omega} da and
    F_S likewise with the sin coefficients.  Observable rows live on the
    table grid only, so amplitudes are interpolated linearly within each
    cell while the phase rates are re-evaluated exactly at the refined
    nodes.
    """
    _check_state_matches(state, table)
    _check_truncation(table, truncation_tol)
    constant = 0.0
    set_c, set_s = {}, {}
    for chart, data in table.charts.items():
        if r0 not in data.observables:
            raise ValueError(
                f"observable {r0!r} missing from table; available: "
                f"{sorted(data.observables)}"
            )
        rows = data.observables[r0]
        da = data.trapezoid_weights / data.omega
        constant += float(np.sum(da * rows[0].real * data.cos_rows[0]))
        # The l > 0 family carries e^{+i t l omega}, whose amplitude is
        # conj((r0)_l) times the actual coefficient.
        set_c[chart] = rows.conj() * data.cos_rows
        set_s[chart] = rows.conj() * actual_sin_rows(data)

    f_c = np.full(grid.n_nodes, constant)
    f_s = np.zeros(grid.n_nodes)
    cells = interpolated_cells(table, [set_c, set_s], grid.t_final,
                               theta_cut, amp_cut)
    if cells is not None:
        out = _accel.filon_accumulate(
            cells.rate_a, cells.rate_b, cells.amps_a, cells.amps_b,
            grid.dt, grid.n_nodes, n_threads=n_threads,
        )
        f_c += 2.0 * (out[0].real - out[1].imag)
        f_s += 2.0 * (out[2].real - out[3].imag)
    return f_c, f_s


def solve_volterra(kernel, source, grid: TimeGrid) -> VolterraSolution:
    """Product-trapezoid march for y = F + K * y on the grid."""
    kernel = np.ascontiguousarray(kernel, dtype=float)
    source = np.ascontiguousarray(source, dtype=float)
    if kernel.shape != (grid.n_nodes,) or source.shape != (grid.n_nodes,):
        raise ValueError(
            f"kernel and source must have shape ({grid.n_nodes},) to match "
            "the grid"
        )
    denominator = 1.0 - 0.5 * grid.dt * kernel[0]
    if abs(denominator) < 0.25:
        raise StabilityError(
            f"step denominator 1 - dt K(0)/2 = {denominator:.3e} too close "
            "to singular; refine dt"
        )
    y = _accel.volterra_convolve(kernel, source, grid.dt)
    residuals = y - source - convolve_trapezoid(kernel, y, grid.dt)
    scale = max(1.0, float(np.max(np.abs(y))))
    worst = float(np.max(np.abs(residuals)))
    if worst > 1e-12 * scale:
        raise StabilityError(
            f"discrete Volterra residual {worst:.3e} above 1e-12 relative"
        )
    return VolterraSolution(grid=grid, y=y, source=source,
                            residuals=residuals)


def convolve_trapezoid(a, b, dt: float) -> np.ndarray:
    """Trapezoid convolution (a * b)(t_n) = int_0^{t_n} a(t_n - s) b(s) ds."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("convolution needs matching 1-D arrays")
    n = a.size
    full = np.convolve(a, b)[:n]
    return dt * (full - 0.5 * (a * b[0] + a[0] * b))


def resolvent_kernel(kernel, grid: TimeGrid) -> np.ndarray:
    """Resolvent R with R = -K + K * R; y = F - R * F reproduces solves."""
    kernel = np.ascontiguousarray(kernel, dtype=float)
    if kernel.shape != (grid.n_nodes,):
        raise ValueError(f"kernel must have shape ({grid.n_nodes},)")
    denominator = 1.0 - 0.5 * grid.dt * kernel[0]
    if abs(denominator) < 0.25:
        raise StabilityError(
            f"step denominator 1 - dt K(0)/2 = {denominator:.3e} too close "
            "to singular; refine dt"
        )
    return _accel.volterra_convolve(kernel, -kernel, grid.dt)


def _linear_pole_integral(ca, cb, ra, rb, xi):
    """int_0^1 (ca + (cb - ca) s) / (xi - r(s)) ds with r linear.

    Closed form via the complex logarithm; pieces with small rate swing
    relative to the pole distance switch to a geometric series to avoid
    cancellation.  The integration path has constant Im(xi - r), so the
    principal branch never wraps.
    """
    delta_r = rb - ra
    delta_c = cb - ca
    u_a = xi - ra
    u_b = xi - rb
    dist = np.minimum(np.abs(u_a), np.abs(u_b))
    series = np.abs(delta_r) <= 0.05 * dist
    out = np.empty(ra.shape, dtype=complex)

    closed = ~series
    if np.any(closed):
        dr = delta_r[closed]
        log_ratio = np.log(u_a[closed]) - np.log(u_b[closed])
        out[closed] = (
            (ca[closed] + delta_c[closed] * u_a[closed] / dr) * log_ratio
            - delta_c[closed]
        ) / dr
    if np.any(series):
        x = delta_r[series] / u_a[series]
        accumulator = np.zeros(x.shape, dtype=complex)
        power = np.ones(x.shape, dtype=complex)
        for k in range(8):
            moment = ca[series] / (k + 1.0) + delta_c[series] / (k + 2.0)
            accumulator = accumulator + power * moment
            power = power * x
        out[series] = accumulator / u_a[series]
    return out


def hat_kernel(state, table: SpectralTable, xi: complex, channel: str = "cos",
               cells: Optional[PhaseCells] = None,
               resonance_tol: float = 1e-6) -> complex:
    """Spectral evaluation of hat K_C (channel "cos") or hat K_S ("sin").

    hat K_C(xi) = Sigma_* Sigma_{l != 0} int G' |C_l|^2 l omega /
    (xi - l omega) da, the sine channel with |S_l|^2 and opposite sign.
    Pairing +/- l turns the pole factor into 2 l^2 omega^2 /
    (xi^2 - l^2 omega^2), integrated in closed form on each phase cell.
    """
    xi = complex(xi)
    if xi.imag > 0:
        raise ValueError("hat kernel is defined for Im xi <= 0")
    if channel == "cos":
        family, sign = 0, 1.0
    elif channel == "sin":
        family, sign = 2, -1.0
    else:
        raise ValueError(f"unknown channel {channel!r}")
    if cells is None:
        cells = phase_cells(state, table, _HAT_REFINEMENT)
    else:
        _check_state_matches(state, table)

    ra, rb = cells.rate_a, cells.rate_b
    if xi.imag == 0.0:
        for pole in (xi.real, -xi.real):
            straddles = (ra - pole) * (rb - pole) <= 0.0
            close = np.minimum(np.abs(ra - pole), np.abs(rb - pole)) \
                < resonance_tol
            bad = straddles | close
            if np.any(bad):
                worst = int(np.argmax(bad))
                raise ResonanceError(xi, cells.ell[worst],
                                     cells.h_a[worst], cells.h_b[worst])

    ca = cells.amps_a[family].astype(complex)
    cb = cells.amps_b[family].astype(complex)
    total = -np.sum(ca + cb)
    if xi != 0:
        total += xi * np.sum(_linear_pole_integral(ca, cb, ra, rb, xi))
        total += xi * np.sum(_linear_pole_integral(ca, cb, -ra, -rb, xi))
    return sign * complex(total)


def _outer_radius_required(cells: PhaseCells) -> float:
    """Radius B with |hat K| <= 1/2 certified for |xi| > B, both channels.

    |xi^2 - (l omega)^2| >= (|xi| - a_max)^2 outside the rate range, so
    |hat K| <= c2 / (|xi| - a_max)^2 with c2 the absolute mass of the
    paired numerators.
    """
    a_max = float(np.max(np.maximum(np.abs(cells.rate_a),
                                    np.abs(cells.rate_b))))
    r_sq = np.maximum(cells.rate_a, cells.rate_b) ** 2
    certified = a_max
    for fam in (0, 2):
        mass = np.abs(cells.amps_a[fam]) + np.abs(cells.amps_b[fam])
        c2 = float(np.sum(mass * r_sq))
        certified = max(certified, a_max + np.sqrt(2.0 * c2))
    return certified


def penrose_scan(state, table: SpectralTable,
                 config: Optional[PenroseConfig] = None,
                 cells: Optional[PhaseCells] = None) -> PenroseScan:
    """Minimize |1 - hat K_C| and |1 - hat K_S| over the scan window.

    The window is gamma in [-B, B], Im xi in [-tau_max, -tau_offset];
    the tau -> 0^- boundary values are linearly extrapolated from the
    two smallest offsets.  PASS requires both grid minima positive and
    the certified outer radius covered.
    """
    config = config or PenroseConfig()
    if cells is None:
        cells = phase_cells(state, table, config.t_refine)
    else:
        _check_state_matches(state, table)

    required = _outer_radius_required(cells)
    radius = config.gamma_max if config.gamma_max is not None else required
    gamma = np.linspace(-radius, radius, config.n_gamma)
    tau_levels = np.unique(np.concatenate([
        np.geomspace(config.tau_offset, config.tau_max, config.n_tau),
        [2.0 * config.tau_offset],
    ]))
    tau = -tau_levels[::-1]
    resonances = []

    def evaluate(channel, gammas):
        out = np.full((tau.size, gammas.size), np.nan)
        for i, tv in enumerate(tau):
            for j, gv in enumerate(gammas):
                try:
                    hat = hat_kernel(state, table, complex(gv, tv), channel,
                                     cells=cells,
                                     resonance_tol=config.resonance_tol)
                except ResonanceError as err:
                    resonances.append(err)
                    continue
                out[i, j] = abs(1.0 - hat)
        return out

    def refine(channel, base_values):
        flat = np.nanargmin(base_values)
        i, j = np.unravel_index(flat, base_values.shape)
        best = float(base_values[i, j])
        at = complex(gamma[j], tau[i])
        spacing = gamma[1] - gamma[0]
        for _ in range(config.zoom_rounds):
            local = np.linspace(at.real - spacing, at.real + spacing,
                                config.n_gamma)
            zoomed = evaluate(channel, local)
            flat = np.nanargmin(zoomed)
            i, j = np.unravel_index(flat, zoomed.shape)
            if zoomed[i, j] < best:
                best = float(zoomed[i, j])
                at = complex(local[j], tau[i])
            spacing = 2.0 * spacing / (config.n_gamma - 1)
        return best, at

    values = {ch: evaluate(ch, gamma) for ch in ("cos", "sin")}
    min_kc, argmin_kc = refine("cos", values["cos"])
    min_ks, argmin_ks = refine("sin", values["sin"])

    # Linear tau -> 0^- extrapolation from the two smallest offsets,
    # probed on the base grid and at the refined argmin.
    row1 = np.where(np.isclose(-tau, config.tau_offset))[0][0]
    row2 = np.where(np.isclose(-tau, 2.0 * config.tau_offset))[0][0]

    def limit_at(channel, argmin, base_values):
        pair = []
        for level in (config.tau_offset, 2.0 * config.tau_offset):
            hat = hat_kernel(state, table, complex(argmin.real, -level),
                             channel, cells=cells,
                             resonance_tol=config.resonance_tol)
            pair.append(abs(1.0 - hat))
        at_argmin = 2.0 * pair[0] - pair[1]
        on_base = np.min(2.0 * base_values[row1] - base_values[row2])
        return float(min(at_argmin, on_base))

    limit_min_kc = limit_at("cos", argmin_kc, values["cos"])
    limit_min_ks = limit_at("sin", argmin_ks, values["sin"])

    one_minus_kc0 = float(
        (1.0 - hat_kernel(state, table, 0.0, "cos", cells=cells)).real)
    one_minus_ks0 = float(
        (1.0 - hat_kernel(state, table, 0.0, "sin", cells=cells)).real)

    certified = bool(radius >= required * (1.0 - 1e-12))
    min_both = min(min_kc, min_ks)
    passed = bool(min_kc > 0 and min_ks > 0 and certified
                  and not np.isnan(min_both))
    return PenroseScan(
        gamma=gamma, tau=tau,
        abs_one_minus_kc=values["cos"], abs_one_minus_ks=values["sin"],
        min_kc=min_kc, min_ks=min_ks,
        argmin_kc=argmin_kc, argmin_ks=argmin_ks,
        kappa=min_both,
        limit_min_kc=limit_min_kc, limit_min_ks=limit_min_ks,
        one_minus_kc0=one_minus_kc0, one_minus_ks0=one_minus_ks0,
        outer_radius=float(radius), outer_radius_required=float(required),
        outer_bound_certified=certified,
        resonances=tuple(resonances),
        passed=passed,
    )


def scan_summary(scan: PenroseScan) -> dict:
    """JSON-ready summary of a Penrose scan."""
    at = scan.argmin_kc if scan.min_kc <= scan.min_ks else scan.argmin_ks
    return {
        "min_KC": scan.min_kc,
        "min_KS": scan.min_ks,
        "at_xi": [at.real, at.imag],
        "pass": scan.passed,
    }


def write_kernels_csv(path, series: KernelSeries) -> None:
    """CSV with header t,K_C,K_S,Q_C,Q_S and shortest-roundtrip floats."""
    times = series.grid.times
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("t,K_C,K_S,Q_C,Q_S\n")
        for n in range(times.size):
            handle.write(
                f"{float(times[n])!r},{float(series.k_c[n])!r},"
                f"{float(series.k_s[n])!r},{float(series.q_c[n])!r},"
                f"{float(series.q_s[n])!r}\n"
            )


def write_penrose_csv(path, scan: PenroseScan) -> None:
    """CSV with header re_xi,im_xi,abs_one_minus_KC,abs_one_minus_KS."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("re_xi,im_xi,abs_one_minus_KC,abs_one_minus_KS\n")
        for i, tv in enumerate(scan.tau):
            for j, gv in enumerate(scan.gamma):
                handle.write(
                    f"{float(gv)!r},{float(tv)!r},"
                    f"{float(scan.abs_one_minus_kc[i, j])!r},"
                    f"{float(scan.abs_one_minus_ks[i, j])!r}\n"
                )
