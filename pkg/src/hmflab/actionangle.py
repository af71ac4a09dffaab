"""Three-chart action-angle atlas for the pendulum energy v^2/2 - M0 cos x.

The phase plane splits at the separatrix h = M0 into the eye of bounded
librations (h < M0) and two rotation charts with fixed velocity sign
(h > M0).  Each chart carries explicit Jacobi-elliptic formulas for the
frequency, the action, the angle-to-cartesian map, and the angle-Fourier
coefficients of cos x and sin x; general observables get their rows from
spectrally accurate theta quadrature.

Conventions.  The modulus is k(h) = sqrt((h + M0) / 2 M0), below 1 on
the eye; rotation formulas use the reciprocal modulus 1/k.  Angle
Fourier coefficients are f_l = (1/2pi) int f e^{-i l theta} dtheta.  On
rotation charts the tabulated sin rows store real magnitudes s_l whose
actual coefficient is -i epsilon s_l, epsilon the chart's velocity sign;
everywhere else the tabulated values are the coefficients themselves.
The action is the enclosed phase-plane area divided by 2 pi, so
da = dh / omega holds on every chart.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import elliptic as el

DEFAULT_EPS_SEP = 1e-6
# Below this separatrix cutoff the modulus enters the logarithmic
# asymptotic regime of K and the charts become ill-conditioned.
_EPS_SEP_FLOOR = 4e-8


class Chart(Enum):
    EYE = "eye"
    OUTER_UPPER = "outer_upper"
    OUTER_LOWER = "outer_lower"

    @property
    def is_outer(self) -> bool:
        return self is not Chart.EYE

    @property
    def sign(self) -> int:
        """Velocity sign epsilon of a rotation chart."""
        if self is Chart.OUTER_UPPER:
            return 1
        if self is Chart.OUTER_LOWER:
            return -1
        raise ValueError("the eye chart has no global velocity sign")


class SeparatrixError(ValueError):
    """Raised for energies inside the excluded separatrix layer."""

    def __init__(self, gap: float, cutoff: float):
        self.gap = gap
        self.cutoff = cutoff
        super().__init__(
            f"energy within {gap:.3e} of the separatrix (cutoff {cutoff:.3e})"
        )


@dataclass(frozen=True)
class PhasePoint:
    """Point on the phase cylinder, position wrapped to (-pi, pi]."""

    x: float
    v: float

    def __post_init__(self):
        wrapped = np.pi - (np.pi - float(self.x)) % (2.0 * np.pi)
        object.__setattr__(self, "x", wrapped)
        object.__setattr__(self, "v", float(self.v))

    def energy(self, m0: float) -> float:
        return 0.5 * self.v * self.v - m0 * np.cos(self.x)


@dataclass(frozen=True)
class ChartCoordinates:
    chart: Chart
    h: float
    theta: float
    a: float
    k: float


@dataclass(frozen=True)
class ObservableMetadata:
    """Regularity bookkeeping for an observable f(x, v).

    flatness_order: largest p such that all derivatives of order 1..p of
    f vanish at the origin; velocity_decay: exponent mu with
    |f| <= c/(1+|v|)^mu; smoothness: available derivative budget.
    """

    flatness_order: int = 0
    velocity_decay: float = np.inf
    smoothness: float = np.inf

    def __post_init__(self):
        if self.flatness_order < 0:
            raise ValueError("flatness_order must be >= 0")
        if self.velocity_decay <= 2:
            raise ValueError("velocity_decay must exceed 2 for integrability")


def modulus(h, m0: float):
    """Pendulum modulus k(h) = sqrt((h + M0) / 2 M0)."""
    return np.sqrt((np.asarray(h, dtype=float) + m0) / (2.0 * m0))


def _check_interior(chart: Chart, h, m0: float, eps_sep: float) -> None:
    h = np.asarray(h, dtype=float)
    if chart is Chart.EYE:
        if np.any(h < -m0) or np.any(h >= m0):
            raise ValueError("eye chart requires -M0 <= h < M0")
    elif np.any(h <= m0):
        raise ValueError("rotation charts require h > M0")
    gap = float(np.min(np.abs(h - m0)))
    # The graded grids end exactly at the cutoff, and forming h as
    # M0 - eps*M0 rounds at ulp(M0), which is of order 1e-10 relative
    # to the gap itself; admit the boundary within that rounding.
    if gap < eps_sep * m0 * (1.0 - 1e-9):
        raise SeparatrixError(gap, eps_sep * m0)


def classify(pt: PhasePoint, m0: float, eps_sep: float = DEFAULT_EPS_SEP):
    """Assign a phase point to its chart; returns (chart, h)."""
    if m0 <= 0:
        raise ValueError("M0 must be positive")
    h = pt.energy(m0)
    if abs(h - m0) <= eps_sep * m0:
        raise SeparatrixError(abs(h - m0), eps_sep * m0)
    if h < m0:
        return Chart.EYE, h
    return (Chart.OUTER_UPPER if pt.v > 0 else Chart.OUTER_LOWER), h


def frequency(chart: Chart, h, m0: float, eps_sep: float = DEFAULT_EPS_SEP):
    """Orbit frequency omega_*(h); vectorized over h.

    Eye: omega = pi sqrt(M0) / (2 K(k)); rotation: omega = pi k sqrt(M0)
    / K(1/k).  Decreasing on the eye from sqrt(M0), increasing on the
    rotation charts, vanishing logarithmically at the separatrix.
    """
    _check_interior(chart, h, m0, eps_sep)
    k = modulus(h, m0)
    if chart is Chart.EYE:
        return np.pi * np.sqrt(m0) / (2.0 * el.complete_elliptic_k(k))
    return np.pi * k * np.sqrt(m0) / el.complete_elliptic_k(1.0 / k)


def action(chart: Chart, h, m0: float, eps_sep: float = DEFAULT_EPS_SEP):
    """Action a_*(h), the enclosed area over 2 pi; vectorized over h.

    Eye: a = (8 sqrt(M0)/pi)(E(k) - (1 - k^2) K(k)); rotation:
    a = (4/pi) k sqrt(M0) E(1/k).  Strictly increasing with
    da/dh = 1/omega.
    """
    _check_interior(chart, h, m0, eps_sep)
    k = modulus(h, m0)
    sm = np.sqrt(m0)
    if chart is Chart.EYE:
        bigk = el.complete_elliptic_k(k)
        bige = el.complete_elliptic_e(k)
        return (8.0 * sm / np.pi) * (bige - (1.0 - k * k) * bigk)
    return (4.0 / np.pi) * k * sm * el.complete_elliptic_e(1.0 / k)


def chart_coordinates(
    chart: Chart, h: float, theta: float, m0: float,
    eps_sep: float = DEFAULT_EPS_SEP,
) -> ChartCoordinates:
    """Validated coordinate bundle with derived action and modulus."""
    if not -np.pi < theta <= np.pi:
        raise ValueError("theta must lie in (-pi, pi]")
    if chart is Chart.EYE and h == -m0:
        return ChartCoordinates(chart, float(h), float(theta), 0.0, 0.0)
    a = float(action(chart, h, m0, eps_sep))
    return ChartCoordinates(chart, float(h), float(theta), a, float(modulus(h, m0)))


def _arcsin_stable(w, one_minus_abs):
    """arcsin with turning-point series; one_minus_abs = 1 - |w| given
    in cancellation-free form by the caller.

    Within 1e-4 of the endpoints uses arcsin(w) = sign(w)(pi/2 -
    sqrt(2e)(1 + e/12 + 3e^2/160 + 15e^3/896)), e = 1 - |w|; the naive
    route loses half the digits there through 1 - w^2.
    """
    w = np.asarray(w, dtype=float)
    e = np.maximum(np.asarray(one_minus_abs, dtype=float), 0.0)
    series = np.pi / 2 - np.sqrt(2.0 * e) * (
        1.0 + e / 12.0 + 3.0 * e * e / 160.0 + 15.0 * e ** 3 / 896.0
    )
    return np.where(e < 1e-4, np.sign(w) * series,
                    np.arcsin(np.clip(w, -1.0, 1.0)))


def _eye_xv(h, theta, m0: float):
    """Eye chart map on broadcastable h, theta arrays."""
    k = modulus(h, m0)
    zero = k == 0.0
    ksafe = np.where(zero, 0.5, k)
    bigk = el.complete_elliptic_k(ksafe)
    u = (2.0 / np.pi) * bigk * (np.asarray(theta, dtype=float) + np.pi / 2)
    sn, cn, dn = el.jacobi_sn_cn_dn(u, ksafe)
    w = ksafe * sn
    # 1 - |w| without cancellation: 1 - k^2 sn^2 equals dn^2 exactly.
    x = 2.0 * _arcsin_stable(w, dn * dn / (1.0 + np.abs(w)))
    v = 2.0 * ksafe * np.sqrt(m0) * cn
    if np.any(zero):
        x = np.where(zero, 0.0, x)
        v = np.where(zero, 0.0, v)
    return x, v


def _outer_xv(h, theta, m0: float, sign: int):
    """Rotation chart map on broadcastable h, theta arrays."""
    k = modulus(h, m0)
    recip = 1.0 / k
    bigk = el.complete_elliptic_k(recip)
    am = el.jacobi_am(bigk * np.asarray(theta, dtype=float) / np.pi, recip)
    sn = np.sin(am)
    dn = np.sqrt((1.0 - recip * sn) * (1.0 + recip * sn))
    return sign * 2.0 * am, sign * 2.0 * k * np.sqrt(m0) * dn


def to_cartesian(c: ChartCoordinates, m0: float,
                 eps_sep: float = DEFAULT_EPS_SEP) -> PhasePoint:
    """Angle coordinates to the phase cylinder.

    Eye: x = 2 arcsin(k sn(u, k)), v = 2 k sqrt(M0) cn(u, k) with
    u = (2K/pi)(theta + pi/2); the center h = -M0 collapses to (0, 0).
    Rotation: x = epsilon 2 am(K theta/pi, 1/k), v = epsilon 2 k
    sqrt(M0) dn(same arguments).
    """
    if not -np.pi < c.theta <= np.pi:
        raise ValueError("theta must lie in (-pi, pi]")
    if c.chart is Chart.EYE and c.h == -m0:
        return PhasePoint(0.0, 0.0)
    _check_interior(c.chart, c.h, m0, eps_sep)
    if c.chart is Chart.EYE:
        x, v = _eye_xv(c.h, c.theta, m0)
    else:
        x, v = _outer_xv(c.h, c.theta, m0, c.chart.sign)
    return PhasePoint(float(x), float(v))


def _chart_xv_grid(chart: Chart, h, theta, m0: float):
    """Chart map on the outer product grid h x theta, shape (nh, ntheta)."""
    h = np.asarray(h, dtype=float)[:, None]
    theta = np.asarray(theta, dtype=float)[None, :]
    if chart is Chart.EYE:
        return _eye_xv(h, theta, m0)
    return _outer_xv(h, theta, m0, chart.sign)


def fourier_coefficient(
    f, chart: Chart, ell: int, h: float, m0: float,
    n_theta: int = 512, tol: float = 1e-10, max_doublings: int = 5,
    eps_sep: float = DEFAULT_EPS_SEP,
) -> complex:
    """Angle-Fourier coefficient f_l(h) = (1/2pi) int f e^{-i l theta} dtheta.

    Periodic trapezoid rule on a uniform theta grid starting at 0
    (spectrally accurate for the smooth chart maps); the resolution
    doubles until the coefficient is stable to tol.
    """
    _check_interior(chart, h, m0, eps_sep)
    prev = None
    n = n_theta
    for _ in range(max_doublings + 1):
        theta = 2.0 * np.pi * np.arange(n) / n
        x, v = _chart_xv_grid(chart, [h], theta, m0)
        vals = np.asarray(f(x[0], v[0]), dtype=complex)
        coeff = complex(np.fft.fft(vals)[ell % n] / n)
        if prev is not None and abs(coeff - prev) <= tol:
            return coeff
        prev = coeff
        n *= 2
    raise RuntimeError(
        f"fourier_coefficient: theta resolution exhausted at N={n // 2}, "
        f"last change {abs(coeff - prev):.3e} above tol {tol:.1e}"
    )


def _sin_row_magnitude(chart: Chart, ell: int, h, m0: float):
    """Real sin-row table entry (see module conventions)."""
    h = np.asarray(h, dtype=float)
    if ell == 0:
        return np.zeros_like(h)
    k = modulus(h, m0)
    if chart is Chart.EYE:
        if ell % 2 == 0:
            return np.zeros_like(h)
        # The center k = 0 is a removable zero of every l >= 1 row.
        ksafe = np.where(k > 0.0, k, 0.5)
        bigk = el.complete_elliptic_k(ksafe)
        q = el.nome(ksafe)
        m = (ell + 1) // 2
        val = (-1.0) ** (m - 1) * (np.pi ** 2 / bigk ** 2) * ell * q ** (
            m - 0.5
        ) / (1.0 + q ** ell)
        return np.where(k > 0.0, val, 0.0)
    recip = 1.0 / k
    bigk = el.complete_elliptic_k(recip)
    q = el.nome(recip)
    return (2.0 * np.pi ** 2 * (k * k) / bigk ** 2) * ell * q ** ell / (
        1.0 + q ** (2 * ell)
    )


def closed_cos_coefficient(chart: Chart, ell: int, h, m0: float):
    """Closed-form cos x angle-Fourier coefficient; real on every chart.

    Eye (modulus k, its K, E, nome q): C_0 = -1 + 2E/K, odd rows vanish,
    C_{2m} = (-1)^m (2 pi^2/K^2) m q^m / (1 - q^{2m}).  Rotation
    (reciprocal modulus 1/k): C_0 = 1 - 2k^2 + 2k^2 E/K and
    C_l = (2 pi^2 k^2/K^2) l q^l / (1 - q^{2l}).  Even in l.
    """
    ell = abs(int(ell))
    h = np.asarray(h, dtype=float)
    k = modulus(h, m0)
    if chart is Chart.EYE:
        bigk = el.complete_elliptic_k(k)
        if ell == 0:
            return -1.0 + 2.0 * el.complete_elliptic_e(k) / bigk
        if ell % 2 == 1:
            return np.zeros_like(h)
        m = ell // 2
        ksafe = np.where(k > 0.0, k, 0.5)
        q = el.nome(ksafe)
        val = (-1.0) ** m * (2.0 * np.pi ** 2 / el.complete_elliptic_k(ksafe) ** 2) \
            * m * q ** m / (1.0 - q ** (2 * m))
        return np.where(k > 0.0, val, 0.0)
    recip = 1.0 / k
    bigk = el.complete_elliptic_k(recip)
    k2 = k * k
    if ell == 0:
        return 1.0 - 2.0 * k2 + 2.0 * k2 * el.complete_elliptic_e(recip) / bigk
    q = el.nome(recip)
    return (2.0 * np.pi ** 2 * k2 / bigk ** 2) * ell * q ** ell / (
        1.0 - q ** (2 * ell)
    )


def closed_sin_coefficient(chart: Chart, ell: int, h, m0: float):
    """Closed-form sin x angle-Fourier coefficient.

    Real on the eye, where even rows vanish and
    S_{2m-1} = (-1)^{m-1} (pi^2/K^2)(2m-1) q^{m-1/2} / (1 + q^{2m-1});
    purely imaginary on rotation charts, -i epsilon times the magnitude
    (2 pi^2 k^2/K^2) l q^l / (1 + q^{2l}).  S_0 = 0 everywhere and
    S_{-l} = conj(S_l).
    """
    ell = int(ell)
    mag = _sin_row_magnitude(chart, abs(ell), h, m0)
    if chart is Chart.EYE:
        return mag
    out = -1j * chart.sign * mag
    return np.conj(out) if ell < 0 else out


@dataclass(frozen=True)
class GridConfig:
    """Chart grid layout for spectral tables.

    The eye is graded as h = -M0 + 2 M0 s^2 with uniform s (square-root
    grading against the center degeneracy) up to s_match, then geometric
    refinement in M0 - h down to the separatrix cutoff; the rotation
    grid is geometric in h - M0 on both sides of h = 2 M0, truncated at
    h_max_factor * M0.
    """

    eye_n1: int = 160
    eye_n2: int = 80
    outer_n1: int = 80
    outer_n2: int = 96
    s_match: float = 0.935
    eps_sep: float = DEFAULT_EPS_SEP
    h_max_factor: float = 200.0
    n_theta: int = 512
    l_max: int = 64
    parseval_tol: float = 1e-8
    max_theta_doublings: int = 3

    @staticmethod
    def _splice(h1: np.ndarray, h2: np.ndarray, m0: float) -> np.ndarray:
        grid = np.unique(np.concatenate([h1, h2]))
        # The pieces meet at a shared node that can differ by one ulp.
        keep = np.concatenate([[True], np.diff(grid) > 1e-12 * m0])
        return grid[keep]

    def eye_grid(self, m0: float) -> np.ndarray:
        s = np.linspace(0.0, self.s_match, self.eye_n1)
        h1 = -m0 + 2.0 * m0 * s * s
        h2 = m0 - np.geomspace(
            2.0 * m0 * (1.0 - self.s_match ** 2), self.eps_sep * m0, self.eye_n2
        )
        return self._splice(h1, h2, m0)

    def outer_grid(self, m0: float) -> np.ndarray:
        h1 = m0 + np.geomspace(self.eps_sep * m0, m0, self.outer_n1)
        h2 = m0 + np.geomspace(m0, (self.h_max_factor - 1.0) * m0, self.outer_n2)
        return self._splice(h1, h2, m0)

    def with_velocity_decay(self, mu: float, tail_tol: float = 1e-8) -> "GridConfig":
        """Raise the outer truncation until the velocity tail of an
        observable with decay exponent mu is below tail_tol.

        The tail of int |f|^2 da beyond h_max scales as
        h_max^(1/2 - mu) / (mu - 1/2) for |f| ~ v^(-mu), v = sqrt(2h).
        """
        if mu <= 2:
            raise ValueError("velocity decay must exceed 2")
        factor = (tail_tol * (mu - 0.5)) ** (1.0 / (0.5 - mu))
        return replace(self, h_max_factor=max(self.h_max_factor, factor))


@dataclass
class ChartTable:
    """Per-chart spectral data on the h grid.

    cos_rows and sin_rows hold the closed-form real tables (rotation sin
    rows are magnitudes with coefficient -i epsilon times them);
    observables maps names to complex theta-FFT rows, shape (L+1, nh).
    """

    chart: Chart
    h: np.ndarray
    omega: np.ndarray
    a: np.ndarray
    cos_rows: np.ndarray
    sin_rows: np.ndarray
    observables: dict = field(default_factory=dict)

    @property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.zeros_like(self.h)
        w[1:-1] = 0.5 * (self.h[2:] - self.h[:-2])
        w[0] = 0.5 * (self.h[1] - self.h[0])
        w[-1] = 0.5 * (self.h[-1] - self.h[-2])
        return w


@dataclass
class SpectralTable:
    m0: float
    config: GridConfig
    charts: dict
    parseval_defect: float
    n_theta_used: int
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, chart: Chart) -> ChartTable:
        return self.charts[chart]


def truncation_tail(chart: Chart, h, m0: float, lmax: int):
    """Per-node bound on the dropped coefficient tail beyond lmax.

    The closed rows obey |C_l|, |S_l| <= c l r^l with r = sqrt(q) on the
    eye (the sin rows carry half-integer nome powers) and r = q on the
    rotation charts; the bound sums 2 c^2 l^2 r^{2l} over l > lmax.
    """
    h = np.asarray(h, dtype=float)
    k = modulus(h, m0)
    if chart is Chart.EYE:
        ksafe = np.where(k > 0.0, k, 0.5)
        bigk = el.complete_elliptic_k(ksafe)
        q = np.where(k > 0.0, el.nome(ksafe), 0.0)
        c = (np.pi ** 2 / bigk ** 2) / (1.0 - q)
        r = np.sqrt(q)
    else:
        recip = 1.0 / k
        bigk = el.complete_elliptic_k(recip)
        q = el.nome(recip)
        c = (2.0 * np.pi ** 2 * k * k / bigk ** 2) / (1.0 - q * q)
        r = q
    ell = np.arange(lmax + 1, lmax + 257, dtype=float)[:, None]
    return 2.0 * np.sum((c * ell * r ** ell) ** 2, axis=0)


def _build_chart(chart, m0, config, observables, maps_cache):
    """One chart's table plus its Parseval defect and theta count."""
    h = config.eye_grid(m0) if chart is Chart.EYE else config.outer_grid(m0)
    omega = frequency(chart, h, m0, config.eps_sep)
    a = action(chart, h, m0, config.eps_sep)
    lmax = config.l_max
    tail = float(np.max(truncation_tail(chart, h, m0, lmax)))
    if tail > config.parseval_tol:
        raise ValueError(
            f"coefficient tail {tail:.3e} beyond L_max={lmax} exceeds "
            f"{config.parseval_tol:.1e} on {chart.value}; raise l_max"
        )
    cos_rows = np.stack(
        [np.asarray(closed_cos_coefficient(chart, ell, h, m0)) for ell in range(lmax + 1)]
    )
    sin_rows = np.stack(
        [np.asarray(_sin_row_magnitude(chart, ell, h, m0)) for ell in range(lmax + 1)]
    )
    sum_c = cos_rows[0] ** 2 + 2.0 * np.sum(cos_rows[1:] ** 2, axis=0)
    sum_s = 2.0 * np.sum(sin_rows[1:] ** 2, axis=0)

    n = config.n_theta
    for attempt in range(config.max_theta_doublings + 1):
        key = (chart, n)
        if key in maps_cache:
            x, v = maps_cache[key]
        elif chart is Chart.OUTER_LOWER and (Chart.OUTER_UPPER, n) in maps_cache:
            xu, vu = maps_cache[(Chart.OUTER_UPPER, n)]
            x, v = -xu, -vu
        else:
            theta = 2.0 * np.pi * np.arange(n) / n
            x, v = _chart_xv_grid(chart, h, theta, m0)
        maps_cache[key] = (x, v)
        cos_x = np.cos(x)
        # Parseval against the discrete theta means (exact for smooth
        # periodic integrands at this resolution).
        mean_c2 = np.mean(cos_x * cos_x, axis=1)
        defect = float(
            max(np.max(np.abs(sum_c - mean_c2)),
                np.max(np.abs(sum_s - (1.0 - mean_c2))))
        )
        rows = {}
        resolved = True
        for name, fn in observables.items():
            spectrum = np.fft.fft(np.asarray(fn(x, v), dtype=float), axis=1) / n
            rows[name] = spectrum[:, : lmax + 1].T.copy()
            # Discrete Parseval: the energy in the dropped bins is the
            # exact truncation defect of the stored rows.
            total = np.sum(np.abs(spectrum) ** 2, axis=1)
            dropped = np.sum(np.abs(spectrum[:, lmax + 1 : n - lmax]) ** 2, axis=1)
            if np.any(dropped > config.parseval_tol * np.maximum(total, 1e-300)):
                resolved = False
        if defect <= config.parseval_tol and resolved:
            return ChartTable(chart, h, omega, a, cos_rows, sin_rows, rows), defect, n
        n *= 2
    if defect > config.parseval_tol:
        raise ValueError(
            f"Parseval defect {defect:.3e} above {config.parseval_tol:.1e} on "
            f"{chart.value}; grid too coarse for L_max={lmax}"
        )
    raise RuntimeError(
        f"observable rows unresolved on {chart.value} at N_theta={n // 2}"
    )


def build_spectral_table(
    state, observables=None, config: GridConfig | None = None, metadata=None,
) -> SpectralTable:
    """Tabulate frequencies, actions, and Fourier rows on all charts.

    state supplies the magnetization (attribute M0, or a bare float);
    observables maps names to real-valued callables f(x, v).  The theta
    resolution doubles until the per-node Parseval defect of the closed
    rows and the truncation of the observable rows both meet tolerance.
    """
    m0 = float(getattr(state, "M0", state))
    config = config or GridConfig()
    observables = observables or {}
    if metadata:
        for name, meta in metadata.items():
            if name not in observables:
                raise ValueError(f"metadata for unknown observable {name!r}")
    if config.eps_sep < _EPS_SEP_FLOOR:
        warnings.warn(
            "separatrix cutoff below the conditioning floor; the modulus "
            "enters the logarithmic regime of K",
            RuntimeWarning,
        )

    charts = {}
    defect = 0.0
    n_used = config.n_theta
    maps_cache = {}
    for chart in (Chart.EYE, Chart.OUTER_UPPER, Chart.OUTER_LOWER):
        table, chart_defect, n = _build_chart(
            chart, m0, config, observables, maps_cache
        )
        charts[chart] = table
        defect = max(defect, chart_defect)
        n_used = max(n_used, n)
    return SpectralTable(m0, config, charts, defect, n_used,
                         dict(metadata) if metadata else {})


def limit_functional(f_name: str, phi_name: str, table: SpectralTable) -> float:
    """Weak-limit pairing: sum over charts of int f_0 phi_0 da, da = dh/omega."""
    total = 0.0
    for chart_table in table.charts.values():
        rows = chart_table.observables
        for name in (f_name, phi_name):
            if name not in rows:
                raise ValueError(
                    f"observable {name!r} missing from table; available: "
                    f"{sorted(rows)}"
                )
        f0 = rows[f_name][0].real
        p0 = rows[phi_name][0].real
        total += float(
            np.sum(chart_table.trapezoid_weights * f0 * p0 / chart_table.omega)
        )
    return total


def write_chart_csv(path, table: SpectralTable, chart: Chart) -> None:
    """One chart of a spectral table as CSV: h, omega, a, then the real
    cos and sin coefficient tables Cl_0..Cl_L and Sl_1..Sl_L."""
    data = table[chart]
    lmax = data.cos_rows.shape[0] - 1
    if chart is Chart.EYE:
        parity = ("libration chart: sin rows are the real sine "
                  "coefficients, odd harmonics only")
    else:
        parity = ("rotation chart: stored sin rows are magnitudes; the "
                  f"complex coefficient is -i*({data.chart.sign:+d})*value")
    header = (",".join(["h", "omega", "a"]
                       + [f"Cl_{l}" for l in range(lmax + 1)]
                       + [f"Sl_{l}" for l in range(1, lmax + 1)]))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"# chart {chart.name.lower()}, M0 = {table.m0!r}; "
                     f"{parity}\n")
        handle.write(header + "\n")
        for j in range(data.h.size):
            cells = [repr(float(data.h[j])), repr(float(data.omega[j])),
                     repr(float(data.a[j]))]
            cells += [repr(float(data.cos_rows[l, j]))
                      for l in range(lmax + 1)]
            cells += [repr(float(data.sin_rows[l, j]))
                      for l in range(1, lmax + 1)]
            handle.write(",".join(cells) + "\n")
