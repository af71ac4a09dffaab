"""Stationary states G(h0) with self-consistent magnetization.

A profile G > 0 defines a stationary state when its magnetization
M0 = C[G(v^2/2 - M0 cos x)] solves the fixed-point equation; all
x-integrals carry the normalized torus measure dx/(2 pi).  The
magnetization map has two routes: direct phase-plane quadrature for any
profile, and the Bessel closed form alpha sqrt(2 pi/beta) I_1(beta z)
for Gaussians G(y) = alpha exp(-beta y).  The linear-stability
functionals evaluate on a spectral table built for the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import elliptic as el
from .actionangle import Chart, SpectralTable


class NoPositiveRoot(RuntimeError):
    """Raised when the magnetization fixed point has no positive root."""


@dataclass(frozen=True)
class Profile:
    """Energy profile G(y) with its derivative and decay bookkeeping.

    Evaluators must accept numpy arrays.  derivative(n, y), when given,
    supplies d^n G / dy^n for n up to 10; mu is the decay exponent of
    the regularity envelope <y>^mu |G^(n)(y)| bounded.
    """

    kind: str
    g: Callable
    g_prime: Callable
    mu: float = np.inf
    derivative: Optional[Callable] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None

    @classmethod
    def gaussian(cls, alpha: float, beta: float) -> "Profile":
        """G(y) = alpha exp(-beta y) with all derivatives in closed form."""
        if alpha <= 0 or beta <= 0:
            raise ValueError("Gaussian profile requires alpha > 0 and beta > 0")
        g = lambda y: alpha * np.exp(-beta * np.asarray(y, dtype=float))
        return cls(
            kind="gaussian",
            g=g,
            g_prime=lambda y: -beta * g(y),
            derivative=lambda n, y: (-beta) ** n * g(y),
            alpha=float(alpha),
            beta=float(beta),
        )

    @classmethod
    def custom(cls, g, g_prime, mu: float, derivative=None) -> "Profile":
        if mu <= 2:
            raise ValueError("decay exponent mu must exceed 2")
        return cls(kind="custom", g=g, g_prime=g_prime, mu=mu,
                   derivative=derivative)


@dataclass(frozen=True)
class StationaryState:
    """Profile with its self-consistent magnetization."""

    profile: Profile
    M0: float
    residual: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExistenceReport:
    """The two root-existence conditions with their computed values.

    first_value = map(zeta) - zeta (positive means the map exceeds the
    identity at the bracket end); second_value = 1 - map'(0) (positive
    means the homogeneous branch sheds the trivial root transversally).
    """

    zeta: float
    first_value: float
    second_value: float

    @property
    def first(self) -> bool:
        return self.first_value > 0.0

    @property
    def second(self) -> bool:
        return self.second_value > 0.0


def _quadrature_map(profile: Profile, z: float, tol: float = 1e-12) -> float:
    """C[G] by trapezoid quadrature, doubling span and resolution."""
    nx = 256
    x = 2.0 * np.pi * np.arange(nx) / nx
    cos_x = np.cos(x)

    def evaluate(v_max: float, nv: int) -> float:
        v = np.linspace(-v_max, v_max, nv)
        y = 0.5 * v[:, None] ** 2 - z * cos_x[None, :]
        rows = profile.g(y) * cos_x[None, :]
        dv = v[1] - v[0]
        v_int = (np.sum(rows, axis=0) - 0.5 * (rows[0] + rows[-1])) * dv
        return float(np.mean(v_int))

    v_max, nv = 8.0, 513
    value = evaluate(v_max, nv)
    for _ in range(24):
        if nv > 4_194_305:
            break
        wider = evaluate(2.0 * v_max, 2 * nv - 1)
        finer = evaluate(v_max, 2 * nv - 1)
        scale = max(1.0, abs(value))
        if abs(wider - value) <= tol * scale and abs(finer - value) <= tol * scale:
            return value
        if abs(wider - value) > abs(finer - value):
            v_max *= 2.0
        nv = 2 * nv - 1
        value = evaluate(v_max, nv)
    raise RuntimeError(
        f"magnetization quadrature did not stabilize at v_max={v_max}, nv={nv}"
    )


def magnetization_map(profile: Profile, z: float, route: str = "auto") -> float:
    """C[G(v^2/2 - z cos x)], the magnetization produced by potential z.

    route: "quadrature" integrates the phase plane directly; "bessel"
    uses alpha sqrt(2 pi/beta) I_1(beta z) (Gaussian profiles only);
    "auto" picks the closed form when available.
    """
    z = float(z)
    if z < 0:
        raise ValueError("potential amplitude z must be >= 0")
    if route == "auto":
        route = "bessel" if profile.kind == "gaussian" else "quadrature"
    if route == "bessel":
        if profile.kind != "gaussian":
            raise ValueError("Bessel route requires a Gaussian profile")
        alpha, beta = profile.alpha, profile.beta
        return alpha * np.sqrt(2.0 * np.pi / beta) * float(el.bessel_i(1, beta * z))
    if route != "quadrature":
        raise ValueError(f"unknown route {route!r}")
    if z == 0.0:
        return 0.0
    return _quadrature_map(profile, z)


def _map_derivative(profile: Profile, z: float, route: str) -> float:
    if route == "bessel":
        alpha, beta = profile.alpha, profile.beta
        w = beta * z
        deriv = 0.5 * (float(el.bessel_i(0, w)) + float(el.bessel_i(2, w)))
        return alpha * np.sqrt(2.0 * np.pi / beta) * beta * deriv
    dz = 1e-6 * max(1.0, z)
    lo = max(z - dz, 0.0)
    return (magnetization_map(profile, z + dz, route)
            - magnetization_map(profile, lo, route)) / (z + dz - lo)


def default_zeta(profile: Profile) -> float:
    """Bracket end for the root search.

    Gaussians start from (5/beta) max(1, log(1/(alpha sqrt(beta)))) and
    double until the map exceeds the identity (Bessel growth guarantees
    termination); custom profiles double from 1.
    """
    if profile.kind == "gaussian":
        ab = profile.alpha * np.sqrt(profile.beta)
        zeta = (5.0 / profile.beta) * max(1.0, np.log(1.0 / ab))
        doublings = 60
    else:
        zeta = 1.0
        doublings = 20
    for _ in range(doublings):
        if magnetization_map(profile, zeta) > zeta:
            return zeta
        zeta *= 2.0
    raise NoPositiveRoot(
        f"magnetization map stays below the identity out to zeta={zeta:.3e}"
    )


def existence_conditions(profile: Profile, zeta: float,
                         route: str = "auto") -> ExistenceReport:
    """Evaluate the two sufficient conditions for a positive root."""
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    first = magnetization_map(profile, zeta, route) - zeta
    if profile.kind == "gaussian":
        slope = profile.alpha * np.sqrt(2.0 * np.pi * profile.beta) / 2.0
    else:
        dz = 1e-6
        slope = magnetization_map(profile, dz, route) / dz
    return ExistenceReport(zeta=float(zeta), first_value=float(first),
                           second_value=float(1.0 - slope))


def solve_magnetization(profile: Profile, zeta: Optional[float] = None,
                        tol: float = 1e-12, route: str = "auto",
                        scan_points: int = 160) -> StationaryState:
    """Smallest positive root of map(z) = z on (0, zeta].

    Geometric scan for the first sign change of F(z) = map(z) - z, then
    bisection, then a Newton polish.  The trivial root z = 0 is always
    present and always rejected.
    """
    if route == "auto":
        route = "bessel" if profile.kind == "gaussian" else "quadrature"
    if zeta is None:
        zeta = default_zeta(profile)
    fmap = lambda z: magnetization_map(profile, z, route)
    f = lambda z: fmap(z) - z

    grid = np.geomspace(1e-6 * zeta, zeta, scan_points)
    values = np.array([f(z) for z in grid])
    signs = np.sign(values)
    flips = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    exact = np.nonzero(values == 0.0)[0]
    if exact.size and (not flips.size or exact[0] < flips[0]):
        root = float(grid[exact[0]])
    elif not flips.size:
        raise NoPositiveRoot(
            f"no sign change of map(z) - z on ({grid[0]:.3e}, {zeta:.3e}]"
        )
    else:
        lo, hi = float(grid[flips[0]]), float(grid[flips[0] + 1])
        f_lo = values[flips[0]]
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            f_mid = f(mid)
            if f_mid == 0.0:
                lo = hi = mid
                break
            if f_mid * f_lo > 0:
                lo, f_lo = mid, f_mid
            else:
                hi = mid
            if hi - lo <= tol * max(1.0, lo):
                break
        root = 0.5 * (lo + hi)
        for _ in range(4):
            slope = _map_derivative(profile, root, route) - 1.0
            if slope == 0.0:
                break
            step = f(root) / slope
            if not lo <= root - step <= hi:
                break
            root -= step

    residual = fmap(root) - root
    report = existence_conditions(profile, zeta, route)
    diagnostics = {
        "condition_first": report.first_value,
        "condition_second": report.second_value,
        "zeta": float(zeta),
        "route": route,
    }
    if not report.second:
        diagnostics["warning"] = (
            "second existence condition fails; the root is outside the "
            "guaranteed regime"
        )
    return StationaryState(profile=profile, M0=float(root),
                           residual=float(residual), diagnostics=diagnostics)


def _check_state_table(state: StationaryState, table: SpectralTable) -> None:
    if abs(table.m0 - state.M0) > 1e-9 * max(1.0, abs(state.M0)):
        raise ValueError(
            f"table magnetization {table.m0!r} does not match state "
            f"M0 {state.M0!r}"
        )


def _chart_integrals(state: StationaryState, table: SpectralTable):
    """Per-chart integrals of G'(h) {1, C_0, C_0^2, sum_l C_l^2} da."""
    gp_total = 0.0
    gp_c0 = 0.0
    gp_c0_sq = 0.0
    gp_cos_sq = 0.0
    for chart in Chart:
        data = table[chart]
        gp = np.asarray(state.profile.g_prime(data.h), dtype=float)
        if np.any(gp >= 0.0):
            raise ValueError("stability functionals require G' < 0 on the grid")
        da = data.trapezoid_weights / data.omega
        c0 = data.cos_rows[0]
        cos_sq = c0 ** 2 + 2.0 * np.sum(data.cos_rows[1:] ** 2, axis=0)
        gp_total += float(np.sum(da * gp))
        gp_c0 += float(np.sum(da * gp * c0))
        gp_c0_sq += float(np.sum(da * gp * c0 ** 2))
        gp_cos_sq += float(np.sum(da * gp * cos_sq))
    return gp_total, gp_c0, gp_c0_sq, gp_cos_sq


def stability_indicator(state: StationaryState, table: SpectralTable) -> float:
    """1 + int G' cos^2 x dmu - sum over charts of int G' C_0^2 da.

    Positive values certify linear stability of the state; the middle
    term uses Parseval on the closed rows, the subtracted term is the
    angle-average contribution.
    """
    _check_state_table(state, table)
    _, _, gp_c0_sq, gp_cos_sq = _chart_integrals(state, table)
    return 1.0 + gp_cos_sq - gp_c0_sq


def stability_sufficient(state: StationaryState, table: SpectralTable,
                         route: str = "table") -> float:
    """Cauchy-Schwarz sufficient value; positivity implies the indicator's.

    route "table": 1 + int G' cos^2 dmu - (int G' cos x dmu)^2 / int G' dmu
    from the spectral table.  route "bessel" (Gaussian profiles): the
    closed form 1 - beta M0 I_1'(w)/I_1(w) + beta M0 I_1(w)/I_0(w) at
    w = beta M0.
    """
    if route == "bessel":
        if state.profile.kind != "gaussian":
            raise ValueError("Bessel route requires a Gaussian profile")
        beta = state.profile.beta
        w = beta * state.M0
        i0 = float(el.bessel_i(0, w))
        i1 = float(el.bessel_i(1, w))
        i2 = float(el.bessel_i(2, w))
        i1p = 0.5 * (i0 + i2)
        return 1.0 - beta * state.M0 * i1p / i1 + beta * state.M0 * i1 / i0
    if route != "table":
        raise ValueError(f"unknown route {route!r}")
    _check_state_table(state, table)
    gp_total, gp_c0, _, gp_cos_sq = _chart_integrals(state, table)
    return 1.0 + gp_cos_sq - gp_c0 ** 2 / gp_total
