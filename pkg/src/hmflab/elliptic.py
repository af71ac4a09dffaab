"""Self-contained special functions for the pendulum chart machinery.

Complete and incomplete elliptic integrals, the Jacobi amplitude and the
elliptic functions sn/cn/dn, Jacobi's nome, and modified Bessel functions
of the first kind.  All elliptic routines take the modulus k (not the
parameter m = k^2); everything accepts scalars or numpy arrays and
computes in float64.

Implementation routes are deliberately independent where a function can
be cross-checked: complete integrals use the arithmetic-geometric mean,
incomplete integrals use Carlson symmetric forms, and the Jacobi
amplitude refines a trigonometric-series seed by safeguarded Newton
iteration on the incomplete integral.  The series evaluation is exposed
separately (jacobi_am_series) so the two routes can be compared.
"""

from __future__ import annotations

import math

import numpy as np

_EPS = np.finfo(float).eps
# Switch to the logarithmic asymptotics of K and E this close to k = 1,
# where 1 - k no longer determines the complementary modulus accurately
# enough for the AGM.
_NEAR_ONE = 1e-8


def _domain(cond, message: str) -> None:
    if not np.all(cond):
        raise ValueError(message)


def _split_scalar(x):
    """Return (float64 array, was_scalar) for uniform vector code paths."""
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _restore(arr, scalar):
    return float(arr) if scalar else arr


def complete_elliptic_k(k):
    """Complete elliptic integral K(k) = F(pi/2, k), modulus convention.

    Arithmetic-geometric mean AGM(1, k') with K = pi / (2 AGM); within
    1e-8 of k = 1 the logarithmic asymptotic
    K = ln(4/k') + (k'^2/4)(ln(4/k') - 1) takes over.
    """
    k, scalar = _split_scalar(k)
    _domain((k >= 0) & (k < 1), "complete_elliptic_k requires 0 <= k < 1")
    kp = np.sqrt((1.0 - k) * (1.0 + k))
    a = np.ones_like(k)
    b = kp.copy()
    for _ in range(40):
        if np.all(np.abs(a - b) <= 4.0 * _EPS * a):
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    out = np.pi / (2.0 * a)
    near = 1.0 - k < _NEAR_ONE
    if np.any(near):
        kpn = np.where(near, np.maximum(kp, 1e-300), 1.0)
        lg = np.log(4.0 / kpn)
        out = np.where(near, lg + 0.25 * kpn * kpn * (lg - 1.0), out)
    return _restore(out, scalar)


def complete_elliptic_e(k):
    """Complete elliptic integral E(k), modulus convention.

    AGM with the defect sum E = K (1 - sum_n 2^(n-1) c_n^2), where c_n is
    half the gap of the AGM pair; E(1) = 1 exactly, with the logarithmic
    expansion E = 1 + (k'^2/2)(ln(4/k') - 1/2) bridging the last 1e-8 of
    the modulus range.
    """
    k, scalar = _split_scalar(k)
    _domain((k >= 0) & (k <= 1), "complete_elliptic_e requires 0 <= k <= 1")
    kp = np.sqrt(np.maximum((1.0 - k) * (1.0 + k), 0.0))
    a = np.ones_like(k)
    b = kp.copy()
    csum = 0.5 * k * k
    pow2 = 0.5
    for _ in range(40):
        c = 0.5 * (a - b)
        if np.all(np.abs(c) <= 4.0 * _EPS * a):
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        pow2 *= 2.0
        csum = csum + pow2 * c * c
    out = (np.pi / (2.0 * a)) * (1.0 - csum)
    near = 1.0 - k < _NEAR_ONE
    if np.any(near):
        kpn = np.where(near, np.maximum(kp, 1e-300), 1.0)
        lg = np.log(4.0 / kpn)
        out = np.where(near, 1.0 + 0.5 * kpn * kpn * (lg - 0.5), out)
    return _restore(out, scalar)


def _carlson_rf(x, y, z):
    """Carlson symmetric integral R_F(x, y, z) by the duplication theorem.

    The deviations X, Y, Z at the converged level feed a degree-7 Taylor
    tail; the stopping rule targets full float64 accuracy.
    """
    x, y, z = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y, z))
    )
    x, y, z = x.copy(), y.copy(), z.copy()
    a = (x + y + z) / 3.0
    q = np.maximum.reduce(
        [np.abs(a - x), np.abs(a - y), np.abs(a - z)]
    ) / (3.0 * _EPS) ** (1.0 / 6.0)
    f = 1.0
    for _ in range(80):
        if np.all(q < f * np.abs(a)):
            break
        sx, sy, sz = np.sqrt(x), np.sqrt(y), np.sqrt(z)
        lam = sx * sy + sx * sz + sy * sz
        x = 0.25 * (x + lam)
        y = 0.25 * (y + lam)
        z = 0.25 * (z + lam)
        a = 0.25 * (a + lam)
        f *= 4.0
    xd = (a - x) / a
    yd = (a - y) / a
    zd = -(xd + yd)
    e2 = xd * yd - zd * zd
    e3 = xd * yd * zd
    series = (
        1.0
        - e2 / 10.0
        + e3 / 14.0
        + e2 * e2 / 24.0
        - 3.0 * e2 * e3 / 44.0
        - 5.0 * e2 ** 3 / 208.0
        + 3.0 * e3 * e3 / 104.0
        + e2 * e2 * e3 / 16.0
    )
    return series / np.sqrt(a)


def _carlson_rd(x, y, z):
    """Carlson symmetric integral R_D(x, y, z) by duplication.

    Accumulates the explicit duplication terms 3 / (4^m sqrt(z_m) (z_m +
    lambda_m)) and finishes with the degree-5 Taylor tail.
    """
    x, y, z = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y, z))
    )
    x, y, z = x.copy(), y.copy(), z.copy()
    a = (x + y + 3.0 * z) / 5.0
    q = np.maximum.reduce(
        [np.abs(a - x), np.abs(a - y), np.abs(a - z)]
    ) / (0.25 * _EPS) ** (1.0 / 6.0)
    f = 1.0
    acc = np.zeros_like(a)
    for _ in range(80):
        if np.all(q < f * np.abs(a)):
            break
        sx, sy, sz = np.sqrt(x), np.sqrt(y), np.sqrt(z)
        lam = sx * sy + sx * sz + sy * sz
        acc = acc + 1.0 / (f * sz * (z + lam))
        x = 0.25 * (x + lam)
        y = 0.25 * (y + lam)
        z = 0.25 * (z + lam)
        a = 0.25 * (a + lam)
        f *= 4.0
    xd = (a - x) / a
    yd = (a - y) / a
    zd = -(xd + yd) / 3.0
    e2 = xd * yd - 6.0 * zd * zd
    e3 = (3.0 * xd * yd - 8.0 * zd * zd) * zd
    e4 = 3.0 * (xd * yd - zd * zd) * zd * zd
    e5 = xd * yd * zd ** 3
    series = (
        1.0
        - 3.0 * e2 / 14.0
        + e3 / 6.0
        + 9.0 * e2 * e2 / 88.0
        - 3.0 * e4 / 22.0
        - 9.0 * e2 * e3 / 52.0
        + 3.0 * e5 / 26.0
    )
    return 3.0 * acc + series / (f * a * np.sqrt(a))


def _incomplete_args(phi, k, name):
    phi_a, s1 = _split_scalar(phi)
    k_a, s2 = _split_scalar(k)
    _domain(np.abs(phi_a) <= np.pi / 2, f"{name} requires |phi| <= pi/2")
    _domain(k_a >= 0, f"{name} requires k >= 0")
    s = np.sin(phi_a)
    d2 = (1.0 - k_a * s) * (1.0 + k_a * s)
    if np.any((d2 <= 0) | ((k_a >= 1.0) & (np.abs(np.abs(phi_a) - np.pi / 2) == 0.0))):
        raise ValueError(f"{name} diverges for k >= 1 at |phi| = pi/2")
    return phi_a, k_a, s, np.cos(phi_a) ** 2, d2, s1 and s2


def incomplete_f(phi, k):
    """Incomplete elliptic integral F(phi, k) for |phi| <= pi/2.

    Carlson route F = sin(phi) R_F(cos^2 phi, 1 - k^2 sin^2 phi, 1); odd
    in phi, and F(pi/2, k) = K(k) for k < 1.
    """
    phi, k, s, c2, d2, scalar = _incomplete_args(phi, k, "incomplete_f")
    out = s * _carlson_rf(c2, d2, np.ones_like(c2 + k))
    return _restore(out, scalar)


def incomplete_e(phi, k):
    """Incomplete elliptic integral E(phi, k) for |phi| <= pi/2.

    Carlson route E = sin(phi) R_F - (k^2/3) sin^3(phi) R_D with shared
    arguments; odd in phi, and E(pi/2, k) = E(k) for k < 1.
    """
    phi, k, s, c2, d2, scalar = _incomplete_args(phi, k, "incomplete_e")
    one = np.ones_like(c2 + k)
    out = s * _carlson_rf(c2, d2, one) - (k * k / 3.0) * s ** 3 * _carlson_rd(
        c2, d2, one
    )
    return _restore(out, scalar)


def nome(k):
    """Jacobi nome q(k) = exp(-pi K(k') / K(k)), in (0, 1).

    Both complete integrals go through the AGM; q ~ k^2/16 as k -> 0 and
    q -> 1 logarithmically as k -> 1.
    """
    k, scalar = _split_scalar(k)
    _domain((k > 0) & (k < 1), "nome requires 0 < k < 1")
    kp = np.sqrt((1.0 - k) * (1.0 + k))
    out = np.exp(-np.pi * complete_elliptic_k(kp) / complete_elliptic_k(k))
    return _restore(out, scalar)


def jacobi_am_series(u, k, terms: int = 12):
    """Jacobi amplitude by its trigonometric series in the nome.

    am(u, k) = pi u / (2K) + sum_j 2 q^j sin(j pi u / K) / (j (1 + q^(2j)))
    truncated after `terms` harmonics; the tail is bounded by the
    geometric remainder q^(terms+1) / (1 - q).  Used standalone as the
    cross-check route and internally as the Newton seed of jacobi_am.
    """
    u, s1 = _split_scalar(u)
    k, s2 = _split_scalar(k)
    _domain((k > 0) & (k < 1), "jacobi_am_series requires 0 < k < 1")
    bigk = complete_elliptic_k(k)
    q = nome(k)
    out = np.pi * u / (2.0 * bigk)
    base = np.pi * u / bigk
    for j in range(1, terms + 1):
        qj = q ** j
        out = out + (2.0 * qj / (j * (1.0 + qj * qj))) * np.sin(j * base)
    return _restore(out, s1 and s2)


def jacobi_am(u, k, tol: float = 1e-14, max_iter: int = 80):
    """Jacobi amplitude am(u, k), the inverse of phi -> F(phi, k).

    Reduces u by the 2K quasi-period (am(u + 2K) = am(u) + pi), seeds
    with jacobi_am_series, then runs safeguarded Newton on F(phi, k) = u
    with a bisection bracket on [-pi/2, pi/2].  An element counts as
    converged when any of three clauses holds: the residual falls below
    tol (scaled by |u|), the bracket collapses to the float spacing of
    phi, or the Newton step resid * dn falls below that spacing.  The
    latter two matter near the separatrix, where the inverse compresses
    u-intervals far below float resolution in phi and the residual floor
    of F sits above tol.  Raises RuntimeError with diagnostics if
    elements remain unconverged.
    """
    u, s1 = _split_scalar(u)
    k, s2 = _split_scalar(k)
    _domain((k > 0) & (k < 1), "jacobi_am requires 0 < k < 1")
    bigk = complete_elliptic_k(k)
    u, k, bigk = np.broadcast_arrays(u, k, np.asarray(bigk))
    n = np.round(u / (2.0 * bigk))
    ur = u - 2.0 * bigk * n

    phi = np.atleast_1d(
        np.clip(np.asarray(jacobi_am_series(ur, k), dtype=float), -np.pi / 2, np.pi / 2)
    ).ravel().copy()
    ur_a = np.atleast_1d(ur).ravel()
    k_a = np.atleast_1d(np.broadcast_to(k, np.shape(ur))).ravel()
    lo = np.full_like(phi, -np.pi / 2)
    hi = np.full_like(phi, np.pi / 2)
    utol = tol * np.maximum(1.0, np.abs(ur_a))

    # Active-set iteration: only unconverged elements are recomputed.
    active = np.arange(phi.size)
    resid = np.atleast_1d(incomplete_f(phi, k_a)) - ur_a
    for it in range(max_iter):
        pa = phi[active]
        s = np.sin(pa)
        dn = np.sqrt(np.maximum((1.0 - k_a[active] * s) * (1.0 + k_a[active] * s), 0.0))
        step = resid * dn
        phi_res = 8.0 * _EPS * np.maximum(1.0, np.abs(pa))
        done = (
            (np.abs(resid) <= utol[active])
            | (hi[active] - lo[active] <= phi_res)
            | (np.abs(step) <= phi_res)
        )
        if done.all():
            active = active[:0]
            break
        keep = ~done
        active = active[keep]
        resid = resid[keep]
        pa = pa[keep]
        step = step[keep]
        above = resid > 0
        hi[active] = np.where(above, np.minimum(hi[active], pa), hi[active])
        lo[active] = np.where(~above, np.maximum(lo[active], pa), lo[active])
        cand = pa - step
        # A periodic forced bisection breaks two-point Newton cycles fed
        # by the residual noise floor; the bracket is monotone, so one
        # halving below the cycle amplitude collapses it for good.
        bisect = (cand < lo[active]) | (cand > hi[active]) | ((it + 1) % 8 == 0)
        phi[active] = np.where(bisect, 0.5 * (lo[active] + hi[active]), cand)
        resid = np.atleast_1d(incomplete_f(phi[active], k_a[active])) - ur_a[active]
    if active.size:
        worst = float(np.max(np.abs(resid)))
        width = float(np.max(hi[active] - lo[active]))
        raise RuntimeError(
            f"jacobi_am inversion stalled on {active.size} points: residual "
            f"{worst:.3e}, bracket width {width:.3e} after {max_iter} iterations"
        )
    out = phi.reshape(np.shape(ur)) + np.pi * n
    return _restore(out, s1 and s2)


def jacobi_sn_cn_dn(u, k):
    """Jacobi elliptic functions sn, cn, dn via the amplitude.

    sn = sin(am), cn = cos(am), dn = sqrt(1 - k^2 sn^2); the quasi-period
    bookkeeping inside jacobi_am gives cn its correct sign on every sheet.
    """
    u, s1 = _split_scalar(u)
    k, s2 = _split_scalar(k)
    phi = np.asarray(jacobi_am(u, k))
    sn = np.sin(phi)
    cn = np.cos(phi)
    dn = np.sqrt((1.0 - k * sn) * (1.0 + k * sn))
    scalar = s1 and s2
    return _restore(sn, scalar), _restore(cn, scalar), _restore(dn, scalar)


def _bessel_i_series(n: int, z: np.ndarray) -> np.ndarray:
    half = 0.5 * z
    term = half ** n / math.factorial(n)
    total = term.copy()
    h2 = half * half
    for j in range(1, 400):
        term = term * h2 / (j * (j + n))
        total = total + term
        if np.all(term <= _EPS * total + 1e-300):
            break
    return total


def _bessel_i_asymptotic(n: int, z: np.ndarray) -> np.ndarray:
    mu = 4.0 * n * n
    term = np.ones_like(z)
    total = np.ones_like(z)
    best = np.full_like(z, np.inf)
    for j in range(1, 60):
        term = term * (-(mu - (2.0 * j - 1.0) ** 2) / (8.0 * j * z))
        mag = np.abs(term)
        grown = mag >= best
        if np.all(grown):
            break
        total = total + np.where(grown, 0.0, term)
        best = np.minimum(best, mag)
    return np.exp(z) / np.sqrt(2.0 * np.pi * z) * total


def bessel_i(n: int, z):
    """Modified Bessel function of the first kind I_n(z), z >= 0, n <= 10.

    Power series for z <= 15 (all terms positive, no cancellation),
    optimally truncated large-argument asymptotic series beyond; the
    branches agree at the crossover to better than 1e-12 relative for the
    supported orders.  Raises OverflowError once e^z leaves float64.
    """
    if int(n) != n or not 0 <= n <= 10:
        raise ValueError("bessel_i requires an integer order 0 <= n <= 10")
    n = int(n)
    z, scalar = _split_scalar(z)
    _domain(z >= 0, "bessel_i requires z >= 0")
    if np.any(z > 700.0):
        raise OverflowError("bessel_i overflows float64 for z > 700")
    flat = np.atleast_1d(z).ravel()
    out = np.empty_like(flat)
    small = flat <= 15.0
    if small.any():
        out[small] = _bessel_i_series(n, flat[small])
    if (~small).any():
        out[~small] = _bessel_i_asymptotic(n, flat[~small])
    out = out.reshape(z.shape) if z.ndim else out[0]
    return _restore(np.asarray(out), scalar)
