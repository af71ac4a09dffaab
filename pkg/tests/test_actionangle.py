"""Action-angle atlas: chart maps, frequencies, actions, Fourier rows.

Oracles independent of the implementation: period and enclosed-area
quadrature (scipy.integrate) for frequency and action, theta-FFT of the
chart maps for the closed coefficient formulas, central finite
differences for the symplectic Jacobian and for da/dh = 1/omega.
Frozen reference values were computed with mpmath at 40 digits.
"""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import IntegrationWarning, quad

from hmflab import actionangle as aa
from hmflab.actionangle import Chart, GridConfig, ObservableMetadata, PhasePoint

M0 = 0.38637375975603394

# mpmath 40-digit references at M0 above.
OMEGA_EYE_01 = 0.492461102999380209
ACTION_EYE_01 = 0.8666310371064209846
C0_EYE_01 = 0.2934749975905723439
C2_EYE_01 = -0.311138682073321511
S1_EYE_01 = 0.5875145526950573993
X_EYE_01_09 = 1.200248329976893022
V_EYE_01_09 = -0.6926992077338548801
OMEGA_OUT_2 = 1.985812728199729596
ACTION_OUT_2 = 1.995293366426248277
C0_OUT_2 = -0.04881417993044761352
C1_OUT_2 = 0.4991055528237781272
S1_OUT_2 = 0.4985098478442260342
X_OUT_2_09 = 0.9776916799019592865
V_OUT_2_09 = 2.105212113255539826


def _quad_tight(fn, lo, hi):
    # Tolerances sit at the roundoff floor on purpose (the eye integrand
    # has inverse-square-root turning points); the warning emitted there
    # is expected and the returned error bound is asserted instead.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(fn, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=400)
    assert err < 1e-10
    return val


def period_oracle(chart, h, m0):
    """omega = 2 pi / T with T from direct quadrature of dx / v."""
    speed = lambda x: np.sqrt(2.0 * (h + m0 * np.cos(x)))
    if chart is Chart.EYE:
        x_turn = np.arccos(-h / m0)
        period = 2.0 * _quad_tight(lambda x: 1.0 / speed(x), -x_turn, x_turn)
    else:
        period = _quad_tight(lambda x: 1.0 / speed(x), -np.pi, np.pi)
    return 2.0 * np.pi / period


def action_oracle(chart, h, m0):
    """Enclosed area over 2 pi from direct quadrature of v dx."""
    speed = lambda x: np.sqrt(2.0 * (h + m0 * np.cos(x)))
    if chart is Chart.EYE:
        x_turn = np.arccos(-h / m0)
        area = 2.0 * _quad_tight(speed, -x_turn, x_turn)
    else:
        area = _quad_tight(speed, -np.pi, np.pi)
    return area / (2.0 * np.pi)


def fd_jacobian(chart, h, theta, m0):
    """Central-difference determinant of (theta, a) -> (x, v)."""
    mapfn = aa._eye_xv if chart is Chart.EYE else (
        lambda hh, tt, mm: aa._outer_xv(hh, tt, mm, chart.sign))
    d_th = 1e-5
    d_h = 1e-5 * max(abs(h), m0)
    x_tp, v_tp = mapfn(h, theta + d_th, m0)
    x_tm, v_tm = mapfn(h, theta - d_th, m0)
    x_hp, v_hp = mapfn(h + d_h, theta, m0)
    x_hm, v_hm = mapfn(h - d_h, theta, m0)
    dx_dth = (x_tp - x_tm) / (2.0 * d_th)
    dv_dth = (v_tp - v_tm) / (2.0 * d_th)
    dx_dh = (x_hp - x_hm) / (2.0 * d_h)
    dv_dh = (v_hp - v_hm) / (2.0 * d_h)
    omega = float(aa.frequency(chart, h, m0))
    return omega * (dx_dth * dv_dh - dx_dh * dv_dth)


class TestClassify:
    def test_examples(self):
        chart, h = aa.classify(PhasePoint(0.0, 0.0), 1.0)
        assert chart is Chart.EYE and h == -1.0
        chart, h = aa.classify(PhasePoint(0.0, 3.0), 1.0)
        assert chart is Chart.OUTER_UPPER and h == pytest.approx(3.5, abs=1e-15)
        chart, h = aa.classify(PhasePoint(np.pi / 2, 0.0), 1.0)
        assert chart is Chart.EYE and abs(h) < 1e-15
        chart, h = aa.classify(PhasePoint(0.0, -3.0), 1.0)
        assert chart is Chart.OUTER_LOWER

    def test_position_wrapping(self):
        assert PhasePoint(3.0 * np.pi, 0.0).x == pytest.approx(np.pi)
        assert PhasePoint(-np.pi, 0.0).x == pytest.approx(np.pi)
        assert PhasePoint(2.0 * np.pi + 0.3, 0.0).x == pytest.approx(0.3)

    def test_separatrix_layer(self):
        with pytest.raises(aa.SeparatrixError) as info:
            aa.classify(PhasePoint(np.pi, 0.0), 1.0)
        assert info.value.gap <= info.value.cutoff

    def test_bad_magnetization(self):
        with pytest.raises(ValueError):
            aa.classify(PhasePoint(0.0, 0.0), 0.0)

    def test_chart_sign(self):
        assert Chart.OUTER_UPPER.sign == 1
        assert Chart.OUTER_LOWER.sign == -1
        assert Chart.OUTER_UPPER.is_outer and not Chart.EYE.is_outer
        with pytest.raises(ValueError):
            Chart.EYE.sign

    @given(x=st.floats(-10.0, 10.0), v=st.floats(-5.0, 5.0))
    @settings(max_examples=100, deadline=None)
    def test_consistency(self, x, v):
        pt = PhasePoint(x, v)
        h = pt.energy(M0)
        if abs(h - M0) <= 2e-6 * M0:
            return
        chart, h_out = aa.classify(pt, M0)
        assert h_out == pytest.approx(h, abs=1e-15)
        assert h >= -M0
        if chart is Chart.EYE:
            assert h < M0
        else:
            assert h > M0
            assert chart.sign * v > 0


class TestFrequency:
    def test_frozen_values(self):
        assert aa.frequency(Chart.EYE, 0.1, M0) == pytest.approx(OMEGA_EYE_01, rel=1e-13)
        assert aa.frequency(Chart.OUTER_UPPER, 2.0, M0) == pytest.approx(OMEGA_OUT_2, rel=1e-13)
        assert aa.frequency(Chart.OUTER_LOWER, 2.0, M0) == pytest.approx(OMEGA_OUT_2, rel=1e-13)

    def test_period_quadrature_route(self):
        for h in (-0.3 * M0, 0.0, 0.6 * M0):
            assert aa.frequency(Chart.EYE, h, M0) == pytest.approx(
                period_oracle(Chart.EYE, h, M0), rel=1e-9)
        for h in (1.7 * M0, 2.0, 15.0):
            assert aa.frequency(Chart.OUTER_UPPER, h, M0) == pytest.approx(
                period_oracle(Chart.OUTER_UPPER, h, M0), rel=1e-9)

    def test_center_limit(self):
        delta = 1e-4 * M0
        expansion = np.sqrt(M0) - delta / (8.0 * np.sqrt(M0))
        assert aa.frequency(Chart.EYE, -M0 + delta, M0) == pytest.approx(
            expansion, abs=1e-8)
        assert aa.frequency(Chart.EYE, -M0, M0) == pytest.approx(
            np.sqrt(M0), abs=1e-15)

    def test_free_streaming_limit(self):
        h = 1e4
        ratio = aa.frequency(Chart.OUTER_UPPER, h, 1.0) / np.sqrt(2.0 * h)
        assert abs(ratio - 1.0) < 1e-3

    def test_separatrix_log_law(self):
        # Sharp form: the log argument carries the 32 M0 constant; the
        # bare-log reading misses by >10% in this gap range.
        for gap in (1e-8, 1e-7, 1e-6):
            h = M0 * (1.0 + gap)
            value = aa.frequency(Chart.OUTER_UPPER, h, M0, eps_sep=1e-9)
            limit = 2.0 * np.pi * np.sqrt(M0) / np.log(32.0 * M0 / (h - M0))
            assert value == pytest.approx(limit, rel=1e-2)
            h = M0 * (1.0 - gap)
            value = aa.frequency(Chart.EYE, h, M0, eps_sep=1e-9)
            limit = np.pi * np.sqrt(M0) / np.log(32.0 * M0 / (M0 - h))
            assert value == pytest.approx(limit, rel=1e-2)

    def test_monotonicity(self):
        h_eye = np.linspace(-M0, M0 * (1.0 - 1e-5), 200)
        omega = aa.frequency(Chart.EYE, h_eye, M0)
        assert np.all(np.diff(omega) < 0)
        assert omega[0] == pytest.approx(np.sqrt(M0), abs=1e-15)
        h_out = M0 + np.geomspace(1e-5 * M0, 100.0 * M0, 200)
        assert np.all(np.diff(aa.frequency(Chart.OUTER_UPPER, h_out, M0)) > 0)

    def test_separatrix_guard(self):
        with pytest.raises(aa.SeparatrixError):
            aa.frequency(Chart.EYE, M0 * (1.0 - 1e-7), M0)
        with pytest.raises(aa.SeparatrixError):
            aa.frequency(Chart.OUTER_UPPER, M0 * (1.0 + 1e-7), M0)
        with pytest.raises(ValueError):
            aa.frequency(Chart.EYE, 2.0 * M0, M0)
        with pytest.raises(ValueError):
            aa.frequency(Chart.OUTER_UPPER, 0.0, M0)


class TestAction:
    def test_frozen_values(self):
        assert aa.action(Chart.EYE, 0.1, M0) == pytest.approx(ACTION_EYE_01, rel=1e-13)
        assert aa.action(Chart.OUTER_UPPER, 2.0, M0) == pytest.approx(ACTION_OUT_2, rel=1e-13)

    def test_area_quadrature_route(self):
        for h in (-0.3 * M0, 0.0, 0.6 * M0):
            assert aa.action(Chart.EYE, h, M0) == pytest.approx(
                action_oracle(Chart.EYE, h, M0), rel=1e-9)
        for h in (1.7 * M0, 2.0, 15.0):
            assert aa.action(Chart.OUTER_UPPER, h, M0) == pytest.approx(
                action_oracle(Chart.OUTER_UPPER, h, M0), rel=1e-9)

    def test_range_limits(self):
        assert aa.action(Chart.EYE, -M0, M0) == pytest.approx(0.0, abs=1e-15)
        near_top = aa.action(Chart.EYE, M0 * (1.0 - 1e-8), M0, eps_sep=1e-9)
        assert near_top == pytest.approx(8.0 * np.sqrt(M0) / np.pi, rel=1e-6)
        near_bottom = aa.action(Chart.OUTER_UPPER, M0 * (1.0 + 1e-8), M0, eps_sep=1e-9)
        assert near_bottom == pytest.approx(4.0 * np.sqrt(M0) / np.pi, rel=1e-6)

    def test_derivative_is_inverse_frequency(self):
        for chart, h_list in ((Chart.EYE, (-0.5 * M0, 0.0, 0.7 * M0)),
                              (Chart.OUTER_UPPER, (1.5 * M0, 3.0, 20.0))):
            for h in h_list:
                dh = 1e-6 * max(abs(h), M0)
                deriv = (aa.action(chart, h + dh, M0)
                         - aa.action(chart, h - dh, M0)) / (2.0 * dh)
                assert deriv * aa.frequency(chart, h, M0) == pytest.approx(
                    1.0, abs=1e-8)

    def test_monotonicity(self):
        h_eye = np.linspace(-M0, M0 * (1.0 - 1e-5), 200)
        assert np.all(np.diff(aa.action(Chart.EYE, h_eye, M0)) > 0)
        h_out = M0 + np.geomspace(1e-5 * M0, 100.0 * M0, 200)
        assert np.all(np.diff(aa.action(Chart.OUTER_UPPER, h_out, M0)) > 0)


class TestCoordinateMaps:
    def test_frozen_map_values(self):
        pt = aa.to_cartesian(aa.chart_coordinates(Chart.EYE, 0.1, 0.9, M0), M0)
        assert pt.x == pytest.approx(X_EYE_01_09, rel=1e-12)
        assert pt.v == pytest.approx(V_EYE_01_09, rel=1e-12)
        pt = aa.to_cartesian(aa.chart_coordinates(Chart.OUTER_UPPER, 2.0, 0.9, M0), M0)
        assert pt.x == pytest.approx(X_OUT_2_09, rel=1e-12)
        assert pt.v == pytest.approx(V_OUT_2_09, rel=1e-12)

    def test_anchor_points(self):
        k = float(aa.modulus(0.1, M0))
        v_max = 2.0 * k * np.sqrt(M0)
        pt = aa.to_cartesian(aa.chart_coordinates(Chart.EYE, 0.1, -np.pi / 2, M0), M0)
        assert abs(pt.x) < 1e-12 and pt.v == pytest.approx(v_max, abs=1e-12)
        pt = aa.to_cartesian(aa.chart_coordinates(Chart.EYE, 0.1, np.pi / 2, M0), M0)
        assert abs(pt.x) < 1e-12 and pt.v == pytest.approx(-v_max, abs=1e-12)
        for chart in (Chart.OUTER_UPPER, Chart.OUTER_LOWER):
            pt = aa.to_cartesian(aa.chart_coordinates(chart, 2.0, 0.0, M0), M0)
            assert abs(pt.x) < 1e-12
            assert pt.v == pytest.approx(chart.sign * np.sqrt(2.0 * (2.0 + M0)),
                                         abs=1e-12)
            pt = aa.to_cartesian(aa.chart_coordinates(chart, 2.0, np.pi, M0), M0)
            assert abs(pt.x) == pytest.approx(np.pi, abs=1e-12)

    def test_center_degenerates(self):
        for theta in (-1.0, 0.0, 2.0):
            pt = aa.to_cartesian(aa.chart_coordinates(Chart.EYE, -M0, theta, M0), M0)
            assert pt.x == 0.0 and pt.v == 0.0

    def test_energy_round_trip(self):
        theta = np.linspace(-np.pi + 1e-3, np.pi, 33)
        cases = [(Chart.EYE, h) for h in (-0.9 * M0, -0.2 * M0, 0.5 * M0, 0.95 * M0)]
        cases += [(chart, h) for chart in (Chart.OUTER_UPPER, Chart.OUTER_LOWER)
                  for h in (1.2 * M0, 2.0, 30.0)]
        for chart, h in cases:
            for th in theta:
                pt = aa.to_cartesian(aa.chart_coordinates(chart, h, th, M0), M0)
                assert pt.energy(M0) == pytest.approx(h, rel=1e-9)
                chart_out, h_out = aa.classify(pt, M0)
                assert chart_out is chart
                assert h_out == pytest.approx(h, rel=1e-9)

    def test_harmonic_limit(self):
        h = -1.0 + 1e-4
        k = float(aa.modulus(h, 1.0))
        for th in np.linspace(-np.pi + 1e-3, np.pi, 17):
            pt = aa.to_cartesian(aa.chart_coordinates(Chart.EYE, h, th, 1.0), 1.0)
            assert pt.x == pytest.approx(2.0 * k * np.cos(th), abs=1e-3)
            assert pt.v == pytest.approx(-2.0 * k * np.sin(th), abs=1e-3)

    def test_free_streaming_identity(self):
        for th in np.linspace(-np.pi + 1e-3, np.pi, 17):
            for chart in (Chart.OUTER_UPPER, Chart.OUTER_LOWER):
                pt = aa.to_cartesian(aa.chart_coordinates(chart, 1e4, th, 1.0), 1.0)
                gap = (pt.x - chart.sign * th + np.pi) % (2.0 * np.pi) - np.pi
                assert abs(gap) < 1e-3

    def test_theta_domain(self):
        with pytest.raises(ValueError):
            aa.chart_coordinates(Chart.EYE, 0.1, 3.5, M0)
        with pytest.raises(ValueError):
            aa.to_cartesian(aa.ChartCoordinates(Chart.EYE, 0.1, -np.pi, 0.5, 0.5), M0)

    def test_symplectic_jacobian(self):
        theta = np.array([-2.2, -0.9, 0.4, 1.7, 2.9])
        h_eye = np.linspace(-0.94 * M0, 0.94 * M0, 9)
        h_out = M0 + np.geomspace(0.06 * M0, 60.0 * M0, 9)
        for h in h_eye:
            det = fd_jacobian(Chart.EYE, float(h), theta, M0)
            assert np.max(np.abs(det - 1.0)) < 1e-5
        for chart in (Chart.OUTER_UPPER, Chart.OUTER_LOWER):
            for h in h_out:
                det = fd_jacobian(chart, float(h), theta, M0)
                assert np.max(np.abs(det - 1.0)) < 1e-5

    def test_flow_invariance(self):
        # Advancing the angle by t omega multiplies row l by e^{i l omega t}.
        t = 0.7
        n = 256
        theta = 2.0 * np.pi * np.arange(n) / n
        f = lambda x, v: np.sin(x) + 0.5 * np.cos(2.0 * x) + 0.1 * v * v
        for chart, h in ((Chart.EYE, 0.1), (Chart.OUTER_UPPER, 2.0)):
            omega = float(aa.frequency(chart, h, M0))
            x0, v0 = aa._chart_xv_grid(chart, [h], theta, M0)
            x1, v1 = aa._chart_xv_grid(chart, [h], theta + omega * t, M0)
            rows0 = np.fft.fft(f(x0[0], v0[0])) / n
            rows1 = np.fft.fft(f(x1[0], v1[0])) / n
            ell = np.arange(n)
            ell[n // 2:] -= n
            phase = np.exp(1j * ell * omega * t)
            assert np.max(np.abs(rows1 - phase * rows0)[:16]) < 1e-10


class TestFourierCoefficients:
    def test_frozen_values(self):
        assert aa.closed_cos_coefficient(Chart.EYE, 0, 0.1, M0) == pytest.approx(
            C0_EYE_01, rel=1e-13)
        assert aa.closed_cos_coefficient(Chart.EYE, 2, 0.1, M0) == pytest.approx(
            C2_EYE_01, rel=1e-13)
        assert aa.closed_sin_coefficient(Chart.EYE, 1, 0.1, M0) == pytest.approx(
            S1_EYE_01, rel=1e-13)
        assert aa.closed_cos_coefficient(Chart.OUTER_UPPER, 0, 2.0, M0) == pytest.approx(
            C0_OUT_2, rel=1e-13)
        assert aa.closed_cos_coefficient(Chart.OUTER_UPPER, 1, 2.0, M0) == pytest.approx(
            C1_OUT_2, rel=1e-13)
        assert aa.closed_sin_coefficient(Chart.OUTER_UPPER, 1, 2.0, M0) == pytest.approx(
            -1j * S1_OUT_2, rel=1e-13)

    def test_quadrature_route(self):
        cosx = lambda x, v: np.cos(x)
        sinx = lambda x, v: np.sin(x)
        cases = [(Chart.EYE, 0.0, 1.0), (Chart.EYE, 0.3, 1.0),
                 (Chart.EYE, 0.1, M0), (Chart.OUTER_UPPER, 2.0, M0),
                 (Chart.OUTER_LOWER, 2.0, M0)]
        for chart, h, m0 in cases:
            for ell in (0, 1, 2, 3):
                got = aa.fourier_coefficient(cosx, chart, ell, h, m0)
                want = complex(np.asarray(aa.closed_cos_coefficient(chart, ell, h, m0),
                                          dtype=complex))
                assert got == pytest.approx(want, abs=1e-10)
                got = aa.fourier_coefficient(sinx, chart, ell, h, m0)
                want = complex(np.asarray(aa.closed_sin_coefficient(chart, ell, h, m0),
                                          dtype=complex))
                assert got == pytest.approx(want, abs=1e-10)

    def test_parity_structure(self):
        for ell in (1, 3, 5):
            assert aa.closed_cos_coefficient(Chart.EYE, ell, 0.3, 1.0) == 0.0
        for ell in (2, 4, 6):
            assert aa.closed_sin_coefficient(Chart.EYE, ell, 0.3, 1.0) == 0.0
        for chart in Chart:
            h = 0.3 if chart is Chart.EYE else 2.0
            assert aa.closed_sin_coefficient(chart, 0, h, 1.0) == 0.0

    def test_conjugate_symmetry(self):
        f = lambda x, v: np.sin(x) + 0.2 * np.cos(x) * v
        for chart, h in ((Chart.EYE, 0.2), (Chart.OUTER_UPPER, 2.0)):
            plus = aa.fourier_coefficient(f, chart, 3, h, M0)
            minus = aa.fourier_coefficient(f, chart, -3, h, M0)
            assert minus == pytest.approx(np.conj(plus), abs=1e-12)
        assert aa.closed_sin_coefficient(Chart.OUTER_UPPER, -1, 2.0, M0) == pytest.approx(
            1j * S1_OUT_2, rel=1e-13)

    def test_ell_decay(self):
        # Analytic maps give geometric decay in l; the closed rows must
        # collapse far below the tabulation tolerance well before l_max.
        ells = np.arange(1, 41)
        rows = np.array([np.abs(np.asarray(
            aa.closed_cos_coefficient(Chart.EYE, 2 * ell, 0.1, M0))) for ell in ells])
        assert rows[-1] < 1e-20
        assert np.all(np.diff(np.log(rows[2:])) < 0)

    def test_center_flatness_scaling(self):
        # sin x vanishes to first order at the origin: S_1 ~ k; the
        # second-order 1 - cos x gives C_2 ~ -k^2/2.
        for delta in (1e-3 * M0, 1e-4 * M0):
            k = float(aa.modulus(-M0 + delta, M0))
            s1 = float(np.asarray(aa.closed_sin_coefficient(Chart.EYE, 1, -M0 + delta, M0)))
            c2 = float(np.asarray(aa.closed_cos_coefficient(Chart.EYE, 2, -M0 + delta, M0)))
            assert s1 / k == pytest.approx(1.0, abs=2e-3)
            assert c2 / k ** 2 == pytest.approx(-0.5, abs=2e-3)

    def test_quadrature_exhaustion(self):
        jump = lambda x, v: np.sign(x - 0.1)
        with pytest.raises(RuntimeError, match="resolution exhausted"):
            aa.fourier_coefficient(jump, Chart.EYE, 1, 0.3, M0,
                                   n_theta=32, tol=1e-12, max_doublings=2)


@pytest.fixture(scope="module")
def table():
    observables = {
        "one": lambda x, v: np.ones_like(x),
        "sinx": lambda x, v: np.sin(x),
        "gcos": lambda x, v: np.exp(-(0.5 * v * v - M0 * np.cos(x))) * np.cos(x),
    }
    return aa.build_spectral_table(M0, observables=observables)


class TestSpectralTable:
    def test_defect_and_resolution(self, table):
        assert table.parseval_defect < 1e-8
        assert table.n_theta_used == 512

    def test_invariant_rows(self, table):
        for chart in Chart:
            data = table[chart]
            assert np.all(data.sin_rows[0] == 0.0)
            if chart is Chart.EYE:
                assert np.all(data.cos_rows[1::2] == 0.0)
                assert np.all(data.sin_rows[2::2] == 0.0)
        upper, lower = table[Chart.OUTER_UPPER], table[Chart.OUTER_LOWER]
        assert np.array_equal(upper.cos_rows, lower.cos_rows)
        assert np.array_equal(upper.sin_rows, lower.sin_rows)

    def test_grids_and_monotonicity(self, table):
        eye = table[Chart.EYE]
        assert eye.h[0] == -M0
        assert eye.h[-1] <= M0 * (1.0 - 1e-6)
        assert np.all(np.diff(eye.omega) < 0)
        assert np.all(np.diff(eye.a) > 0)
        outer = table[Chart.OUTER_UPPER]
        assert outer.h[0] >= M0 * (1.0 + 1e-6)
        assert outer.h[-1] == pytest.approx(200.0 * M0)
        assert np.all(np.diff(outer.omega) > 0)
        assert np.all(np.diff(outer.a) > 0)

    def test_trapezoid_weights(self, table):
        for chart in Chart:
            data = table[chart]
            assert np.sum(data.trapezoid_weights) == pytest.approx(
                data.h[-1] - data.h[0], rel=1e-14)

    def test_observable_rows(self, table):
        eye = table[Chart.EYE]
        n_h = eye.h.size
        assert eye.observables["one"].shape == (65, n_h)
        assert np.allclose(eye.observables["one"][0], 1.0, atol=1e-13)
        assert np.max(np.abs(eye.observables["one"][1:])) < 1e-13
        assert np.max(np.abs(eye.observables["sinx"][0])) < 1e-13
        s1 = np.asarray(aa.closed_sin_coefficient(Chart.EYE, 1, eye.h, M0))
        assert np.max(np.abs(eye.observables["sinx"][1] - s1)) < 1e-10

    def test_truncation_certificate(self, table):
        for chart in Chart:
            tail = aa.truncation_tail(chart, table[chart].h, M0, table.config.l_max)
            assert np.max(tail) < 1e-8
        with pytest.raises(ValueError, match="coefficient tail"):
            aa.build_spectral_table(M0, config=GridConfig(l_max=4))

    def test_limit_functional(self, table):
        assert abs(aa.limit_functional("sinx", "one", table)) < 1e-12
        total = aa.limit_functional("one", "one", table)
        expected = float(aa.action(Chart.EYE, table[Chart.EYE].h[-1], M0))
        for chart in (Chart.OUTER_UPPER, Chart.OUTER_LOWER):
            h = table[chart].h
            expected += float(aa.action(chart, h[-1], M0)
                              - aa.action(chart, h[0], M0))
        assert total == pytest.approx(expected, rel=1e-3)
        with pytest.raises(ValueError, match="missing"):
            aa.limit_functional("one", "absent", table)

    def test_gcos_row_is_weighted_cos(self, table):
        # G'(h) cos x has theta-constant weight on each level set, so its
        # rows are the cos rows scaled by the weight at that h.
        eye = table[Chart.EYE]
        weight = np.exp(-eye.h)
        for ell in (0, 2, 4):
            assert np.max(np.abs(eye.observables["gcos"][ell]
                                 - weight * eye.cos_rows[ell])) < 1e-10


class TestGridConfig:
    def test_defaults_match_contract(self):
        config = GridConfig()
        assert config.n_theta == 512
        assert config.l_max == 64
        assert config.eps_sep == 1e-6
        assert config.h_max_factor == 200.0
        assert config.parseval_tol == 1e-8

    def test_grid_shapes(self):
        config = GridConfig()
        eye = config.eye_grid(M0)
        assert eye[0] == -M0 and np.all(np.diff(eye) > 0)
        assert eye[-1] == pytest.approx(M0 * (1.0 - 1e-6))
        outer = config.outer_grid(M0)
        assert outer[0] == pytest.approx(M0 * (1.0 + 1e-6))
        assert np.all(np.diff(outer) > 0)

    def test_velocity_decay_extension(self):
        config = GridConfig()
        stretched = config.with_velocity_decay(2.6)
        assert stretched.h_max_factor > config.h_max_factor
        assert config.with_velocity_decay(20.0).h_max_factor == 200.0
        with pytest.raises(ValueError):
            config.with_velocity_decay(2.0)

    def test_cutoff_floor_warning(self):
        config = GridConfig(eps_sep=1e-9, eye_n1=8, eye_n2=6,
                            outer_n1=6, outer_n2=6)
        with pytest.warns(RuntimeWarning, match="conditioning floor"):
            aa.build_spectral_table(M0, config=config)

    def test_metadata_validation(self):
        with pytest.raises(ValueError):
            ObservableMetadata(flatness_order=-1)
        with pytest.raises(ValueError):
            ObservableMetadata(velocity_decay=2.0)
        with pytest.raises(ValueError, match="unknown observable"):
            aa.build_spectral_table(
                M0, observables={}, metadata={"ghost": ObservableMetadata()})
