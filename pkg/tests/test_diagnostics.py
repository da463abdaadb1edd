import json
import math
from fractions import Fraction

import numpy as np
import pytest

from hirota import diagnostics as dg
from hirota.errors import ConfigurationError, DiagnosticError
from hirota.normal_form import compute_coefficients
from hirota.spectral import GridSpec, SpectralField, sobolev_norm
from hirota.system import HSParams, Trajectory, simulate


def cos_field(N=8, eps=1.0):
    return SpectralField.from_modes(N, {1: eps / 2})


class TestEnergies:
    def test_e1_cos_u(self):
        assert dg.energy_E1(cos_field(), SpectralField.zeros(8), -0.7) == pytest.approx(math.pi)

    def test_e1_cos_v(self):
        z = SpectralField.zeros(8, mean_zero=True)
        assert dg.energy_E1(z, cos_field(), -1.5) == pytest.approx(math.pi)

    @pytest.mark.parametrize("eps", [1e-3, 0.1, 1.0])
    def test_e2_cos(self, eps):
        a = 0.6
        e2 = dg.energy_E2(cos_field(eps=eps), SpectralField.zeros(8), a, -1.0)
        assert e2 == pytest.approx((1 - a) * eps**2 * math.pi, rel=1e-13)

    def test_e2_cubic_term(self):
        # u = cos x + cos 2x: int u^3 = 3 pi / 2
        u = SpectralField.from_modes(8, {1: 0.5, 2: 0.5})
        a = 0.5
        expected = (1 - a) * (1 + 4) * math.pi - 2 * (1 - a) * 1.5 * math.pi
        assert dg.energy_E2(u, SpectralField.zeros(8), a, -1.0) == pytest.approx(expected)

    def test_series_and_invariants(self):
        N = 16
        data = dg.random_sobolev_data(N, 3.0, 1.0, 2, kmax=5)
        p = HSParams(a=0.5, beta=-1.0, dt=1e-3, T=0.2, grid=GridSpec(N))
        ser = dg.energy_series(simulate(data, p, sample_every=20), p)
        assert ser.relative_drift("E1") < 1e-10
        assert ser.relative_drift("E2") < 1e-8
        assert np.all(ser.column("E1") >= 0)
        assert np.all(ser.column("mean_u") == 0)
        assert np.ptp(ser.column("mean_v")) > 0
        rows = ser.to_long_rows()
        assert rows[0][1] == "E1" and len(rows) == 6 * len(ser.records)


class TestData:
    def test_profile_and_means(self):
        u, v = dg.random_sobolev_data(64, 1.5, 2.0, 0)
        k = np.arange(65)
        expected = 2.0 * (1 + k**2) ** (-(1.5 + 0.51) / 2)
        assert np.allclose(np.abs(u.coeffs[1:]), expected[1:])
        assert u.coeffs[0] == 0 and abs(v.coeffs[0]) == pytest.approx(2.0)

    def test_deterministic(self):
        a = dg.random_sobolev_data(16, 1.0, 1.0, 9)
        b = dg.random_sobolev_data(16, 1.0, 1.0, 9)
        assert a[0].allclose(b[0], atol=0) and a[1].allclose(b[1], atol=0)

    def test_normalize(self):
        u, v = dg.random_sobolev_data(32, 1.0, 1.0, 0, normalize=(1.0, 10.0))
        assert sobolev_norm(u, 1) == pytest.approx(10) and sobolev_norm(v, 1) == pytest.approx(10)

    def test_forcing(self):
        f, g = dg.forcing_pair(16, 3)
        assert f.coeffs[0] == 0
        assert sobolev_norm(f, 1) == pytest.approx(1) and sobolev_norm(g, 1) == pytest.approx(1)


class TestTailSlope:
    def test_power_law(self):
        k = np.arange(257, dtype=float)
        c = (1 + k**2) ** (-1.25)
        assert dg.dyadic_tail_slope(c) == pytest.approx(-2.5, abs=0.02)

    def test_too_short(self):
        with pytest.raises(DiagnosticError):
            dg.dyadic_tail_slope(np.ones(20))


class TestSmoothing:
    def test_linear_run_has_zero_residual(self):
        N = 32
        p = HSParams(a=0.5, beta=-1.0, dt=1e-3, T=0.05, grid=GridSpec(N), nonlinear=False)
        rep = dg.smoothing_experiment(1.0, 0.5, 1.0, 0, 0.05, (1.0, 1.5), p=p)
        assert np.max(rep.residual_u) < 1e-11 and np.max(rep.residual_v) < 1e-11

    def test_report_structure(self):
        N = 32
        p = HSParams(a=0.5, beta=-1.0, dt=1e-3, T=0.05, grid=GridSpec(N))
        rep = dg.smoothing_experiment(1.0, 0.5, 0.5, 0, 0.05, (1.0, 1.5), p=p, n_samples=5)
        assert rep.residual_u.shape == (len(rep.times), 2)
        assert np.all(rep.residual_u[0] == 0) and np.all(rep.residual_v[0] == 0)
        d = json.loads(rep.to_json())
        assert d["empirical_gain"] == rep.gain_u
        # continuity: no jumps of more than 10x between neighbouring samples
        r = rep.residual_u[1:, 0]
        assert np.all(r[1:] / r[:-1] < 10)

    def test_needs_s_above_half(self):
        with pytest.raises(ConfigurationError):
            dg.smoothing_experiment(0.5, 0.5, 1.0, 0, 0.1, (1.0,))


def forced_params(N=16, T=2.0, gamma=0.5, dt=2e-3, seed=1, forced=True):
    f, g = dg.forcing_pair(N, seed) if forced else (None, None)
    return HSParams(a=0.5, beta=-1.0, dt=dt, T=T, grid=GridSpec(N), gamma=gamma, forcing_f=f, forcing_g=g)


class TestDissipative:
    def test_bound_holds(self):
        p = forced_params()
        data = dg.random_sobolev_data(16, 1.0, 1.0, 4, normalize=(1.0, 3.0))
        rep = dg.dissipative_energy_check(simulate(data, p, sample_every=10), p)
        assert rep.ok and rep.min_margin >= 0

    def test_zero_data_bounded_by_forcing(self):
        p = forced_params()
        z = (SpectralField.zeros(16, mean_zero=True), SpectralField.zeros(16))
        rep = dg.dissipative_energy_check(simulate(z, p, sample_every=10), p)
        assert rep.lhs[0] == 0 and rep.ok

    def test_unforced_decay(self):
        # E1 e^{2gt} is exactly constant; what remains is time-stepping error
        data = dg.random_sobolev_data(16, 1.0, 1.0, 4, normalize=(1.0, 3.0))
        devs = []
        for dt in (1e-3, 5e-4):
            p = forced_params(forced=False, dt=dt)
            devs.append(dg.dissipative_energy_check(simulate(data, p, sample_every=10), p).decay_deviation)
        assert devs[1] < 1e-5
        assert devs[0] / devs[1] > 12

    def test_violation_is_reported(self):
        p = forced_params()
        data = dg.random_sobolev_data(16, 1.0, 1.0, 4)
        tr = simulate(data, p, sample_every=10)
        bad = Trajectory(tr.times, tr.u * np.linspace(1, 50, len(tr))[:, None], tr.v)
        rep = dg.dissipative_energy_check(bad, p)
        assert not rep.ok and len(rep.violations) > 0

    def test_requires_damping(self):
        p = HSParams(a=0.5, beta=-1.0, dt=1e-3, T=0.01, grid=GridSpec(8))
        tr = Trajectory(np.array([0.0]), np.zeros((1, 9)), np.zeros((1, 9)))
        with pytest.raises(ConfigurationError):
            dg.dissipative_energy_check(tr, p)


class TestAbsorbing:
    def test_radius_formula(self):
        p = forced_params()
        expected = 2 * math.sqrt(1 + 1.5) * (2 + math.sqrt(2)) / 0.5
        assert dg.absorbing_radius(p) == pytest.approx(expected)

    def test_already_inside(self):
        p = forced_params(T=0.2)
        z = (SpectralField.zeros(16, mean_zero=True), SpectralField.zeros(16))
        rep = dg.absorbing_ball_probe([z], p)
        assert rep.results[0].entry_time == 0 and rep.all_enter_and_stay

    def test_non_entry_flagged(self):
        p = forced_params(T=0.2)
        data = dg.random_sobolev_data(16, 1.0, 1.0, 0, normalize=(1.0, 5.0))
        rep = dg.absorbing_ball_probe([data], p, radius=1.0)
        assert rep.results[0].flagged and rep.median_entry == math.inf

    def test_entry_times_shrink_with_damping(self):
        data = [dg.random_sobolev_data(16, 1.0, 1.0, s, normalize=(1.0, 10.0)) for s in range(3)]
        medians = []
        for gamma in (0.5, 1.0):
            p = forced_params(T=8.0, gamma=gamma)
            rep = dg.absorbing_ball_probe(data, p, radius=5.0, sample_every=25)
            assert rep.all_enter_and_stay
            medians.append(rep.median_entry)
        assert medians[1] < medians[0]


class TestAttractor:
    def test_linear_remainder_zero(self):
        N = 16
        p = HSParams(a=0.5, beta=-1.0, dt=1e-3, T=0.1, grid=GridSpec(N), gamma=0.5, nonlinear=False)
        tr = simulate(dg.random_sobolev_data(N, 1.0, 1.0, 0), p, sample_every=10)
        rep = dg.attractor_regularity_probe(tr, p, 0.4, compute_coefficients(0.5))
        assert np.max(rep.remainder_norm) < 1e-12

    def test_remainder_starts_at_zero(self):
        p = forced_params(T=0.4)
        tr = simulate(dg.random_sobolev_data(16, 1.0, 1.0, 0), p, sample_every=10)
        rep = dg.attractor_regularity_probe(tr, p, 0.4, compute_coefficients(0.5))
        assert rep.remainder_norm[0] == 0
        assert len(rep.to_long_rows()) == 2 * len(rep.times)

    def test_rational_case_integrates_rho2(self):
        f, g = dg.forcing_pair(16, 1)
        p = HSParams(a=Fraction(1, 3), beta=-1.0, dt=2e-3, T=0.4, grid=GridSpec(16), gamma=0.5, forcing_f=f, forcing_g=g)
        tr = simulate(dg.random_sobolev_data(16, 1.0, 1.0, 0), p, sample_every=5)
        rep = dg.attractor_regularity_probe(tr, p, 0.4, compute_coefficients(Fraction(1, 3)))
        assert len(rep.times) == (len(tr) + 1) // 2 or len(rep.times) == len(tr) // 2 + (len(tr) % 2)
        assert rep.remainder_norm[0] == 0

    def test_alpha_limit(self):
        p = forced_params(T=0.1)
        tr = Trajectory(np.array([0.0]), np.zeros((1, 17)), np.zeros((1, 17)))
        with pytest.raises(ConfigurationError):
            dg.attractor_regularity_probe(tr, p, 0.5, compute_coefficients(0.5))


class TestGrowth:
    def test_linear_run_flat(self):
        N = 16
        p = HSParams(a=0.5, beta=-1.0, dt=1e-3, T=0.5, grid=GridSpec(N), nonlinear=False)
        tr = simulate(dg.random_sobolev_data(N, 2.0, 1.0, 0), p, sample_every=50)
        assert abs(dg.growth_monitor(tr, 2.0).exponent) < 1e-10

    def test_h1_nearly_flat(self):
        N = 16
        p = HSParams(a=0.5, beta=-1.0, dt=1e-3, T=1.0, grid=GridSpec(N))
        tr = simulate(dg.random_sobolev_data(N, 3.0, 1.0, 0, kmax=4), p, sample_every=50)
        rep = dg.growth_monitor(tr, 1.0)
        assert np.all(np.diff(rep.running_max) >= 0)
        assert np.isfinite(rep.exponent)


def test_long_table_csv():
    text = dg.long_table_csv([(0.0, "E1", 1.5), (0.1, "E1", 1.25)])
    assert text.splitlines() == ["t,quantity,value", "0.0,E1,1.5", "0.1,E1,1.25"]
