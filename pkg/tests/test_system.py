import numpy as np
import pytest
from fractions import Fraction

from hirota.diagnostics import random_sobolev_data
from hirota.errors import BlowUpError, ConfigurationError, InvariantViolation
from hirota.spectral import GridSpec, SpectralField
from hirota.system import (
    HSParams,
    Trajectory,
    linear_phase,
    nonlinear_terms,
    propagate_linear,
    rhs_conservative,
    simulate,
    step_ifrk4,
)


def params(N=16, dt=1e-3, T=0.1, **kw):
    kw.setdefault("a", 0.5)
    kw.setdefault("beta", -1.0)
    return HSParams(dt=dt, T=T, grid=GridSpec(N), **kw)


def smooth_data(N=16, amp=0.5, seed=0):
    return random_sobolev_data(N, 2.0, amp, seed, kmax=5)


class TestParams:
    def test_keeps_fraction(self):
        p = params(a=Fraction(1, 3))
        assert p.a == Fraction(1, 3) and p.a_float == pytest.approx(1 / 3)

    @pytest.mark.parametrize("a", [0.25, 1.0, 0.1])
    def test_domain(self, a):
        with pytest.raises(ConfigurationError):
            params(a=a)

    def test_steps_must_divide_horizon(self):
        with pytest.raises(ConfigurationError):
            params(dt=0.3, T=1.0).n_steps

    def test_forcing_f_mean_zero(self):
        with pytest.raises(InvariantViolation):
            params(gamma=0.1, forcing_f=SpectralField.from_modes(16, {0: 1.0}))

    def test_stability_guard(self):
        p = params(N=64, dt=1e-3, T=1.0)
        with pytest.raises(ConfigurationError):
            p.check_stability()
        params(N=128, dt=1e-4, T=1.0).check_stability()


class TestLinear:
    def test_linear_flow_is_exact(self):
        u0, v0 = smooth_data()
        p = params(nonlinear=False, T=0.5)
        tr = simulate((u0, v0), p)
        k = np.arange(17)
        assert np.allclose(tr.u[-1], u0.coeffs * linear_phase(k, 0.5, 0.5), atol=1e-13)
        assert np.allclose(tr.v[-1], v0.coeffs * linear_phase(k, 1, 0.5), atol=1e-13)

    def test_damped_linear_flow(self):
        u0, v0 = smooth_data()
        p = params(nonlinear=False, gamma=0.3, T=0.5)
        tr = simulate((u0, v0), p)
        assert np.allclose(tr.u[-1], propagate_linear(u0, 0.5, 0.5, 0.3).coeffs, atol=1e-13)


class TestNonlinearity:
    def test_single_mode_product(self):
        # u = cos x: (u^2)_2 = 1/4, so the u-equation gets -3ia*2*(1/4) at k = 2
        N = 8
        u = np.zeros(N + 1, complex)
        u[1] = 0.5
        nu, nv = nonlinear_terms(u, np.zeros_like(u), 0.5, -1.0, GridSpec(N).M)
        assert np.isclose(nu[2], -1j * 2 * 3 * 0.5 * 0.25)
        assert np.allclose(np.delete(nu, 2), 0)
        assert np.allclose(nv, 0)

    def test_u_mean_preserved_v_mean_not(self):
        u0, v0 = smooth_data(amp=1.0)
        nu, nv = rhs_conservative(u0, v0, params())
        assert nu.coeffs[0] == 0
        assert abs(nv.coeffs[0]) > 1e-6

    def test_requires_mean_zero_u(self):
        _, v0 = smooth_data()
        with pytest.raises(InvariantViolation):
            rhs_conservative(v0, v0, params())


class TestIntegrator:
    def test_fourth_order(self):
        u0, v0 = smooth_data(amp=1.0)
        ref = simulate((u0, v0), params(dt=1.25e-4, T=0.2)).u[-1]
        errs = [np.max(np.abs(simulate((u0, v0), params(dt=dt, T=0.2)).u[-1] - ref)) for dt in (2e-3, 1e-3)]
        assert 12 < errs[0] / errs[1] < 20

    def test_single_step_matches_simulate(self):
        u0, v0 = smooth_data()
        p = params(T=1e-3)
        u1, v1 = step_ifrk4((u0, v0), p)
        tr = simulate((u0, v0), p)
        assert np.allclose(u1.coeffs, tr.u[-1]) and np.allclose(v1.coeffs, tr.v[-1])

    def test_mean_u_exact_v_free(self):
        u0, v0 = smooth_data(amp=1.0)
        tr = simulate((u0, v0), params(T=0.2))
        assert np.all(tr.u[:, 0] == 0)
        assert np.ptp(tr.v[:, 0].real) > 1e-8

    def test_blow_up_detected(self):
        N = 16
        u0 = SpectralField.from_modes(N, {1: 1e13})
        with pytest.raises(BlowUpError) as info:
            simulate((u0, SpectralField.zeros(N)), params(N=N, nonlinear=False))
        assert info.value.time is not None

    def test_final_time_always_stored(self):
        u0, v0 = smooth_data()
        tr = simulate((u0, v0), params(T=0.1), sample_every=30)
        assert tr.times[-1] == pytest.approx(0.1)
        assert len(tr) == 5


class TestTrajectory:
    def test_jsonl_round_trip(self):
        u0, v0 = smooth_data()
        tr = simulate((u0, v0), params(T=0.01), sample_every=5)
        back = Trajectory.from_jsonl(tr.to_jsonl())
        assert np.array_equal(back.u, tr.u) and np.array_equal(back.times, tr.times)

    def test_must_start_at_zero(self):
        with pytest.raises(ConfigurationError):
            Trajectory(np.array([1.0]), np.zeros((1, 3)), np.zeros((1, 3)))

    def test_norms_csv_header(self):
        u0, v0 = smooth_data()
        tr = simulate((u0, v0), params(T=0.01), sample_every=10)
        head = tr.norms_csv((0.0, 1.0)).splitlines()[0]
        assert head == "t,u_H0,v_H0,u_H1,v_H1"
