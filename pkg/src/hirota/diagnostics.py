"""Energy monitors, smoothing measurements and long-time probes.

Spatial integrals over the torus are taken as ``2 pi`` times the grid mean,
so ``E1(cos x, 0) = pi``. In coefficient terms ``int |u|^2 = 2 pi sum |c_k|^2``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DiagnosticError
from .normal_form import NormalForm, cumulative_simpson_even
from .spectral import GridSpec, SpectralField, sobolev_norm_coeffs, to_physical
from .system import HSParams, Trajectory, simulate

TWO_PI = 2 * np.pi
BLOCK_J0 = 3


def _coeffs(x):
    return x.coeffs if isinstance(x, SpectralField) else np.asarray(x)


def _l2_sq(c):
    """``int |u|^2`` for (stacked) coefficient arrays."""
    return TWO_PI * sobolev_norm_coeffs(c, 0.0) ** 2


def energy_E1(u, v, beta):
    """``int u^2 - (2 beta / 3) v^2``."""
    return float(_l2_sq(_coeffs(u)) - 2 * beta / 3 * _l2_sq(_coeffs(v)))


def _energy_E2_arrays(u, v, a, beta, M):
    N = u.shape[-1] - 1
    k = np.arange(N + 1)
    up, vp, uxp, vxp = (to_physical(c, M) for c in (u, v, 1j * k * u, 1j * k * v))
    dens = (1 - a) * uxp**2 - 2 * beta * vxp**2 - 2 * (1 - a) * up**3 + 2 * beta * up * vp**2
    return TWO_PI * np.mean(dens, axis=-1)


def energy_E2(u, v, a, beta, grid=None):
    """``int (1-a) u_x^2 - 2 beta v_x^2 - 2(1-a) u^3 + 2 beta u v^2`` on the dealiased grid."""
    u, v = _coeffs(u), _coeffs(v)
    M = (grid or GridSpec(u.shape[-1] - 1)).M
    return float(_energy_E2_arrays(u, v, float(a), beta, M))


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    E1: float
    E2: float
    H1_u: float
    H1_v: float
    mean_u: float
    mean_v: float


@dataclass
class EnergySeries:
    records: list

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def relative_drift(self, name):
        """``max_t |E(t) - E(0)| / |E(0)|``."""
        x = self.column(name)
        return float(np.max(np.abs(x - x[0])) / abs(x[0]))

    def to_long_rows(self):
        rows = []
        for r in self.records:
            for q in ("E1", "E2", "H1_u", "H1_v", "mean_u", "mean_v"):
                rows.append((r.t, q, getattr(r, q)))
        return rows


def energy_series(traj, p):
    """Energies, ``H^1`` norms and means at every stored sample."""
    e1 = TWO_PI * (sobolev_norm_coeffs(traj.u, 0) ** 2 - 2 * p.beta / 3 * sobolev_norm_coeffs(traj.v, 0) ** 2)
    e2 = _energy_E2_arrays(traj.u, traj.v, p.a_float, p.beta, p.grid.M)
    h1u, h1v = traj.norms(1.0)
    recs = [
        EnergyRecord(float(t), float(e1[i]), float(e2[i]), float(h1u[i]), float(h1v[i]),
                     float(traj.u[i, 0].real), float(traj.v[i, 0].real))
        for i, t in enumerate(traj.times)
    ]
    return EnergySeries(recs)


# --- data -----------------------------------------------------------------


def random_sobolev_data(N, s, amplitude=1.0, seed=0, kmax=None, normalize=None):
    """Random pair ``(u0, v0)`` with ``|c_k| = amplitude <k>^{-s-1/2-0.01}`` and uniform phases.

    ``u0`` is mean-zero, ``v0`` gets a real mean of the same size as mode 0.
    ``kmax`` zeroes the modes above it. ``normalize=(sigma, R)`` rescales both
    fields to ``H^sigma`` norm ``R``.
    """
    rng = np.random.default_rng(seed)
    k = np.arange(N + 1)
    mag = amplitude * (1.0 + k**2) ** (-(s + 0.51) / 2)
    if kmax is not None:
        mag[k > kmax] = 0
    fields = []
    for mean_zero in (True, False):
        c = mag * np.exp(2j * np.pi * rng.random(N + 1))
        c[0] = 0 if mean_zero else mag[0] * np.sign(rng.standard_normal())
        if normalize is not None:
            sigma, R = normalize
            c *= R / sobolev_norm_coeffs(c, sigma)
        fields.append(SpectralField(c, mean_zero=mean_zero))
    return tuple(fields)


def forcing_pair(N, seed, h1_norm=1.0, kmax=4):
    """Smooth forcing ``(f, g)`` with ``f`` mean-zero, each of ``H^1`` norm ``h1_norm``."""
    rng = np.random.default_rng(seed)
    out = []
    for mean_zero in (True, False):
        c = np.zeros(N + 1, complex)
        c[1 : kmax + 1] = rng.standard_normal(kmax) + 1j * rng.standard_normal(kmax)
        if not mean_zero:
            c[0] = rng.standard_normal()
        c *= h1_norm / sobolev_norm_coeffs(c, 1.0)
        out.append(SpectralField(c, mean_zero=mean_zero))
    return tuple(out)


# --- smoothing ------------------------------------------------------------


def dyadic_tail_slope(coeffs, j0=BLOCK_J0):
    """Slope of ``log`` block-RMS ``|c_k|`` against ``log k`` over blocks ``[2^j, 2^{j+1})``."""
    c = np.abs(np.asarray(coeffs))
    N = len(c) - 1
    centers, rms = [], []
    j = j0
    while 2 ** (j + 1) - 1 <= N:
        block = c[2**j : 2 ** (j + 1)]
        centers.append(np.sqrt(2.0**j * (2 ** (j + 1) - 1)))
        rms.append(np.sqrt(np.mean(block**2)))
        j += 1
    if len(rms) < 2:
        raise DiagnosticError(f"N={N} leaves fewer than two dyadic blocks above 2^{j0}")
    rms = np.array(rms)
    if np.any(rms == 0):
        return -math.inf
    return float(np.polyfit(np.log(centers), np.log(rms), 1)[0])


@dataclass
class SmoothingReport:
    s: float
    a: object
    s1_grid: tuple
    times: np.ndarray
    residual_u: np.ndarray  # (samples, len(s1_grid))
    residual_v: np.ndarray
    slope_u: float
    slope_diff_u: float
    slope_v: float
    slope_diff_v: float

    @property
    def gain_u(self):
        return self.slope_u - self.slope_diff_u

    @property
    def gain_v(self):
        return self.slope_v - self.slope_diff_v

    @property
    def empirical_gain(self):
        return self.gain_u

    def to_dict(self):
        return {
            "s": self.s,
            "a": str(self.a),
            "s1_grid": list(self.s1_grid),
            "times": self.times.tolist(),
            "residual_u": self.residual_u.tolist(),
            "residual_v": self.residual_v.tolist(),
            "slope_u": self.slope_u,
            "slope_diff_u": self.slope_diff_u,
            "slope_v": self.slope_v,
            "slope_diff_v": self.slope_diff_v,
            "gain_u": self.gain_u,
            "gain_v": self.gain_v,
            "empirical_gain": self.empirical_gain,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    def to_long_rows(self):
        rows = []
        for i, t in enumerate(self.times):
            for j, s1 in enumerate(self.s1_grid):
                rows.append((float(t), f"residual_u_H{s1:g}", float(self.residual_u[i, j])))
                rows.append((float(t), f"residual_v_H{s1:g}", float(self.residual_v[i, j])))
        return rows


def linear_difference(traj, p):
    """``u(t) - e^{-t(a d^3 + gamma)} u0`` and the ``v`` analogue, per sample."""
    k = np.arange(traj.N + 1, dtype=float)
    t = traj.times[:, None]
    eu = np.exp((1j * p.a_float * k**3 - p.gamma) * t)
    ev = np.exp((1j * k**3 - p.gamma) * t)
    return traj.u - eu * traj.u[0], traj.v - ev * traj.v[0]


def smoothing_report(traj, p, s, s1_grid):
    du, dv = linear_difference(traj, p)
    s1_grid = tuple(float(x) for x in s1_grid)
    res_u = np.stack([sobolev_norm_coeffs(du, s1) for s1 in s1_grid], axis=1)
    res_v = np.stack([sobolev_norm_coeffs(dv, s1) for s1 in s1_grid], axis=1)
    return SmoothingReport(
        s=s,
        a=p.a,
        s1_grid=s1_grid,
        times=traj.times,
        residual_u=res_u,
        residual_v=res_v,
        slope_u=dyadic_tail_slope(traj.u[-1]),
        slope_diff_u=dyadic_tail_slope(du[-1]),
        slope_v=dyadic_tail_slope(traj.v[-1]),
        slope_diff_v=dyadic_tail_slope(dv[-1]),
    )


def smoothing_experiment(s, a, amplitude, seed, T, s1_grid, p=None, N=256, beta=-1.0, dt=None, n_samples=20):
    """Run from random ``H^s``-tail data and measure how much smoother the nonlinear part is.

    The empirical gain is the difference between the fitted dyadic tail
    slopes of ``u(T)`` and of ``u(T) - e^{-Ta d^3} u0``.
    """
    if not s > 0.5:
        raise ConfigurationError(f"smoothing needs s > 1/2, got {s}")
    if p is None:
        grid = GridSpec(N)
        dt = dt if dt is not None else smoothing_dt(N, T)
        p = HSParams(a=a, beta=beta, dt=dt, T=T, grid=grid)
    data = random_sobolev_data(p.N, s, amplitude, seed)
    every = max(1, p.n_steps // n_samples)
    traj = simulate(data, p, sample_every=every)
    return smoothing_report(traj, p, s, s1_grid)


def smoothing_dt(N, T, stab_const=2.0, phase_budget=64.0):
    # the step must also keep N^3 dt bounded: coarser steps alias the fast
    # nonlinear phases onto the high modes and swamp the measured tail
    n = math.ceil(T * max(N * N / stab_const, N**3 / phase_budget))
    return T / n


# --- dissipative ----------------------------------------------------------


@dataclass
class DissipativeReport:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    tol: float
    decay_deviation: float | None = None

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def violations(self):
        return np.flatnonzero(self.margin < -self.tol)

    @property
    def ok(self):
        return len(self.violations) == 0

    @property
    def min_margin(self):
        return float(np.min(self.margin))

    def to_dict(self):
        return {
            "ok": self.ok,
            "min_margin": self.min_margin,
            "violations": self.violations.tolist(),
            "decay_deviation": self.decay_deviation,
            "times": self.times.tolist(),
            "lhs": self.lhs.tolist(),
            "rhs": self.rhs.tolist(),
        }

    def to_long_rows(self):
        return [(float(t), q, float(x)) for t, l, r in zip(self.times, self.lhs, self.rhs) for q, x in (("lhs", l), ("rhs", r))]


def _l2(c):
    return np.sqrt(_l2_sq(c))


def dissipative_energy_check(traj, p, tol=1e-6):
    """Both sides of the integrated ``L^2`` bound for the damped-forced flow.

    ``|u| + sqrt(-2 beta/3) |v| <= sqrt(2) e^{-gt} sqrt(E1(0)) + (1 - e^{-gt})/g (2|f| + sqrt(-2 beta)|g|)``.
    Violations are reported, not raised. For unforced runs ``decay_deviation``
    is ``max |E1(t) e^{2 g t} / E1(0) - 1|``.
    """
    if not p.beta < 0:
        raise ConfigurationError("the energy bound needs beta < 0")
    if not p.gamma > 0:
        raise ConfigurationError("the energy bound needs gamma > 0")
    g, b = p.gamma, p.beta
    t = traj.times
    lhs = _l2(traj.u) + math.sqrt(-2 * b / 3) * _l2(traj.v)
    e10 = energy_E1(traj.u[0], traj.v[0], b)
    forcing = 2 * _l2(p.forcing_f.coeffs) + math.sqrt(-2 * b) * _l2(p.forcing_g.coeffs)
    decay = np.exp(-g * t)
    rhs = math.sqrt(2) * decay * math.sqrt(e10) + (1 - decay) / g * forcing
    dev = None
    if not p.has_forcing and e10 > 0:
        e1 = TWO_PI * (sobolev_norm_coeffs(traj.u, 0) ** 2 - 2 * b / 3 * sobolev_norm_coeffs(traj.v, 0) ** 2)
        dev = float(np.max(np.abs(e1 * np.exp(2 * g * t) / e10 - 1)))
    return DissipativeReport(t, lhs, rhs, tol, dev)


def absorbing_radius(p, safety=2.0):
    """Radius of a ball in ``H^1 x H^1`` that damped-forced trajectories enter.

    The asymptotic ``L^2`` bound ``(2|f| + sqrt(-2 beta)|g|)/gamma`` is
    evaluated with ``H^1`` forcing norms, converted to the product norm and
    multiplied by ``safety``; this is a heuristic radius, not a sharp one.
    """
    b = p.beta
    if not b < 0 or not p.gamma > 0:
        raise ConfigurationError("absorbing radius needs beta < 0 and gamma > 0")
    f1 = sobolev_norm_coeffs(p.forcing_f.coeffs, 1.0)
    g1 = sobolev_norm_coeffs(p.forcing_g.coeffs, 1.0)
    conv = math.sqrt(1 + 3 / (-2 * b))
    return float(safety * conv * (2 * f1 + math.sqrt(-2 * b) * g1) / p.gamma)


def h1_product_norm(traj):
    nu, nv = traj.norms(1.0)
    return np.sqrt(nu**2 + nv**2)


@dataclass
class AbsorbingResult:
    entry_time: float | None
    stays: bool
    sup_after_entry: float | None
    initial_norm: float

    @property
    def flagged(self):
        return self.entry_time is None or not self.stays


@dataclass
class AbsorbingReport:
    radius: float
    results: list

    @property
    def all_enter_and_stay(self):
        return all(not r.flagged for r in self.results)

    @property
    def entry_times(self):
        return [r.entry_time for r in self.results]

    @property
    def median_entry(self):
        ts = [r.entry_time for r in self.results if r.entry_time is not None]
        return float(np.median(ts)) if ts else math.inf

    def to_dict(self):
        return {"radius": self.radius, "results": [r.__dict__ for r in self.results]}


def absorbing_entry(traj, radius):
    norm = h1_product_norm(traj)
    inside = norm <= radius
    if not inside.any():
        return AbsorbingResult(None, False, None, float(norm[0]))
    i = int(np.argmax(inside))
    return AbsorbingResult(float(traj.times[i]), bool(inside[i:].all()), float(norm[i:].max()), float(norm[0]))


def _probe_one(args):
    data, p, every, radius = args
    return absorbing_entry(simulate(data, p, sample_every=every), radius)


def absorbing_ball_probe(initial_set, p, T_max=None, radius=None, sample_every=10, jobs=1):
    """Entry time into the absorbing ball and post-entry sup norm for each initial datum."""
    if T_max is not None:
        p = p.replace(T=T_max)
    radius = absorbing_radius(p) if radius is None else radius
    work = [(d, p, sample_every, radius) for d in initial_set]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_probe_one, work))
    else:
        results = [_probe_one(w) for w in work]
    return AbsorbingReport(radius, results)


# --- attractor ------------------------------------------------------------


@dataclass
class AttractorReport:
    alpha: float
    times: np.ndarray
    remainder_norm: np.ndarray
    solution_norm: np.ndarray
    trend_slope: float

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "trend_slope": self.trend_slope,
            "times": self.times.tolist(),
            "remainder_norm": self.remainder_norm.tolist(),
            "solution_norm": self.solution_norm.tolist(),
        }

    def to_long_rows(self):
        rows = []
        for t, r, s in zip(self.times, self.remainder_norm, self.solution_norm):
            rows.append((float(t), "remainder", float(r)))
            rows.append((float(t), "solution", float(s)))
        return rows


def second_half_slope(times, values):
    h = len(times) // 2
    if len(times) - h < 2:
        raise DiagnosticError("too few samples for a trend fit")
    return float(np.polyfit(times[h:], values[h:], 1)[0])


def attractor_regularity_probe(traj, p, alpha, rc):
    """``H^{1+alpha}`` norm of ``u(t) - e^{-(a d^3 + g)t} u0 - int e^{-(a d^3 + g)(t-r)} rho2(v,v) dr``.

    The resonant integral only appears in the rational case, where it is
    integrated by composite Simpson on the even-indexed samples.
    """
    if not alpha < 0.5:
        raise ConfigurationError(f"alpha={alpha} must be below 1/2")
    du, _ = linear_difference(traj, p)
    times = traj.times
    if rc.is_rational_case:
        h = times[1] - times[0]
        if not np.allclose(np.diff(times), h, rtol=1e-9):
            raise DiagnosticError("rational-case probe needs uniformly spaced samples")
        n = len(times) if len(times) % 2 else len(times) - 1
        nf = NormalForm(rc, p.beta, traj.N)
        k = np.arange(traj.N + 1, dtype=float)
        lam = 1j * p.a_float * k**3 - p.gamma
        x = np.array([np.exp(-lam * times[i]) * nf.rho(2, traj.v[i], traj.v[i]) for i in range(n)])
        integ = cumulative_simpson_even(x, h)
        times = times[:n:2]
        du = du[:n:2] - np.exp(lam * times[:, None]) * integ
        sol = traj.u[:n:2]
    else:
        sol = traj.u
    rem = sobolev_norm_coeffs(du, 1 + alpha)
    soln = sobolev_norm_coeffs(sol, 1 + alpha)
    return AttractorReport(alpha, times, rem, soln, second_half_slope(times, rem))


# --- growth ---------------------------------------------------------------


@dataclass
class GrowthReport:
    s: float
    times: np.ndarray
    running_max: np.ndarray
    exponent: float


def growth_monitor(traj, s):
    """Exponent of a log-log fit of ``sup_{[0,t]} (|u|_{H^s} + |v|_{H^s})`` against ``1 + t``.

    Reported only; no bound is asserted.
    """
    nu, nv = traj.norms(s)
    run = np.maximum.accumulate(nu + nv)
    t = traj.times
    if len(t) < 3:
        raise DiagnosticError("need at least 3 samples")
    expo = float(np.polyfit(np.log1p(t[1:]), np.log(run[1:]), 1)[0])
    return GrowthReport(s, t, run, expo)


# --- export ---------------------------------------------------------------


def long_table_csv(rows, fh=None):
    """Write ``(t, quantity, value)`` rows as CSV."""
    buf = fh or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "quantity", "value"])
    for t, q, x in rows:
        w.writerow([repr(float(t)), q, repr(float(x))])
    return buf.getvalue() if fh is None else None
