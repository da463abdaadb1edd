"""Right-hand sides and integrating-factor RK4 time stepping.

Conservative system (gamma = 0, no forcing)::

    u_t + a u_xxx + 3a (u^2)_x + beta (v^2)_x = 0
    v_t +   v_xxx + 3 u v_x               = 0

and its damped-forced version with ``+ gamma u = f`` and ``+ gamma v = g``.
On the Fourier side the linear part is the diagonal symbol ``i a k^3 - gamma``
(resp. ``i k^3 - gamma``); the integrator treats it exactly and advances only
the quadratic nonlinearity and the forcing with classical RK4 stages.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BlowUpError, ConfigurationError, InvariantViolation
from .spectral import GridSpec, SpectralField, sobolev_norm_coeffs, to_physical, to_spectral

BLOWUP_THRESHOLD = 1e12
DEFAULT_STAB_CONST = 2.0


def _as_real(a):
    return float(a) if not isinstance(a, Fraction) else a


@dataclass(frozen=True, eq=False)
class HSParams:
    """Physical and numerical parameters of a run.

    ``a`` may be a :class:`fractions.Fraction` to keep the exact-arithmetic
    route open for the resonance analysis; the time stepper uses ``float(a)``.
    ``stab_const`` bounds the step through ``dt <= stab_const / N**2``.
    ``nonlinear=False`` switches the quadratic terms off (linear reference runs).
    """

    a: float | Fraction
    beta: float
    dt: float
    T: float
    grid: GridSpec
    gamma: float = 0.0
    forcing_f: SpectralField | None = None
    forcing_g: SpectralField | None = None
    stab_const: float = DEFAULT_STAB_CONST
    nonlinear: bool = True

    def __post_init__(self):
        object.__setattr__(self, "a", _as_real(self.a))
        if not Fraction(1, 4) < self.a < 1:
            raise ConfigurationError(f"a={self.a} must lie in (1/4, 1)")
        if self.gamma < 0:
            raise ConfigurationError(f"gamma={self.gamma} must be nonnegative")
        if not self.dt > 0:
            raise ConfigurationError(f"dt={self.dt} must be positive")
        if self.T < 0:
            raise ConfigurationError(f"T={self.T} must be nonnegative")
        N = self.grid.N
        f = self.forcing_f if self.forcing_f is not None else SpectralField.zeros(N, mean_zero=True)
        g = self.forcing_g if self.forcing_g is not None else SpectralField.zeros(N)
        if f.N != N or g.N != N:
            raise ConfigurationError("forcing truncation must match the grid")
        if f.coeffs[0] != 0:
            raise InvariantViolation("forcing f must be mean-zero")
        object.__setattr__(self, "forcing_f", f if f.mean_zero else f.with_mean_zero())
        object.__setattr__(self, "forcing_g", g)

    @property
    def N(self):
        return self.grid.N

    @property
    def a_float(self):
        return float(self.a)

    @property
    def conservative(self):
        return self.gamma == 0 and not self.has_forcing

    @property
    def has_forcing(self):
        return bool(np.any(self.forcing_f.coeffs) or np.any(self.forcing_g.coeffs))

    @property
    def n_steps(self):
        n = int(round(self.T / self.dt))
        if abs(n * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ConfigurationError(f"T={self.T} is not a whole number of steps dt={self.dt}")
        return n

    def replace(self, **changes):
        kw = {name: getattr(self, name) for name in self.__dataclass_fields__}
        kw.update(changes)
        return HSParams(**kw)

    def check_stability(self):
        limit = self.stab_const / self.N**2
        if self.dt > limit * (1 + 1e-12):
            raise ConfigurationError(
                f"dt={self.dt:g} exceeds stability budget stab_const/N^2={limit:g} (N={self.N})"
            )

    def to_dict(self):
        return {
            "a": str(self.a) if isinstance(self.a, Fraction) else self.a,
            "beta": self.beta,
            "gamma": self.gamma,
            "dt": self.dt,
            "T": self.T,
            "N": self.grid.N,
            "M": self.grid.M,
            "stab_const": self.stab_const,
            "nonlinear": self.nonlinear,
            "forcing_f": self.forcing_f.to_dict(),
            "forcing_g": self.forcing_g.to_dict(),
        }


def linear_phase(k, a, t):
    """``exp(i a k^3 t)``, the symbol of the free group ``exp(-t a d_x^3)``."""
    return np.exp(1j * float(a) * np.asarray(k, dtype=float) ** 3 * t)


def linear_symbols(N, a, gamma=0.0):
    k = np.arange(N + 1, dtype=float)
    return 1j * float(a) * k**3 - gamma, 1j * k**3 - gamma


def propagate_linear(field, a_or_one, t, gamma=0.0):
    """Apply ``exp(-(a d_x^3 + gamma) t)``: multiply ``c_k`` by ``exp(i a k^3 t - gamma t)``."""
    k = np.arange(field.N + 1, dtype=float)
    factor = np.exp((1j * float(a_or_one) * k**3 - gamma) * t)
    return SpectralField(field.coeffs * factor, mean_zero=field.mean_zero)


def nonlinear_terms(u, v, a, beta, M):
    """Quadratic terms of both equations on nonnegative-mode arrays.

    Returns ``(-3iak (u*u)_k - i beta k (v*v)_k, -3i sum k2 u_k1 v_k2)``; the
    products are formed on an ``M``-point grid, alias free when ``M > 3N``.
    """
    N = u.shape[-1] - 1
    k = np.arange(N + 1)
    phys = to_physical(np.stack([u, v, 1j * k * v]), M)
    up, vp, vxp = phys
    prods = to_spectral(np.stack([up * up, vp * vp, up * vxp]), N)
    nu = -1j * k * (3 * a * prods[0] + beta * prods[1])
    nv = -3.0 * prods[2]
    return nu, nv


def _require_mean_zero(u):
    if u.coeffs[0] != 0:
        raise InvariantViolation(f"u must be mean-zero, coeff(0)={u.coeffs[0].real!r}")


def rhs_conservative(u, v, p):
    """Nonlinear part of the Fourier-side conservative system."""
    _require_mean_zero(u)
    if u.N != p.N or v.N != p.N:
        raise ConfigurationError("field truncation does not match parameters")
    nu, nv = nonlinear_terms(u.coeffs, v.coeffs, p.a_float, p.beta, p.grid.M)
    return SpectralField(nu, mean_zero=True), SpectralField(nv)


def rhs_dissipative(u, v, p):
    """Nonlinearity plus forcing ``(f_k, g_k)``.

    The damping ``-gamma`` is part of the diagonal symbol handled by the
    integrating factor, so it is *not* included here.
    """
    nu, nv = rhs_conservative(u, v, p)
    return nu + p.forcing_f, nv + p.forcing_g


class IFRK4:
    """Integrating-factor RK4 stepper bound to one parameter set."""

    def __init__(self, p):
        p.check_stability()
        self.p = p
        self.dt = p.dt
        lu, lv = linear_symbols(p.N, p.a_float, p.gamma)
        self.eu_half = np.exp(lu * p.dt / 2)
        self.ev_half = np.exp(lv * p.dt / 2)
        self.eu = self.eu_half**2
        self.ev = self.ev_half**2
        self.fu = p.forcing_f.coeffs
        self.fv = p.forcing_g.coeffs
        self._a = p.a_float
        self._forced = p.has_forcing

    def rhs(self, u, v):
        p = self.p
        if p.nonlinear:
            nu, nv = nonlinear_terms(u, v, self._a, p.beta, p.grid.M)
        else:
            nu, nv = np.zeros_like(u), np.zeros_like(v)
        if self._forced:
            nu = nu + self.fu
            nv = nv + self.fv
        return nu, nv

    def step(self, u, v):
        dt, eu2, ev2, eu, ev = self.dt, self.eu_half, self.ev_half, self.eu, self.ev
        k1u, k1v = self.rhs(u, v)
        k2u, k2v = self.rhs(eu2 * (u + 0.5 * dt * k1u), ev2 * (v + 0.5 * dt * k1v))
        k3u, k3v = self.rhs(eu2 * u + 0.5 * dt * k2u, ev2 * v + 0.5 * dt * k2v)
        k4u, k4v = self.rhs(eu * u + dt * eu2 * k3u, ev * v + dt * ev2 * k3v)
        un = eu * u + dt / 6 * (eu * k1u + 2 * eu2 * (k2u + k3u) + k4u)
        vn = ev * v + dt / 6 * (ev * k1v + 2 * ev2 * (k2v + k3v) + k4v)
        return un, vn


def _check_finite(u, v, t):
    m = max(np.max(np.abs(u)), np.max(np.abs(v)))
    if not np.isfinite(m) or m > BLOWUP_THRESHOLD:
        raise BlowUpError(f"blow-up at t={t:.6g}: max |coeff| = {m:.3e}", time=t, max_abs=m)


def step_ifrk4(state, p):
    """Advance ``(u, v)`` by one step ``p.dt``."""
    u, v = state
    _require_mean_zero(u)
    un, vn = IFRK4(p).step(u.coeffs, v.coeffs)
    _check_finite(un, vn, p.dt)
    return SpectralField(un, mean_zero=True), SpectralField(vn)


@dataclass(eq=False)
class Trajectory:
    """Sampled solution. ``u`` and ``v`` are ``(samples, N+1)`` coefficient arrays."""

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    params: HSParams | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.u = np.asarray(self.u, dtype=complex)
        self.v = np.asarray(self.v, dtype=complex)
        if not (len(self.times) == len(self.u) == len(self.v)):
            raise ConfigurationError("times and states differ in length")
        if len(self.times) and self.times[0] != 0:
            raise ConfigurationError("trajectory must start at t=0")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def N(self):
        return self.u.shape[1] - 1

    def state(self, i):
        return SpectralField(self.u[i], mean_zero=True), SpectralField(self.v[i])

    @property
    def states(self):
        return [self.state(i) for i in range(len(self))]

    @property
    def initial(self):
        return self.state(0)

    @property
    def final(self):
        return self.state(-1)

    def norms(self, s, homogeneous=False):
        return sobolev_norm_coeffs(self.u, s, homogeneous), sobolev_norm_coeffs(self.v, s, homogeneous)

    def to_jsonl(self, fh=None):
        lines = []
        for i, t in enumerate(self.times):
            u, v = self.state(i)
            lines.append(json.dumps({"t": float(t), "u": u.to_dict(), "v": v.to_dict()}))
        text = "\n".join(lines) + "\n"
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def from_jsonl(cls, text):
        times, us, vs = [], [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            times.append(rec["t"])
            us.append(SpectralField.from_dict(rec["u"]).coeffs)
            vs.append(SpectralField.from_dict(rec["v"]).coeffs)
        return cls(np.array(times), np.array(us), np.array(vs))

    def norms_csv(self, s_values=(0.0, 1.0)):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"{name}_H{s:g}" for s in s_values for name in ("u", "v")])
        cols = []
        for s in s_values:
            cols.extend(self.norms(s))
        for i, t in enumerate(self.times):
            w.writerow([repr(float(t))] + [repr(float(c[i])) for c in cols])
        return buf.getvalue()


def simulate(initial, p, sample_every=1, callback=None):
    """Integrate from ``initial = (u0, v0)`` to ``p.T``, storing every ``sample_every`` steps.

    The final time is always stored. ``callback(t, u, v)`` (arrays) is invoked
    at every stored sample.
    """
    u0, v0 = initial
    _require_mean_zero(u0)
    if u0.N != p.N or v0.N != p.N:
        raise ConfigurationError("initial data truncation does not match the grid")
    if sample_every < 1:
        raise ConfigurationError("sample_every must be >= 1")
    n = p.n_steps
    stepper = IFRK4(p)
    u, v = u0.coeffs.copy(), v0.coeffs.copy()
    times, us, vs = [0.0], [u.copy()], [v.copy()]
    if callback is not None:
        callback(0.0, u, v)
    for i in range(1, n + 1):
        u, v = stepper.step(u, v)
        t = i * p.dt
        _check_finite(u, v, t)
        if i % sample_every == 0 or i == n:
            times.append(t)
            us.append(u.copy())
            vs.append(v.copy())
            if callback is not None:
                callback(t, u, v)
    return Trajectory(np.array(times), np.array(us), np.array(vs), params=p)
