"""Differentiation-by-parts operators for the coupled KdV system.

Writing ``f_k = exp(-i a k^3 t) u_k`` and ``g_k = exp(-i k^3 t) v_k`` and
integrating the quadratic terms by parts in time turns them into boundary
terms (the bilinear ``B`` operators), cubic remainders (the ``R`` operators)
and resonant corrections (the ``rho`` operators)::

    d/dt( e^{-iak^3t} [u_k + B1(u,u)_k + B2(v,v)_k] )
        = e^{-iak^3t} [R1(u,v,v) + R2(u,u,u) + R3(u,v,v) + rho1(u,u) + rho2(v,v)]_k
    d/dt( e^{-ik^3t} [v_k + B3(u,v)_k] )
        = e^{-ik^3t} [R4(u,u,v) + beta/(3a) R4(v,v,v) + R5(u,u,v) + rho3(u,v)]_k

The resonance functions factor as

    a k^3 - k1^3 - k2^3 = -3k (k1 - r1 k)(k1 - r2 k)
    k^3 - a k1^3 - k2^3 = (1-a) k1 (k1 - rt1 k)(k1 - rt2 k)      (k1 + k2 = k)

with ``r1,2 = 1/2 +- sqrt(12a - 3)/6`` and ``rt_j = 1/r_j``. Starred sums skip
terms whose denominator vanishes; that set is decided with exact rational
arithmetic whenever ``a`` is known exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, DiagnosticError, DomainError, InvariantViolation, ResonanceError
from .spectral import SpectralField

EPS_RES = 1e-9
_SNAP_DENOMINATOR = 10**6
_SNAP_A_DENOMINATOR = 64


def _parse_a(a):
    if isinstance(a, str):
        return Fraction(a.strip())
    if isinstance(a, (int, Fraction)):
        return Fraction(a)
    return float(a)


def _rational_sqrt(x):
    """Exact square root of a nonnegative Fraction, or None if irrational."""
    p, q = x.numerator, x.denominator
    sp, sq = math.isqrt(p), math.isqrt(q)
    if sp * sp == p and sq * sq == q:
        return Fraction(sp, sq)
    return None


@dataclass(frozen=True)
class ResonanceCoefficients:
    """Roots governing the resonant sets for a given coupling ``a``.

    ``a_exact`` is set whenever the exact rational value of ``a`` is known:
    Fraction input, a float within 1e-15 of a fraction with denominator at
    most 64, or a float within 1e-15 of a rational-case value. ``rational_case = (p, q)`` means ``r1 = p/q`` exactly.
    """

    a: float | Fraction
    rho_a: float
    r1: float
    r2: float
    rt1: float
    rt2: float
    a_exact: Fraction | None = None
    rational_case: tuple[int, int] | None = None
    exact_roots: tuple[Fraction, Fraction, Fraction, Fraction] | None = field(default=None, repr=False)

    @property
    def a_float(self):
        return float(self.a)

    @property
    def is_rational_case(self):
        return self.rational_case is not None


def compute_coefficients(a):
    """Resonance roots ``r1, r2``, their reciprocals and the rational-case test.

    ``a`` may be a float, a Fraction, an int or a ``"p/q"`` string.
    """
    a = _parse_a(a)
    if not Fraction(1, 4) < a < 1:
        raise DomainError(f"a={a} must lie in (1/4, 1)")
    a_exact = a if isinstance(a, Fraction) else None
    rho_exact = None
    if a_exact is None:
        near = Fraction(a).limit_denominator(_SNAP_A_DENOMINATOR)
        if abs(float(near) - a) <= 1e-15:
            a_exact = near
    if a_exact is not None:
        rho_exact = _rational_sqrt(12 * a_exact - 3)
    else:
        guess = Fraction(math.sqrt(12 * a - 3)).limit_denominator(_SNAP_DENOMINATOR)
        snapped = (guess * guess + 3) / 12
        if guess > 0 and abs(float(snapped) - a) <= 1e-15:
            rho_exact, a_exact = guess, snapped

    if rho_exact is not None:
        r1 = Fraction(1, 2) + rho_exact / 6
        r2 = Fraction(1, 2) - rho_exact / 6
        roots = (r1, r2, 1 / r1, 1 / r2)
        return ResonanceCoefficients(
            a=a,
            rho_a=float(rho_exact),
            r1=float(r1),
            r2=float(r2),
            rt1=float(roots[2]),
            rt2=float(roots[3]),
            a_exact=a_exact,
            rational_case=(r1.numerator, r1.denominator),
            exact_roots=roots,
        )
    rho = math.sqrt(12 * float(a) - 3)
    r1 = 0.5 + rho / 6
    r2 = 0.5 - rho / 6
    return ResonanceCoefficients(
        a=a, rho_a=rho, r1=r1, r2=r2, rt1=1 / r1, rt2=1 / r2, a_exact=a_exact
    )


def rational_case_a(p, q):
    """The coupling ``(3p(p-q) + q^2)/q^2`` for which ``r1 = p/q``."""
    if not (q / 2 < p < q):
        raise DomainError(f"need q/2 < p < q, got p={p}, q={q}")
    return Fraction(3 * p * (p - q) + q * q, q * q)


# --- resonance functions --------------------------------------------------


def denom_uu(k, k1, a):
    """``a k^3 - k1^3 - k2^3`` with ``k2 = k - k1``."""
    k = np.asarray(k)
    k1 = np.asarray(k1)
    k2 = k - k1
    return float(a) * k.astype(float) ** 3 - k1.astype(float) ** 3 - k2.astype(float) ** 3


def denom_uv(k, k1, a):
    """``k^3 - a k1^3 - k2^3`` with ``k2 = k - k1``."""
    k = np.asarray(k)
    k1 = np.asarray(k1)
    k2 = k - k1
    return k.astype(float) ** 3 - float(a) * k1.astype(float) ** 3 - k2.astype(float) ** 3


def factored_uu(k, k1, rc):
    k = np.asarray(k, dtype=float)
    k1 = np.asarray(k1, dtype=float)
    return -3 * k * (k1 - rc.r1 * k) * (k1 - rc.r2 * k)


def factored_uv(k, k1, rc):
    k = np.asarray(k, dtype=float)
    k1 = np.asarray(k1, dtype=float)
    return (1 - rc.a_float) * k1 * (k1 - rc.rt1 * k) * (k1 - rc.rt2 * k)


def _exact_numerator(kind, k, k1, a_exact):
    """Integer ``q * D`` where ``a = p/q``; exact zero test for the resonance function."""
    p, q = a_exact.numerator, a_exact.denominator
    big = max(abs(p), q) > 10**9 or np.max(np.abs(k), initial=0) > 10**5
    dtype = object if big else np.int64
    k = np.asarray(k).astype(dtype)
    k1 = np.asarray(k1).astype(dtype)
    k2 = k - k1
    if kind == "uu":
        return p * k**3 - q * (k1**3 + k2**3)
    return q * (k**3 - k2**3) - p * k1**3


def zero_denominator_mask(kind, k, k1, rc, eps_res=EPS_RES):
    """Boolean mask of exactly vanishing resonance functions.

    ``kind`` is ``"uu"`` for ``a k^3 - k1^3 - k2^3`` or ``"uv"`` for
    ``k^3 - a k1^3 - k2^3``. Without an exact value of ``a`` only the
    structural zeros (``k = 0`` resp. ``k1 = 0``) are recognised; any other
    denominator below ``eps_res * max(1, |k|^3)`` raises :class:`ResonanceError`.
    """
    k = np.asarray(k)
    k1 = np.asarray(k1)
    k, k1 = np.broadcast_arrays(k, k1)
    if rc.a_exact is not None:
        return np.asarray(_exact_numerator(kind, k, k1, rc.a_exact) == 0, dtype=bool)
    if kind == "uu":
        structural = k == 0
        d = denom_uu(k, k1, rc.a)
    else:
        structural = k1 == 0
        d = denom_uv(k, k1, rc.a)
    scale = np.maximum(1.0, np.abs(k.astype(float)) ** 3)
    near = (np.abs(d) < eps_res * scale) & ~structural
    if np.any(near):
        idx = np.argwhere(near)[0]
        raise ResonanceError(
            f"{kind} denominator {d[tuple(idx)]:.3e} at k={k[tuple(idx)]}, k1={k1[tuple(idx)]} "
            f"is numerically zero for a={rc.a}; supply a as an exact fraction"
        )
    return np.asarray(structural, dtype=bool)


def is_resonant(kind, k, k1, rc, eps_res=EPS_RES):
    return bool(zero_denominator_mask(kind, k, k1, rc, eps_res))


# --- operators ------------------------------------------------------------


def _full(x, N=None):
    if isinstance(x, SpectralField):
        return x.full()
    x = np.asarray(x, dtype=complex)
    return np.concatenate([np.conj(x[:0:-1]), x])


def _mode0(x):
    return x.coeffs[0] if isinstance(x, SpectralField) else np.asarray(x)[0]


def _require_mean_zero(x, what):
    if _mode0(x) != 0:
        raise InvariantViolation(f"{what} requires a mean-zero argument (coeff(0) != 0)")


def _n_of(x):
    return x.N if isinstance(x, SpectralField) else np.asarray(x).shape[-1] - 1


@dataclass
class NormalFormTerms:
    """All boundary, cubic and resonant terms for one state ``(u, v)``."""

    B1: SpectralField
    B2: SpectralField
    B3: SpectralField
    R1: SpectralField
    R2: SpectralField
    R3: SpectralField
    R4: SpectralField
    R4vvv: SpectralField
    R5: SpectralField
    rho1: SpectralField
    rho2: SpectralField
    rho3: SpectralField


class NormalForm:
    """Operator set bound to ``(rc, beta, N)``; kernels are built once and cached.

    Every operator returns the nonnegative output modes ``k = 0..N`` (or the
    subset ``modes``) as a complex array; the negative modes follow from
    Hermitian symmetry of the kernels.
    """

    def __init__(self, rc, beta, N, eps_res=EPS_RES):
        self.rc = rc
        self.beta = float(beta)
        self.N = int(N)
        self.eps_res = eps_res
        self.a = rc.a_float
        self._cache = {}

    # kernels -------------------------------------------------------------

    def _bilinear_kernel(self, j, modes):
        key = ("B", j, modes)
        if key in self._cache:
            return self._cache[key]
        N = self.N
        k = np.array(modes)[:, None]
        k1 = np.arange(-N, N + 1)[None, :]
        k, k1 = np.broadcast_arrays(k, k1)
        k2 = k - k1
        valid = np.abs(k2) <= N
        kf, k1f, k2f = (x.astype(float) for x in (k, k1, k2))
        with np.errstate(divide="ignore", invalid="ignore"):
            if j == 1:
                valid &= (k1 != 0) & (k2 != 0)
                ker = -1.0 / (k1f * k2f)
            elif j == 2:
                valid &= ~zero_denominator_mask("uu", k, k1, self.rc, self.eps_res)
                ker = -self.beta * kf / denom_uu(k, k1, self.a)
            elif j == 3:
                valid &= ~zero_denominator_mask("uv", k, k1, self.rc, self.eps_res)
                ker = -3.0 * k2f / denom_uv(k, k1, self.a)
            else:
                raise ConfigurationError(f"no bilinear operator B{j}")
        ker = np.where(valid, ker, 0.0)
        idx2 = np.clip(k2 + N, 0, 2 * N)
        out = (ker, k1 + N, idx2)
        self._cache[key] = out
        return out

    def _trilinear_kernel(self, j, modes):
        key = ("R", j, modes)
        if key in self._cache:
            return self._cache[key]
        N, a, rc = self.N, self.a, self.rc
        k = np.array(modes)[:, None, None]
        k1 = np.arange(-N, N + 1)[None, :, None]
        k2 = np.arange(-N, N + 1)[None, None, :]
        k, k1, k2 = np.broadcast_arrays(k, k1, k2)
        k3 = k - k1 - k2
        valid = np.abs(k3) <= N
        kf, k1f, k2f, k3f = (x.astype(float) for x in (k, k1, k2, k3))
        with np.errstate(divide="ignore", invalid="ignore"):
            if j == 1:
                m = k1 + k2
                valid &= ~zero_denominator_mask("uu", k, m, rc, self.eps_res)
                mf = m.astype(float)
                ker = -2j * self.beta * k2f / ((mf - rc.r1 * kf) * (mf - rc.r2 * kf))
            elif j == 2:
                valid &= (k1 != 0) & ((k1 + k2) * (k2 + k3) * (k3 + k1) != 0)
                ker = 6j * a / k1f
            elif j == 3:
                valid &= (k1 != 0) & (k2 + k3 != 0)
                ker = 2j * self.beta / k1f
            elif j == 4:
                m = k1 + k2
                valid &= ~zero_denominator_mask("uv", k, m, rc, self.eps_res)
                ker = 9j * a * k3f * m / denom_uv(k, m, a)
            elif j == 5:
                valid &= ~zero_denominator_mask("uv", k, k1, rc, self.eps_res)
                ker = 9j * k3f * (k2f + k3f) / denom_uv(k, k1, a)
            else:
                raise ConfigurationError(f"no trilinear operator R{j}")
        ker = np.where(valid, ker, 0.0).astype(complex)
        idx3 = np.clip(k3 + N, 0, 2 * N)
        out = (ker, idx3)
        self._cache[key] = out
        return out

    def _modes(self, modes):
        if modes is None:
            return tuple(range(self.N + 1))
        modes = tuple(int(m) for m in modes)
        if any(abs(m) > self.N for m in modes):
            raise ConfigurationError("requested output mode beyond truncation")
        return modes

    def _check(self, *xs):
        for x in xs:
            if _n_of(x) != self.N:
                raise ConfigurationError(f"argument truncation {_n_of(x)} != {self.N}")

    # operators -----------------------------------------------------------

    def B(self, j, f, g, modes=None):
        self._check(f, g)
        if j == 1:
            _require_mean_zero(f, "B1")
            _require_mean_zero(g, "B1")
        elif j == 3:
            _require_mean_zero(f, "B3")
        modes = self._modes(modes)
        ker, i1, i2 = self._bilinear_kernel(j, modes)
        ff, gf = _full(f), _full(g)
        return np.sum(ker * ff[i1] * gf[i2], axis=1)

    def R(self, j, f, g, h, modes=None):
        self._check(f, g, h)
        if j in (2, 3):
            _require_mean_zero(f, f"R{j}")
        modes = self._modes(modes)
        ker, i3 = self._trilinear_kernel(j, modes)
        ff, gf, hf = _full(f), _full(g), _full(h)
        return np.einsum("kab,a,b,kab->k", ker, ff, gf, hf[i3])

    def rho(self, j, f, g, modes=None):
        self._check(f, g)
        modes = np.array(self._modes(modes))
        ff, gf = _full(f), _full(g)
        N, rc = self.N, self.rc
        out = np.zeros(len(modes), dtype=complex)
        if j == 1:
            nz = modes != 0
            kk = modes[nz]
            out[nz] = -6j * self.a / kk * np.abs(ff[kk + N]) ** 2 * gf[kk + N]
            return out
        if j not in (2, 3):
            raise ConfigurationError(f"no resonant operator rho{j}")
        if not rc.is_rational_case:
            return out
        r1, r2, rt1, rt2 = rc.exact_roots
        for i, k in enumerate(modes):
            k = int(k)
            if j == 2:
                i1, i2 = r1 * k, r2 * k
                if i1.denominator == 1 and abs(i1) <= N and abs(i2) <= N:
                    out[i] = -2j * self.beta * k * ff[int(i1) + N] * gf[int(i2) + N]
            else:
                total = 0j
                for rt in (rt1, rt2):
                    i1, i2 = rt * k, (1 - rt) * k
                    if i1.denominator == 1 and abs(i1) <= N and abs(i2) <= N:
                        total += float(1 - rt) * ff[int(i1) + N] * gf[int(i2) + N]
                out[i] = -3j * k * total
        return out

    def terms(self, u, v, modes=None):
        """Every operator evaluated on the state ``(u, v)`` as in the normal form."""
        def wrap(x):
            return x if modes is not None else SpectralField(x)

        return NormalFormTerms(
            B1=wrap(self.B(1, u, u, modes)),
            B2=wrap(self.B(2, v, v, modes)),
            B3=wrap(self.B(3, u, v, modes)),
            R1=wrap(self.R(1, u, v, v, modes)),
            R2=wrap(self.R(2, u, u, u, modes)),
            R3=wrap(self.R(3, u, v, v, modes)),
            R4=wrap(self.R(4, u, u, v, modes)),
            R4vvv=wrap(self.R(4, v, v, v, modes)),
            R5=wrap(self.R(5, u, u, v, modes)),
            rho1=wrap(self.rho(1, u, u, modes)),
            rho2=wrap(self.rho(2, v, v, modes)),
            rho3=wrap(self.rho(3, u, v, modes)),
        )


def _operator_set(rc, beta, N, eps_res):
    return NormalForm(rc, beta, N, eps_res)


def bilinear_B(j, f, g, rc, beta=1.0, eps_res=EPS_RES):
    """``B_j(f, g)`` on all modes ``0..N``. ``beta`` only enters ``B2``."""
    return SpectralField(_operator_set(rc, beta, f.N, eps_res).B(j, f, g))


def trilinear_R(j, f, g, h, rc, beta=1.0, eps_res=EPS_RES):
    """``R_j(f, g, h)`` on all modes ``0..N``. ``beta`` enters ``R1`` and ``R3``."""
    return SpectralField(_operator_set(rc, beta, f.N, eps_res).R(j, f, g, h))


def resonant_rho(j, f, g, rc, beta=1.0):
    """``rho_j(f, g)``; ``rho2`` and ``rho3`` vanish unless ``r1`` is rational."""
    return SpectralField(_operator_set(rc, beta, f.N, EPS_RES).rho(j, f, g))


# --- integrated identity --------------------------------------------------


@dataclass
class ResidualReport:
    max_residual: float
    times: np.ndarray
    residual_u: np.ndarray
    residual_v: np.ndarray
    dt: float
    N: int
    a: float | Fraction
    modes: tuple
    rho2_max: float
    rho3_max: float

    @property
    def per_time(self):
        return np.maximum(self.residual_u, self.residual_v)

    def to_dict(self):
        return {
            "max_residual": self.max_residual,
            "per_time": [
                {"t": float(t), "residual_u": float(ru), "residual_v": float(rv)}
                for t, ru, rv in zip(self.times, self.residual_u, self.residual_v)
            ],
            "dt": self.dt,
            "N": self.N,
            "a": str(self.a) if isinstance(self.a, Fraction) else self.a,
            "modes": list(self.modes),
            "rho2_max": self.rho2_max,
            "rho3_max": self.rho3_max,
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def cumulative_simpson_even(y, h):
    """Composite Simpson integrals from 0 to the even-indexed samples."""
    n_pairs = (len(y) - 1) // 2
    panels = h / 3 * (y[0:-2:2] + 4 * y[1:-1:2] + y[2::2])
    out = np.zeros((n_pairs + 1,) + y.shape[1:], dtype=y.dtype)
    out[1:] = np.cumsum(panels[:n_pairs], axis=0)
    return out


def verify_integrated_identity(traj, rc, p, modes=None):
    """Residual of the time-integrated normal-form identity along a trajectory.

    For each verified mode ``k`` (default ``0 <= k <= N/3``) and each
    even-indexed sample time ``t`` this compares ``u_k(t) - e^{iak^3t} u_k(0)``
    with the boundary terms plus the Simpson-integrated cubic and resonant
    terms, and likewise for ``v``. Only conservative runs are accepted.
    """
    if not p.conservative:
        raise ConfigurationError("the integrated identity is checked for the conservative system only")
    if not p.nonlinear:
        raise ConfigurationError("the integrated identity needs the nonlinear flow")
    t = traj.times
    if len(t) < 3:
        raise DiagnosticError("trajectory too sparse: need at least 3 samples")
    h = t[1] - t[0]
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=0):
        raise DiagnosticError("trajectory samples must be uniformly spaced")
    N = traj.N
    if modes is None:
        modes = tuple(range(N // 3 + 1))
    kv = np.array(modes, dtype=float)
    a = rc.a_float
    kmax = max(1.0, np.max(np.abs(kv)))
    if h * max(a, 1.0) * kmax**3 > np.pi:
        raise DiagnosticError(
            f"trajectory too sparse: sample spacing {h:g} does not resolve k^3 phases up to k={kmax:g}"
        )
    nf = NormalForm(rc, p.beta, N)
    n_use = len(t) if len(t) % 2 == 1 else len(t) - 1
    t = t[:n_use]
    idx = list(modes)
    bu = np.zeros((n_use, len(modes)), complex)
    bv = np.zeros_like(bu)
    xu = np.zeros_like(bu)
    xv = np.zeros_like(bu)
    rho2_max = rho3_max = 0.0
    for i in range(n_use):
        u, v = traj.u[i], traj.v[i]
        terms = nf.terms(u, v, modes)
        bu[i] = terms.B1 + terms.B2
        bv[i] = terms.B3
        rho2_max = max(rho2_max, float(np.max(np.abs(terms.rho2))))
        rho3_max = max(rho3_max, float(np.max(np.abs(terms.rho3))))
        cubic_u = terms.R1 + terms.R2 + terms.R3 + terms.rho1 + terms.rho2
        cubic_v = terms.R4 + p.beta / (3 * a) * terms.R4vvv + terms.R5 + terms.rho3
        xu[i] = np.exp(-1j * a * kv**3 * t[i]) * cubic_u
        xv[i] = np.exp(-1j * kv**3 * t[i]) * cubic_v
    iu = cumulative_simpson_even(xu, h)
    iv = cumulative_simpson_even(xv, h)
    te = t[::2]
    eu = np.exp(1j * a * np.outer(te, kv**3))
    ev = np.exp(1j * np.outer(te, kv**3))
    u_t = traj.u[:n_use:2][:, idx]
    v_t = traj.v[:n_use:2][:, idx]
    u0 = traj.u[0, idx]
    v0 = traj.v[0, idx]
    lhs_u = u_t - eu * u0
    rhs_u = -bu[::2] + eu * bu[0] + eu * iu
    lhs_v = v_t - ev * v0
    rhs_v = -bv[::2] + ev * bv[0] + ev * iv
    res_u = np.max(np.abs(lhs_u - rhs_u), axis=1)
    res_v = np.max(np.abs(lhs_v - rhs_v), axis=1)
    return ResidualReport(
        max_residual=float(max(res_u.max(), res_v.max())),
        times=te,
        residual_u=res_u,
        residual_v=res_v,
        dt=p.dt,
        N=N,
        a=rc.a,
        modes=tuple(modes),
        rho2_max=rho2_max,
        rho3_max=rho3_max,
    )
