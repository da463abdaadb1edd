"""Slow reference implementations used to cross-check the fast kernels.

Everything here is written as explicit Python loops over modes, with
Fractions for the resonance tests, and returns full coefficient arrays
indexed by ``k + N`` so Hermitian symmetry of the outputs can be inspected.
"""
from __future__ import annotations

import cmath
import math
from fractions import Fraction

import numpy as np


def dft(samples, N):
    M = len(samples)
    out = np.zeros(2 * N + 1, dtype=complex)
    for k in range(-N, N + 1):
        out[k + N] = sum(samples[j] * cmath.exp(-2j * math.pi * k * j / M) for j in range(M)) / M
    return out


def idft(full, M):
    N = len(full) // 2
    out = np.zeros(M)
    for j in range(M):
        x = 2 * math.pi * j / M
        out[j] = sum(full[k + N] * cmath.exp(1j * k * x) for k in range(-N, N + 1)).real
    return out


def convolution(f, g):
    N = len(f) // 2
    out = np.zeros(2 * N + 1, dtype=complex)
    for k in range(-N, N + 1):
        for k1 in range(-N, N + 1):
            k2 = k - k1
            if abs(k2) <= N:
                out[k + N] += f[k1 + N] * g[k2 + N]
    return out


def _a_exact(rc):
    return rc.a_exact


def _duu(k, k1, a):
    k2 = k - k1
    return a * k**3 - k1**3 - k2**3


def _duv(k, k1, a):
    k2 = k - k1
    return k**3 - a * k1**3 - k2**3


def _zero(kind, k, k1, rc):
    ax = _a_exact(rc)
    if ax is not None:
        d = _duu(k, k1, ax) if kind == "uu" else _duv(k, k1, ax)
        return d == 0
    return k == 0 if kind == "uu" else k1 == 0


def bilinear(j, f, g, rc, beta):
    N = len(f) // 2
    a = rc.a_float
    out = np.zeros(2 * N + 1, dtype=complex)
    for k in range(-N, N + 1):
        for k1 in range(-N, N + 1):
            k2 = k - k1
            if abs(k2) > N:
                continue
            term = f[k1 + N] * g[k2 + N]
            if j == 1:
                if k1 == 0 or k2 == 0:
                    continue
                out[k + N] -= term / (k1 * k2)
            elif j == 2:
                if _zero("uu", k, k1, rc):
                    continue
                out[k + N] -= beta * k * term / _duu(k, k1, a)
            else:
                if _zero("uv", k, k1, rc):
                    continue
                out[k + N] -= 3 * k2 * term / _duv(k, k1, a)
    return out


def trilinear(j, f, g, h, rc, beta):
    N = len(f) // 2
    a = rc.a_float
    out = np.zeros(2 * N + 1, dtype=complex)
    for k in range(-N, N + 1):
        acc = 0j
        for k1 in range(-N, N + 1):
            for k2 in range(-N, N + 1):
                k3 = k - k1 - k2
                if abs(k3) > N:
                    continue
                term = f[k1 + N] * g[k2 + N] * h[k3 + N]
                m = k1 + k2
                if j == 1:
                    if _zero("uu", k, m, rc):
                        continue
                    # (m - r1 k)(m - r2 k) = -D_uu(k, m) / (3k)
                    acc += 6j * beta * k * k2 * term / _duu(k, m, a)
                elif j == 2:
                    if k1 == 0 or (k1 + k2) * (k2 + k3) * (k3 + k1) == 0:
                        continue
                    acc += 6j * a * term / k1
                elif j == 3:
                    if k1 == 0 or k2 + k3 == 0:
                        continue
                    acc += 2j * beta * term / k1
                elif j == 4:
                    if _zero("uv", k, m, rc):
                        continue
                    acc += 9j * a * k3 * m * term / _duv(k, m, a)
                else:
                    if _zero("uv", k, k1, rc):
                        continue
                    acc += 9j * k3 * (k2 + k3) * term / _duv(k, k1, a)
        out[k + N] = acc
    return out


def resonant(j, f, g, rc, beta):
    N = len(f) // 2
    a = rc.a_float
    out = np.zeros(2 * N + 1, dtype=complex)
    if j == 1:
        for k in range(-N, N + 1):
            if k != 0:
                out[k + N] = -6j * a / k * abs(f[k + N]) ** 2 * g[k + N]
        return out
    if rc.rational_case is None:
        return out
    p, q = rc.rational_case
    r1 = Fraction(p, q)
    r2 = 1 - r1
    for k in range(-N, N + 1):
        if j == 2:
            i1, i2 = r1 * k, r2 * k
            if i1.denominator == 1 and abs(i1) <= N and abs(i2) <= N:
                out[k + N] = -2j * beta * k * f[int(i1) + N] * g[int(i2) + N]
        else:
            acc = 0j
            for rt in (1 / r1, 1 / r2):
                i1, i2 = rt * k, (1 - rt) * k
                if i1.denominator == 1 and abs(i1) <= N and abs(i2) <= N:
                    acc += float(1 - rt) * f[int(i1) + N] * g[int(i2) + N]
            out[k + N] = -3j * k * acc
    return out


def hermitian_random(N, rng, mean_zero=False, scale=1.0):
    """Random full coefficient array ``c_{-k} = conj(c_k)``."""
    c = scale * (rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1))
    c[0] = 0 if mean_zero else c[0].real
    return np.concatenate([np.conj(c[:0:-1]), c])


def run_oracle_suites(N=8, trials=20, seed=0, tol=1e-12):
    """Compare the fast transforms and operators with the loops above.

    Errors are measured relative to ``max(1, max |reference|)``. Returns ``{suite: {"max_error": float, "ok": bool}}``.
    """
    from .normal_form import NormalForm, compute_coefficients
    from .spectral import GridSpec, SpectralField, dealiased_product, dft_forward, dft_inverse

    rng = np.random.default_rng(seed)
    grid = GridSpec(N)
    beta = -1.0
    errs = {}

    def record(name, fast, ref):
        # errors relative to the output scale, floored at 1
        err = np.max(np.abs(fast - ref)) / max(1.0, np.max(np.abs(ref)))
        errs[name] = max(errs.get(name, 0.0), float(err))

    couplings = [Fraction(1, 2), Fraction(1, 3), 0.7]
    for trial in range(trials):
        f, g, h = (hermitian_random(N, rng) for _ in range(3))
        f[N] = 0
        F, G, H = (SpectralField(x[N:]) for x in (f, g, h))
        samples = dft_inverse(F, grid)
        record("dft_inverse", samples, idft(f, grid.M))
        record("dft_forward", dft_forward(samples, grid).coeffs, dft(samples, N)[N:])
        record("dealiased_product", dealiased_product(F, G, grid).coeffs, convolution(f, g)[N:])
        rc = compute_coefficients(couplings[trial % len(couplings)])
        nf = NormalForm(rc, beta, N)
        g0 = g.copy()
        g0[N] = 0
        G0 = SpectralField(g0[N:])
        record("B1", nf.B(1, F, G0), bilinear(1, f, g0, rc, beta)[N:])
        for j in (2, 3):
            record(f"B{j}", nf.B(j, F, G), bilinear(j, f, g, rc, beta)[N:])
        for j in range(1, 6):
            record(f"R{j}", nf.R(j, F, G, H), trilinear(j, f, g, h, rc, beta)[N:])
        for j in range(1, 4):
            record(f"rho{j}", nf.rho(j, F, G), resonant(j, f, g, rc, beta)[N:])
    return {name: {"max_error": e, "ok": e <= tol} for name, e in errs.items()}
