"""Truncated Fourier representation of real 2*pi-periodic functions.

A :class:`SpectralField` stores the coefficients ``c_k`` for ``0 <= k <= N``;
negative modes follow from Hermitian symmetry ``c_{-k} = conj(c_k)``. The
coefficient convention is

    c_k = 1/(2 pi) * int_0^{2 pi} u(x) exp(-i k x) dx,

so the discrete transform carries a ``1/M`` factor and Sobolev norms are plain
weighted l2 sums of the coefficients.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import next_fast_len

from .errors import ConfigurationError, InvariantViolation

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Truncation ``N`` and physical grid size ``M`` used for products.

    ``M`` must exceed ``3N`` so that quadratic products are alias free on
    ``|k| <= N`` and cubic integrals are exact; it must also be even. The
    default is the smallest even FFT-friendly size above ``3N``.
    """

    N: int
    M: int | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"N must be a positive integer, got {self.N!r}")
        if self.M is None:
            M = next_fast_len(3 * self.N + 1, real=True)
            while M % 2:
                M = next_fast_len(M + 1, real=True)
            object.__setattr__(self, "M", M)
        if self.M <= 3 * self.N:
            raise ConfigurationError(f"M={self.M} must exceed 3N={3 * self.N}")
        if self.M % 2:
            raise ConfigurationError(f"M={self.M} must be even")

    @property
    def x(self):
        return 2 * np.pi * np.arange(self.M) / self.M

    @property
    def k(self):
        return np.arange(self.N + 1)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real periodic function as nonnegative-mode Fourier coefficients."""

    coeffs: np.ndarray
    mean_zero: bool = False
    N: int = field(init=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size < 2:
            raise ConfigurationError("coeffs must be a 1-d array holding modes 0..N, N >= 1")
        scale = max(1.0, float(np.max(np.abs(c))))
        if abs(c[0].imag) > SYMMETRY_TOL * scale:
            raise InvariantViolation(f"mode 0 must be real, got {c[0]!r}")
        c[0] = c[0].real
        if self.mean_zero and c[0] != 0:
            raise InvariantViolation(f"mean-zero field has coeff(0)={c[0].real!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "N", c.size - 1)

    @classmethod
    def zeros(cls, N, mean_zero=False):
        return cls(np.zeros(N + 1, dtype=complex), mean_zero=mean_zero)

    @classmethod
    def from_modes(cls, N, modes, mean_zero=False):
        """Build from a ``{k: c_k}`` mapping with ``k >= 0``."""
        c = np.zeros(N + 1, dtype=complex)
        for k, val in modes.items():
            if not 0 <= k <= N:
                raise ConfigurationError(f"mode {k} outside 0..{N}")
            c[k] = val
        return cls(c, mean_zero=mean_zero)

    @classmethod
    def from_full(cls, full, mean_zero=False, tol=SYMMETRY_TOL):
        """Build from a length ``2N+1`` array indexed by ``k + N``."""
        full = np.asarray(full, dtype=complex)
        if full.ndim != 1 or full.size % 2 != 1:
            raise ConfigurationError("full coefficient array must have odd length 2N+1")
        N = full.size // 2
        scale = max(1.0, float(np.max(np.abs(full))))
        mismatch = np.max(np.abs(full[N:] - np.conj(full[N::-1])))
        if mismatch > tol * scale:
            raise InvariantViolation(f"Hermitian symmetry broken by {mismatch:.3e}")
        return cls(full[N:], mean_zero=mean_zero)

    def full(self):
        """Coefficients for ``k = -N..N`` (index ``k + N``)."""
        return np.concatenate([np.conj(self.coeffs[:0:-1]), self.coeffs])

    def coeff(self, k):
        if abs(k) > self.N:
            return 0j
        return self.coeffs[k] if k >= 0 else np.conj(self.coeffs[-k])

    def with_mean_zero(self, flag=True):
        c = self.coeffs.copy()
        if flag:
            c[0] = 0
        return SpectralField(c, mean_zero=flag)

    def __add__(self, other):
        _check_same_N(self, other)
        return SpectralField(self.coeffs + other.coeffs, mean_zero=self.mean_zero and other.mean_zero)

    def __sub__(self, other):
        _check_same_N(self, other)
        return SpectralField(self.coeffs - other.coeffs, mean_zero=self.mean_zero and other.mean_zero)

    def __mul__(self, scalar):
        if np.iscomplexobj(scalar) and np.imag(scalar) != 0:
            raise InvariantViolation("complex scaling would break Hermitian symmetry")
        return SpectralField(self.coeffs * float(np.real(scalar)), mean_zero=self.mean_zero)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(-self.coeffs, mean_zero=self.mean_zero)

    def allclose(self, other, atol=1e-12):
        return self.N == other.N and bool(np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol))

    def to_dict(self):
        return {
            "N": self.N,
            "mean_zero": self.mean_zero,
            "coeffs": [[k, float(c.real), float(c.imag)] for k, c in enumerate(self.coeffs)],
        }

    @classmethod
    def from_dict(cls, d):
        c = np.zeros(int(d["N"]) + 1, dtype=complex)
        for k, re, im in d["coeffs"]:
            c[int(k)] = complex(re, im)
        return cls(c, mean_zero=bool(d.get("mean_zero", False)))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"SpectralField(N={self.N}, mean_zero={self.mean_zero}, |c|_max={np.max(np.abs(self.coeffs)):.3e})"


def _check_same_N(f, g):
    if f.N != g.N:
        raise ConfigurationError(f"truncation mismatch: {f.N} vs {g.N}")


def to_physical(coeffs, M):
    """Synthesize ``M`` real samples from nonnegative-mode coefficients."""
    # irfft zero-pads the missing high modes itself
    return np.fft.irfft(coeffs, n=M) * M


def to_spectral(samples, N):
    """Analysis transform with the ``1/M`` normalization, truncated to ``N``."""
    M = samples.shape[-1]
    return np.fft.rfft(samples)[..., : N + 1] / M


def dft_forward(samples, grid, mean_zero=False):
    """Fourier coefficients ``|k| <= N`` of real grid samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size != grid.M:
        raise ConfigurationError(f"expected {grid.M} samples, got shape {samples.shape}")
    c = to_spectral(samples, grid.N)
    if mean_zero:
        c[0] = 0
    return SpectralField(c, mean_zero=mean_zero)


def dft_inverse(field, grid):
    """Real samples of ``field`` on the ``M``-point grid ``x_j = 2 pi j / M``."""
    if field.N > grid.N:
        raise ConfigurationError(f"field truncation {field.N} exceeds grid N={grid.N}")
    c0 = field.coeffs[0]
    if abs(c0.imag) > SYMMETRY_TOL * max(1.0, abs(c0)):
        raise InvariantViolation("mode 0 is not real")
    return to_physical(field.coeffs, grid.M)


def sobolev_weights(N, s, homogeneous=False):
    k = np.arange(N + 1, dtype=float)
    if homogeneous:
        w = np.zeros(N + 1)
        w[1:] = k[1:] ** s
        return w
    return (1.0 + k**2) ** (s / 2)


def sobolev_norm_coeffs(coeffs, s, homogeneous=False):
    """H^s norm of (possibly stacked) nonnegative-mode coefficient arrays."""
    coeffs = np.asarray(coeffs)
    w2 = sobolev_weights(coeffs.shape[-1] - 1, s, homogeneous) ** 2
    mult = np.full(coeffs.shape[-1], 2.0)
    mult[0] = 1.0
    return np.sqrt(np.sum(mult * w2 * np.abs(coeffs) ** 2, axis=-1))


def sobolev_norm(field, s, homogeneous=False):
    """``(sum_k <k>^{2s} |c_k|^2)^{1/2}``; with ``homogeneous`` use ``|k|^s`` and drop ``k=0``."""
    return float(sobolev_norm_coeffs(field.coeffs, s, homogeneous))


def dealiased_product(f, g, grid):
    """Truncated convolution ``(f*g)_k = sum_{k1+k2=k} f_k1 g_k2`` for ``|k| <= N``."""
    _check_same_N(f, g)
    if f.N != grid.N:
        raise ConfigurationError(f"field truncation {f.N} does not match grid N={grid.N}")
    prod = to_physical(f.coeffs, grid.M) * to_physical(g.coeffs, grid.M)
    return SpectralField(to_spectral(prod, grid.N))


def derivative(field, order=1):
    k = np.arange(field.N + 1)
    return SpectralField((1j * k) ** order * field.coeffs, mean_zero=field.mean_zero or order > 0)
