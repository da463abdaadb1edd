"""Continued fractions, resonance gaps and irrationality-exponent bookkeeping."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, DomainError, UnresolvedMuError
from .normal_form import compute_coefficients

FLOAT_CF_TOL = 1e-12
PROVENANCES = ("rational", "algebraic-irrational", "user-supplied", "empirical-estimate")


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients ``[a0; a1, a2, ...]`` with exact convergents ``p_n/q_n``.

    ``terminated`` is True when the expansion is complete (exact rational
    input, or a float matched to within 1e-12).
    """

    quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    terminated: bool

    def __len__(self):
        return len(self.quotients)

    def convergent(self, n):
        p, q = self.convergents[n]
        return Fraction(p, q)

    def determinant(self, n):
        """``p_n q_{n-1} - p_{n-1} q_n``; equals ``(-1)^(n-1)``."""
        (p, q), (pp, qq) = self.convergents[n], self.convergents[n - 1]
        return p * qq - pp * q

    def __str__(self):
        a = self.quotients
        if len(a) == 1:
            return f"[{a[0]}]"
        return f"[{a[0]}; " + ", ".join(map(str, a[1:])) + "]"


def continued_fraction(x, depth=20):
    """Expand ``x`` (float, int or Fraction) to at most ``depth`` partial quotients."""
    if depth < 1:
        raise ConfigurationError("depth must be >= 1")
    exact = isinstance(x, (int, Fraction))
    target = Fraction(x)
    rem = target
    quotients = []
    convergents = []
    p_prev, q_prev, p, q = 0, 1, 1, 0
    terminated = False
    while len(quotients) < depth:
        a_n = math.floor(rem)
        quotients.append(a_n)
        p_prev, q_prev, p, q = p, q, a_n * p + p_prev, a_n * q + q_prev
        convergents.append((p, q))
        frac = rem - a_n
        if frac == 0 or (not exact and abs(float(target) - p / q) < FLOAT_CF_TOL):
            terminated = True
            break
        rem = 1 / frac
    return ContinuedFraction(tuple(quotients), tuple(convergents), terminated)


@dataclass(frozen=True)
class MuAssignment:
    value: float
    provenance: str

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ConfigurationError(f"unknown provenance {self.provenance!r}")
        if (self.value == 1) != (self.provenance == "rational"):
            raise DomainError("mu = 1 exactly when the provenance is rational")
        if self.value != 1 and not self.value >= 2:
            raise DomainError(f"irrationality exponent {self.value} not in {{1}} U [2, inf]")


@dataclass
class GapTable:
    """Resonance gaps ``dist(r k, Z)`` for ``k = 1..K``.

    ``gap = min_n |r - n/k|`` and ``scaled_gap = k * dist(r k, Z)``, which
    stays bounded below when ``mu(r) = 2``.
    """

    r: float | Fraction
    k: np.ndarray
    n_best: np.ndarray
    dist: np.ndarray
    exact_zero: np.ndarray
    fitted_exponent: float

    @property
    def gap(self):
        return self.dist / self.k

    @property
    def scaled_gap(self):
        return self.k * self.dist

    @property
    def zeros(self):
        return self.k[self.exact_zero]

    @property
    def mu_estimate(self):
        return 1.0 + self.fitted_exponent

    def records(self):
        """Indices of ``k`` that set a new minimum of ``dist(r k, Z)``."""
        best = np.minimum.accumulate(self.dist)
        is_rec = np.ones(len(self.k), dtype=bool)
        is_rec[1:] = self.dist[1:] < best[:-1]
        return np.flatnonzero(is_rec & (self.dist > 0))

    def to_csv(self, fh=None):
        buf = fh or io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "n_best", "gap", "scaled_gap"])
        for k, n, g, sg in zip(self.k, self.n_best, self.gap, self.scaled_gap):
            w.writerow([int(k), int(n), repr(float(g)), repr(float(sg))])
        return buf.getvalue() if fh is None else None


def min_resonance_gap(r, K):
    """Scan ``k = 1..K`` for the closest ``n/k`` to ``r``.

    Fraction input uses exact integer arithmetic, so rational ``r = p/q``
    gives exact zeros at multiples of ``q``. The fitted exponent is the slope
    of ``-log dist(rk, Z)`` against ``log k`` over record-setting ``k``
    (an empirical ``mu - 1``); it is ``inf`` whenever an exact zero occurs.
    """
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    ks = np.arange(1, K + 1)
    if isinstance(r, (int, Fraction)):
        r = Fraction(r)
        num, den = r.numerator, r.denominator
        n_best = np.empty(K, dtype=np.int64)
        dist = np.empty(K)
        zero = np.zeros(K, dtype=bool)
        for i, k in enumerate(range(1, K + 1)):
            # round(k*num/den) with exact integers
            n = (2 * k * num + den) // (2 * den)
            d = Fraction(abs(k * num - n * den), den)
            n_best[i] = n
            dist[i] = float(d)
            zero[i] = d == 0
    else:
        rk = float(r) * ks
        n_best = np.rint(rk).astype(np.int64)
        dist = np.abs(rk - n_best)
        zero = dist == 0
    table = GapTable(r, ks, n_best, dist, zero, math.nan)
    if zero.any():
        table.fitted_exponent = math.inf
    else:
        rec = table.records()
        if len(rec) >= 2:
            slope = np.polyfit(np.log(ks[rec]), -np.log(dist[rec]), 1)[0]
            table.fitted_exponent = float(slope)
    return table


def mu_of_coefficients(a, rc=None, user_mu=None, allow_empirical=True, K=10**4):
    """Irrationality exponent of ``rho_a = sqrt(12a - 3)`` (shared by ``r1, r2, rt1, rt2``).

    Exact couplings give 1 (rational case) or 2 (quadratic irrational).
    Inexact floats need ``user_mu``; otherwise an empirical slope fit is
    returned, clamped to 2 from below and labelled as such.
    """
    rc = rc if rc is not None else compute_coefficients(a)
    if rc.is_rational_case:
        return MuAssignment(1, "rational")
    if rc.a_exact is not None:
        return MuAssignment(2, "algebraic-irrational")
    if user_mu is not None:
        return MuAssignment(float(user_mu), "user-supplied")
    if not allow_empirical:
        raise UnresolvedMuError(f"a={a} has no exact form; pass user_mu")
    est = min_resonance_gap(rc.r1, K).mu_estimate
    return MuAssignment(max(2.0, est), "empirical-estimate")


def _mu_value(mu):
    return mu.value if isinstance(mu, MuAssignment) else float(mu)


def smoothing_gain(s, mu, rational_case=False):
    """Supremum of the admissible ``s1 - s`` (never attained).

    Irrational case: ``min{1, s - 1/2, s + 2 - mu, 2s + 1 - mu}`` for ``s > 1/2``.
    Rational case: ``min{1, s - 1}`` for ``s > 1``.
    """
    if rational_case:
        if not s > 1:
            raise DomainError(f"rational case needs s > 1, got {s}")
        return min(1.0, s - 1.0)
    if not s > 0.5:
        raise DomainError(f"need s > 1/2, got {s}")
    m = _mu_value(mu)
    if m == 1:
        raise DomainError("mu = 1 is the rational case")
    return min(1.0, s - 0.5, s + 2 - m, 2 * s + 1 - m)


def critical_index(mu):
    """Regularity threshold of the local theory as a function of ``mu``."""
    m = _mu_value(mu)
    if m == 1 or m >= 3:
        return 1.0
    if 2 <= m < 3:
        return (m - 1) / 2
    raise DomainError(f"irrationality exponent {m} not in {{1}} U [2, inf]")

