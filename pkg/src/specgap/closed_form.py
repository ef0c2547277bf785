"""Exponential-polynomial theta functions ``sum alpha t**(-p) exp(-rate t)``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaincc

from ._errors import ConfigError

__all__ = ["ClosedFormTheta"]

_KEY_DIGITS = 12


def _key(p, rate):
    return (round(float(p), _KEY_DIGITS), round(float(rate), _KEY_DIGITS))


@dataclass(frozen=True)
class ClosedFormTheta:
    """A finite sum of terms ``alpha * t**(-p) * exp(-rate * t)``.

    Terms are stored canonically: equal ``(p, rate)`` keys merged, zero
    coefficients dropped, sorted by ``(rate, p)``. The family is closed
    under sums and pointwise products.

    Each term is the Laplace-Stieltjes transform of a spectral measure:
    an atom of mass ``alpha`` at ``rate`` when ``p == 0``, otherwise the
    density ``alpha * (lam - rate)**(p - 1) / Gamma(p)`` on ``lam > rate``.
    """

    terms: tuple

    def __init__(self, terms: Iterable = ()):
        merged: dict = {}
        for term in terms:
            alpha, p, rate = (float(x) for x in term)
            if p < 0 or rate < 0:
                raise ConfigError("powers and rates must be non-negative")
            if not (math.isfinite(alpha) and math.isfinite(p) and math.isfinite(rate)):
                raise ConfigError("terms must be finite")
            k = _key(p, rate)
            merged[k] = merged.get(k, 0.0) + alpha
        canon = tuple(
            (alpha, p, rate)
            for (p, rate), alpha in sorted(merged.items(), key=lambda kv: (kv[0][1], kv[0][0]))
            if alpha != 0.0
        )
        object.__setattr__(self, "terms", canon)

    # ------------------------------------------------------------------
    # algebra
    def __add__(self, other: "ClosedFormTheta") -> "ClosedFormTheta":
        return ClosedFormTheta(self.terms + other.terms)

    def __mul__(self, other):
        if isinstance(other, ClosedFormTheta):
            return ClosedFormTheta(
                (a1 * a2, p1 + p2, r1 + r2)
                for a1, p1, r1 in self.terms
                for a2, p2, r2 in other.terms
            )
        c = float(other)
        return ClosedFormTheta((c * a, p, r) for a, p, r in self.terms)

    __rmul__ = __mul__

    def __bool__(self) -> bool:
        return bool(self.terms)

    # ------------------------------------------------------------------
    # structure
    @property
    def min_rate(self) -> float:
        """Smallest rate among the terms, ``inf`` for the empty sum."""
        return min((r for _, _, r in self.terms), default=math.inf)

    @property
    def constant(self) -> float:
        """Coefficient of the ``p = 0, rate = 0`` term (a kernel contribution)."""
        return sum(a for a, p, r in self.terms if p == 0 and r == 0)

    def without_constant(self) -> "ClosedFormTheta":
        return ClosedFormTheta(t for t in self.terms if not (t[1] == 0 and t[2] == 0))

    def pure_powers(self, lambda0: float) -> "ClosedFormTheta":
        """Terms whose rate equals ``lambda0`` (pure powers after the shift)."""
        return ClosedFormTheta(t for t in self.terms if _key(0, t[2]) == _key(0, lambda0))

    def decaying(self, lambda0: float) -> "ClosedFormTheta":
        """Terms whose rate exceeds ``lambda0``."""
        return ClosedFormTheta(t for t in self.terms if _key(0, t[2]) != _key(0, lambda0))

    # ------------------------------------------------------------------
    # evaluation
    def __call__(self, t):
        return self.shifted(t, 0.0)

    def shifted(self, t, lambda0: float):
        """``exp(lambda0 t) * theta(t)``, evaluated term by term."""
        t = np.asarray(t, float)
        if np.any(t <= 0):
            raise ConfigError("t must be positive")
        out = np.zeros_like(t)
        for alpha, p, rate in self.terms:
            out = out + alpha * t ** (-p) * np.exp(-(rate - lambda0) * t)
        return float(out) if out.ndim == 0 else out

    def truncated(self, cutoff: float, t, boundary_term: bool = False):
        """Transform of the spectral measure restricted to ``(cutoff, inf)``.

        With ``boundary_term`` the value ``exp(-cutoff t) N(cutoff)`` is
        added, where ``N`` is the counting function of the measure; this is
        the integration-by-parts form ``t * int_cutoff^inf exp(-t lam) N``.
        """
        t = np.asarray(t, float)
        if np.any(t <= 0):
            raise ConfigError("t must be positive")
        out = np.zeros_like(t)
        for alpha, p, rate in self.terms:
            gap = cutoff - rate
            if p == 0:
                if gap < 0:
                    out = out + alpha * np.exp(-rate * t)
            elif gap <= 0:
                out = out + alpha * t ** (-p) * np.exp(-rate * t)
            else:
                out = out + alpha * t ** (-p) * np.exp(-rate * t) * gammaincc(p, gap * t)
        if boundary_term:
            out = out + np.exp(-cutoff * t) * self.counting(cutoff)
        return float(out) if out.ndim == 0 else out

    def counting(self, lam: float) -> float:
        """Counting function ``N(lam)`` of the spectral measure (closed at lam)."""
        total = 0.0
        for alpha, p, rate in self.terms:
            if lam < rate:
                continue
            if p == 0:
                total += alpha
            else:
                total += alpha * (lam - rate) ** p / math.gamma(p + 1)
        return total

    def expansion(self, lambda0: float, depth: int):
        """Small-t expansion of ``exp(lambda0 t) theta(t)``.

        Returns ``(n, coeffs)`` with ``exp(lambda0 t) theta(t) =
        t**(-n/2) * sum_i coeffs[i] t**i + O(t**(depth + 1 - n/2))``.
        Requires all powers to differ by integers.
        """
        if not self.terms:
            return 0, np.zeros(depth + 1)
        pmax = max(p for _, p, _ in self.terms)
        for _, p, _ in self.terms:
            if abs((pmax - p) - round(pmax - p)) > 1e-12:
                raise ConfigError("powers must differ by integers for a single expansion")
        n = int(round(2 * pmax))
        coeffs = np.zeros(depth + 1)
        for alpha, p, rate in self.terms:
            shift = int(round(pmax - p))
            c = rate - lambda0
            for k in range(depth + 1 - shift):
                coeffs[shift + k] += alpha * (-c) ** k / math.factorial(k)
        return n, coeffs
