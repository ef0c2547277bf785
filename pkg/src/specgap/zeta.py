"""Gap-shifted zeta functions, determinants and beta-torsion.

With ``phi(t) = exp(lambda0 t) theta(t)`` the zeta function of
``Delta - lambda0`` splits at ``t = 1`` into

    zeta_small(s) = 1/Gamma(s) int_0^1 t^(s-1) phi(t) dt,
    zeta_large(s) = 1/Gamma(s) int_1^inf t^(s-1) phi(t) dt.

The small piece is continued to ``s = 0`` by subtracting the small-time heat
expansion; the large piece converges for ``Re s < beta``. Writing the
continued Mellin integral as ``a/s + b0 + O(s)`` and using
``1/Gamma(s) = s + gamma s^2 + O(s^3)`` gives ``zeta(0) = a`` and
``zeta'(0) = b0 + gamma a``.

Pure powers ``alpha t^(-p)`` in ``phi`` (spectral mass sitting exactly at
the gap, or power-law terms of closed forms with rate ``lambda0``) are
handled analytically in the large piece via ``int_1^inf t^(s-p-1) dt =
-1/(s-p)``, so that their two halves cancel and they contribute nothing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import rgamma

from ._errors import ConfigError, DomainError, NumericalError
from .closed_form import ClosedFormTheta
from .spectral import ThetaFunction, estimate_beta

__all__ = [
    "HeatExpansion",
    "ZetaReport",
    "zeta_small",
    "zeta_large",
    "determinant",
    "beta_torsion",
    "ns_zeta",
]

EULER_GAMMA = float(np.euler_gamma)


@dataclass(frozen=True)
class HeatExpansion:
    """Small-time expansion ``tau(exp(-t Delta)) ~ t^(-n/2) sum_l coeffs[l] t^l``.

    ``shifted_coeffs`` optionally holds the expansion of
    ``exp(lambda0 t) tau(exp(-t Delta))`` when it is known exactly; otherwise
    it is derived from ``coeffs`` by a truncated series product.
    """

    n: int
    coeffs: tuple
    lambda0: float = 0.0
    b: float = 0.0
    shifted_coeffs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "shifted_coeffs", tuple(float(c) for c in self.shifted_coeffs))
        if self.shifted_coeffs and len(self.shifted_coeffs) != len(self.coeffs):
            raise ConfigError("shifted_coeffs must have the same length as coeffs")
        if self.n < 0:
            raise ConfigError("expansion dimension must be non-negative")
        if not all(math.isfinite(c) for c in self.coeffs):
            raise ConfigError("expansion coefficients must be finite")
        if self.depth < self.n / 2 + 1:
            raise ConfigError("expansion depth must be at least n/2 + 1")

    @property
    def depth(self) -> int:
        return len(self.coeffs) - 1

    @property
    def c_tilde(self) -> np.ndarray:
        """Coefficients of the expansion of ``exp(lambda0 t) tau(exp(-t Delta))``."""
        if self.shifted_coeffs:
            return np.array(self.shifted_coeffs)
        c = np.array(self.coeffs)
        out = np.zeros_like(c)
        for i in range(len(c)):
            out[i] = sum(c[l] * self.lambda0 ** (i - l) / math.factorial(i - l) for l in range(i + 1))
        return out

    @staticmethod
    def default_depth(n: int) -> int:
        return math.ceil(n / 2) + 2

    @classmethod
    def from_closed_form(cls, theta: ThetaFunction, depth: int | None = None) -> "HeatExpansion":
        if theta.kind != "closed_form":
            raise ConfigError("theta is not backed by a closed form")
        form: ClosedFormTheta = theta.backing
        n, _ = form.expansion(0.0, 0) if form else (0, None)
        depth = cls.default_depth(n) if depth is None else depth
        _, coeffs = form.expansion(0.0, depth) if form else (0, np.zeros(depth + 1))
        # exact shifted coefficients keep pure powers out of the numerical remainder
        _, shifted = form.expansion(theta.lambda0, depth) if form else (0, np.zeros(depth + 1))
        coeffs, shifted = np.array(coeffs), np.array(shifted)
        if theta.b:
            if n % 2:
                raise ConfigError("a kernel term does not fit an odd-dimensional expansion")
            coeffs[n // 2] += theta.b
            lam0 = theta.lambda0
            for k in range(depth + 1 - n // 2):
                shifted[n // 2 + k] += theta.b * lam0**k / math.factorial(k)
        return cls(n=n, coeffs=tuple(coeffs), lambda0=theta.lambda0, b=theta.b,
                   shifted_coeffs=tuple(shifted))

    @classmethod
    def from_sample(cls, theta: ThetaFunction, depth: int | None = None) -> "HeatExpansion":
        """Taylor coefficients ``(-1)^l tau(Delta^l) / l!`` of a sampled trace."""
        if theta.kind != "sample":
            raise ConfigError("theta is not backed by a spectral sample")
        depth = cls.default_depth(0) if depth is None else depth
        s = theta.backing
        ev = s.eigenvalues[theta.degree]
        coeffs = [(-1) ** l * float(s.weights @ (ev**l).sum(axis=1)) / math.factorial(l)
                  for l in range(depth + 1)]
        return cls(n=0, coeffs=tuple(coeffs), lambda0=theta.lambda0, b=theta.b)

    @classmethod
    def for_theta(cls, theta: ThetaFunction, depth: int | None = None) -> "HeatExpansion":
        if theta.kind == "closed_form":
            return cls.from_closed_form(theta, depth)
        if theta.kind == "sample":
            return cls.from_sample(theta, depth)
        raise ConfigError("a heat expansion must be supplied for callable thetas")


@dataclass(frozen=True)
class ZetaReport:
    """Values at zero of the zeta function of ``Delta_j - lambda0`` and its pieces."""

    degree: int
    lambda0: float
    beta: float
    zeta1_at_0: float
    zeta_inf_at_0: float
    zeta_at_0: float
    zeta1_prime_at_0: float
    zeta_inf_prime_at_0: float
    zeta_prime_at_0: float
    log_determinant: float
    notes: dict = field(default_factory=dict)


# ----------------------------------------------------------------------
# quadrature helpers


def _cquad(f, a, b, **kw):
    probe = f(0.5 * (a + b)) if math.isfinite(b) else f(a + 1.0)
    if np.iscomplexobj(probe) and np.imag(probe) != 0:
        re = quad(lambda t: float(np.real(f(t))), a, b, **kw)[0]
        im = quad(lambda t: float(np.imag(f(t))), a, b, **kw)[0]
        return complex(re, im)
    return complex(quad(lambda t: float(np.real(f(t))), a, b, **kw)[0])


def _quiet_quad(f, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return _cquad(f, a, b, epsabs=1e-15, epsrel=1e-12, limit=400)


def _tail_integral(f, start=1.0, max_doublings=400):
    # Integrate over [start, 2 start), [2 start, 4 start), ... until the
    # segment contributions are negligible.
    total, lo, quiet = 0j, start, 0
    for _ in range(max_doublings):
        seg = _quiet_quad(f, lo, 2 * lo)
        total += seg
        lo *= 2
        if abs(seg) <= 1e-16 * max(abs(total), 1e-300):
            quiet += 1
            if quiet >= 3:
                return total
        else:
            quiet = 0
    raise NumericalError("large-time integral did not converge (non-integrable tail)")


# ----------------------------------------------------------------------
# splitting phi into pure powers and a decaying part


def _pure_and_decaying(theta: ThetaFunction):
    """Return ``(pure_terms, phi_decaying)``.

    ``pure_terms`` lists ``(alpha, p)`` for the pure powers of ``phi`` and
    ``phi_decaying`` evaluates the remaining part of ``phi``.
    """
    lam0 = theta.lambda0
    if theta.kind == "closed_form":
        # the backing already excludes the kernel constant
        form: ClosedFormTheta = theta.backing
        pure = [(a, p) for a, p, _ in form.pure_powers(lam0).terms]
        rest = form.decaying(lam0)
        if rest.min_rate < lam0:
            raise DomainError("closed form has rates below lambda0; theta is not gap-shifted")
        return pure, (lambda t: rest.shifted(t, lam0)) if rest else (lambda t: 0.0)
    if theta.kind == "sample":
        s = theta.backing
        ev = s.eigenvalues[theta.degree]
        w = np.broadcast_to(s.weights[:, None], ev.shape)
        live = ev > theta.kernel_tol
        at_gap = live & (np.abs(ev - lam0) <= 1e-10 * max(1.0, abs(lam0)))
        rest = live & ~at_gap
        gaps, wts = ev[rest] - lam0, w[rest]
        pure = [(float(w[at_gap].sum()), 0.0)] if at_gap.any() else []
        # kernel eigenvalues cancel against b up to rounding and are dropped
        return pure, lambda t: float(wts @ np.exp(-gaps * t))
    return [], lambda t: float(theta.shifted(t))


# ----------------------------------------------------------------------
# the small-time piece


def _check_expansion(theta: ThetaFunction, expansion: HeatExpansion):
    if abs(expansion.lambda0 - theta.lambda0) > 1e-12 * max(1.0, abs(theta.lambda0)):
        raise ConfigError("expansion and theta use different lambda0")
    if abs(expansion.b - theta.b) > 1e-12 * max(1.0, abs(theta.b)):
        raise ConfigError("expansion and theta use different kernel dimensions")


def _exp_tail(x, K: int):
    """``exp(-x) - sum_{k<=K} (-x)^k / k!`` without cancellation for ``|x| <= 1``."""
    x = np.asarray(x, float)
    if K < 0:
        return np.exp(-x)
    direct = np.exp(-x) - sum((-x) ** k / math.factorial(k) for k in range(K + 1))
    small = np.abs(x) <= 1.0
    if not np.any(small):
        return direct
    xs = np.where(small, x, 0.0)
    term = (-xs) ** (K + 1) / math.factorial(K + 1)
    series = term.copy()
    for k in range(K + 1, K + 30):
        term = term * (-xs) / (k + 1)
        series = series + term
    return np.where(small, series, direct)


def _closed_form_remainder(theta: ThetaFunction, expansion: HeatExpansion):
    # Exact remainder of a closed form: each term leaves only the Taylor tail
    # of its exponential, so nothing large cancels and the cutoff can be tiny.
    form: ClosedFormTheta = theta.backing
    n, depth, lam0, b = expansion.n, expansion.depth, theta.lambda0, theta.b
    pieces = []
    for alpha, p, rate in form.terms:
        shift = int(round(n / 2 - p))
        pieces.append((alpha, p, rate - lam0, depth - shift))

    def rem(t):
        t = np.asarray(t, float)
        out = np.zeros_like(t)
        for alpha, p, c, K in pieces:
            if c != 0.0 or K < 0:
                out = out + alpha * t ** (-p) * _exp_tail(c * t, K)
        if b:
            out = out + b * _exp_tail(-lam0 * t, depth - n // 2)
        return out

    return rem, 1e-8


def _remainder_fn(theta: ThetaFunction, expansion: HeatExpansion):
    """Return ``(rem, cutoff)``: ``phi`` minus its expansion, and the lower
    integration limit below which ``rem`` is neglected."""
    if theta.kind == "closed_form" and theta.backing:
        try:
            own = HeatExpansion.from_closed_form(theta, expansion.depth)
        except ConfigError:
            own = None
        if own == expansion:
            return _closed_form_remainder(theta, expansion)

    n, ct = expansion.n, expansion.c_tilde
    lam0, b = theta.lambda0, theta.b
    powers = np.arange(len(ct)) - n / 2

    def rem(t):
        t = np.asarray(t, float)
        full = _shifted_array(theta, t) + b * np.exp(lam0 * t)
        return full - np.power.outer(t, powers) @ ct

    return rem, _cutoff(expansion)


def _shifted_array(theta: ThetaFunction, t):
    try:
        vals = np.asarray(theta.shifted(t), float)
        if vals.shape == t.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(theta.shifted(x)) for x in t.ravel()]).reshape(t.shape)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _log_panel_integral(f, s: complex, t_lo: float) -> complex:
    # int_{t_lo}^1 t^(s-1) f(t) dt = int e^(u s) f(e^u) du, fixed Gauss-Legendre
    # on unit panels in u; f is smooth in u so this converges rapidly.
    u_lo = math.log(t_lo)
    edges = np.linspace(u_lo, 0.0, max(2, math.ceil(-u_lo)) + 1)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    u = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    vals = f(np.exp(u)) * np.exp(u * s)
    return complex(np.sum(w * vals))


def _cutoff(expansion: HeatExpansion) -> float:
    # Below this time the subtraction is dominated by rounding; the neglected
    # piece is of the same size as the rounding noise.
    if expansion.n == 0:
        # bounded trace: no cancellation, the remainder is O(t^(depth+1))
        return 1e-12
    return 1e-16 ** (1.0 / (expansion.depth + 1))


def _diagnose(theta: ThetaFunction, expansion: HeatExpansion, rem):
    ct = expansion.c_tilde
    scale = abs(ct[1] / ct[0]) if len(ct) > 1 and ct[0] else 1.0
    t = 1e-2 / max(1.0, scale)
    lead = abs(float(theta.shifted(t)) + theta.b * math.exp(theta.lambda0 * t))
    r = float(rem(np.array([t]))[0])
    if lead > 0 and abs(r) > 1e-3 * lead:
        raise NumericalError(
            "heat expansion does not match theta near t = 0 "
            f"(relative remainder {abs(r) / lead:.2e} at t = {t:.2e})"
        )


def _small_integral(theta: ThetaFunction, expansion: HeatExpansion, s: complex) -> complex:
    # int_0^1 t^(s-1) phi(t) dt continued in s, for s away from 0 and poles.
    n, ct = expansion.n, expansion.c_tilde
    lam0, b = theta.lambda0, theta.b
    rem, cutoff = _remainder_fn(theta, expansion)
    _diagnose(theta, expansion, rem)
    poles = sum(c / (s + i - n / 2) for i, c in enumerate(ct) if c != 0.0)
    kernel = 0j
    if b:
        extra = _quiet_quad(lambda t: t ** (s - 1) * math.expm1(lam0 * t), 0.0, 1.0) if lam0 else 0
        kernel = -b * (1.0 / s + extra)
    R = _log_panel_integral(rem, s, cutoff)
    return poles + kernel + R


def _small_laurent(theta: ThetaFunction, expansion: HeatExpansion):
    """``(a, b0)`` with ``int_0^1 t^(s-1) phi = a/s + b0 + O(s)``."""
    n, ct = expansion.n, expansion.c_tilde
    lam0, b = theta.lambda0, theta.b
    rem, cutoff = _remainder_fn(theta, expansion)
    _diagnose(theta, expansion, rem)
    a, b0 = -b, 0.0
    for i, c in enumerate(ct):
        if c == 0.0:
            continue
        if 2 * i == n:
            a += c
        else:
            b0 += c / (i - n / 2)
    if b and lam0:
        b0 -= b * _quiet_quad(lambda t: math.expm1(lam0 * t) / t, 0.0, 1.0).real
    b0 += _log_panel_integral(rem, 0.0, cutoff).real
    return a, b0


def zeta_small(theta: ThetaFunction, expansion: HeatExpansion | None, s: complex) -> complex:
    """Continued small-time piece ``zeta^(1)(s)``.

    With ``expansion=None`` a callable theta is integrated directly, which
    needs ``Re s`` large enough for convergence at ``t = 0``.
    """
    s = complex(s)
    if expansion is None and theta.kind == "callable":
        if s.real <= 0:
            raise DomainError("direct small-time integral needs Re(s) > 0; supply an expansion")
        val = _quiet_quad(lambda t: t ** (s - 1) * float(theta.shifted(t)), 0.0, 1.0)
        return complex(rgamma(s) * val)
    expansion = HeatExpansion.for_theta(theta) if expansion is None else expansion
    _check_expansion(theta, expansion)
    if abs(s) < 1e-14:
        return complex(_small_laurent(theta, expansion)[0])
    for i in range(expansion.depth + 1):
        if abs(s + i - expansion.n / 2) < 1e-14 and s.real <= 0:
            raise DomainError(f"s = {s} is a pole of the small-time piece")
    return complex(rgamma(s) * _small_integral(theta, expansion, s))


# ----------------------------------------------------------------------
# the large-time piece


def _default_beta(theta: ThetaFunction) -> float:
    if theta.kind in ("closed_form", "sample"):
        return math.inf
    return estimate_beta(theta).beta


def _large_integral(theta: ThetaFunction, s: complex) -> complex:
    pure, phi = _pure_and_decaying(theta)
    val = sum(-alpha / (s - p) for alpha, p in pure)
    return val + _tail_integral(lambda t: t ** (s - 1) * phi(t))


def _large_laurent(theta: ThetaFunction):
    pure, phi = _pure_and_decaying(theta)
    a, b0 = 0.0, 0.0
    for alpha, p in pure:
        if p == 0:
            a -= alpha
        else:
            b0 += alpha / p
    b0 += _tail_integral(lambda t: phi(t) / t).real
    return a, b0


def zeta_large(theta: ThetaFunction, s: complex, beta: float | None = None) -> complex:
    """Large-time piece ``zeta^(inf)(s)``, valid for ``Re s < beta``."""
    s = complex(s)
    beta = _default_beta(theta) if beta is None else float(beta)
    if not s.real < beta:
        raise DomainError(f"Re(s) = {s.real} is not below the decay exponent {beta}")
    if abs(s) < 1e-14:
        return complex(_large_laurent(theta)[0])
    return complex(rgamma(s) * _large_integral(theta, s))


# ----------------------------------------------------------------------
# determinants and torsion


def _zeta_total(theta, expansion, s):
    return zeta_small(theta, expansion, s) + zeta_large(theta, s, math.inf)


def determinant(theta: ThetaFunction, expansion: HeatExpansion | None = None,
                beta: float | None = None, check: bool = False) -> ZetaReport:
    """Zeta values at 0 and ``log Det(Delta_j - lambda0) = -zeta'(0)``.

    ``beta`` is the decay exponent of the part of ``exp(lambda0 t) theta``
    that is not a pure power; it defaults to ``inf`` for spectral and
    closed-form backings (exponential decay) and to the fitted exponent
    for callables. With ``check`` the result is compared against
    Richardson-extrapolated differences of ``zeta`` at ``s = +-0.01`` and
    ``+-0.005``.
    """
    beta = _default_beta(theta) if beta is None else float(beta)
    if not beta > 0:
        raise DomainError("the decay exponent must be positive for the determinant")
    expansion = HeatExpansion.for_theta(theta) if expansion is None else expansion
    _check_expansion(theta, expansion)

    a1, b1 = _small_laurent(theta, expansion)
    aL, bL = _large_laurent(theta)
    z0 = a1 + aL
    zp = b1 + bL + EULER_GAMMA * z0
    notes = {"large_piece_strip": f"Re(s) < {beta}"}

    if check:
        if beta <= 0.01:
            raise DomainError("decay exponent too small for the difference check")
        vals = {h: (_zeta_total(theta, expansion, h).real, _zeta_total(theta, expansion, -h).real)
                for h in (0.01, 0.005)}
        z_mid = {h: 0.5 * (p + m) for h, (p, m) in vals.items()}
        d_mid = {h: (p - m) / (2 * h) for h, (p, m) in vals.items()}
        z_ex = (4 * z_mid[0.005] - z_mid[0.01]) / 3
        d_ex = (4 * d_mid[0.005] - d_mid[0.01]) / 3
        if abs(z_ex - z0) > 1e-5 or abs(d_ex - zp) > 1e-5 * max(1.0, abs(zp)):
            raise NumericalError(
                f"zeta at 0 inconsistent with finite differences: {z0} vs {z_ex}, {zp} vs {d_ex}"
            )
        notes["difference_check"] = {"zeta_at_0": z_ex, "zeta_prime_at_0": d_ex}

    return ZetaReport(
        degree=theta.degree,
        lambda0=theta.lambda0,
        beta=beta,
        zeta1_at_0=a1,
        zeta_inf_at_0=aL,
        zeta_at_0=z0,
        zeta1_prime_at_0=b1 + EULER_GAMMA * a1,
        zeta_inf_prime_at_0=bL + EULER_GAMMA * aL,
        zeta_prime_at_0=zp,
        log_determinant=-zp,
        notes=notes,
    )


def beta_torsion(reports) -> float:
    """Logarithm of the beta-torsion, ``sum_j j (-1)^j log Det_j``.

    ``reports`` is a sequence indexed by degree or a mapping from degree to
    :class:`ZetaReport`; every degree from 0 to the maximum must be present.
    """
    if isinstance(reports, Mapping):
        table = dict(reports)
    else:
        table = {j: r for j, r in enumerate(reports)}
    if not table:
        raise ConfigError("no determinant reports supplied")
    top = max(table)
    missing = [j for j in range(top + 1) if j not in table]
    if missing:
        raise ConfigError(f"missing degrees {missing} for the torsion")
    for j, r in table.items():
        if not r.beta > 0:
            raise DomainError(f"degree {j} lacks positive decay (beta = {r.beta})")
    return float(sum(j * (-1) ** j * table[j].log_determinant for j in range(top + 1)))


def ns_zeta(theta: ThetaFunction, alpha: float, s: complex, piece: str,
            expansion: HeatExpansion | None = None) -> complex:
    """Zeta pieces with ``lambda0`` forced to zero.

    ``piece`` is ``"small"`` (``zeta(s, 1)``) or ``"large"``
    (``zeta(s, inf)``, requires ``Re s < alpha``).
    """
    th = replace(theta, lambda0=0.0)
    if piece == "small":
        if expansion is not None:
            expansion = replace(expansion, lambda0=0.0)
        return zeta_small(th, expansion, s)
    if piece == "large":
        return zeta_large(th, s, alpha)
    raise ConfigError(f"unknown piece {piece!r}; expected 'small' or 'large'")
