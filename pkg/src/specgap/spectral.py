"""Theta functions, decay exponents and Laplace-transform utilities.

``theta_j(t) = tau(exp(-t Delta_j)) - b_j`` where ``b_j`` is the
Gamma-dimension of the kernel. Its large-time behaviour after removing the
gap, ``exp(lambda0 t) theta_j(t) ~ t**(-beta)``, is summarised by the lower
and upper exponents ``beta`` and ``beta_bar``, estimated here by envelope
regression on a log-uniform window.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import linprog

from ._errors import ConfigError, DomainError
from .bloch import SpectralSample, spectrum_summary
from .closed_form import ClosedFormTheta

__all__ = [
    "ThetaFunction",
    "BetaEstimate",
    "BetaEstimator",
    "theta",
    "theta_truncated",
    "estimate_beta",
    "laplace_of_density",
    "estimate_density_exponent",
]


def _positive_t(t):
    t = np.asarray(t, float)
    if np.any(~(t > 0)):
        raise DomainError("t must be positive")
    return t


def _out(x):
    x = np.asarray(x, float)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True, eq=False)
class ThetaFunction:
    """Theta function of one degree with its kernel dimension and gap.

    ``backing`` is a :class:`SpectralSample`, a :class:`ClosedFormTheta`
    (already without its constant term) or a callable ``t -> theta(t)``.
    """

    degree: int
    backing: object
    b: float = 0.0
    lambda0: float = 0.0
    kernel_tol: float = 0.0
    meta: dict = field(default_factory=dict)
    shifted_callable: bool = False

    # ------------------------------------------------------------------
    # constructors
    @classmethod
    def from_sample(cls, sample: SpectralSample, degree: int, kernel_tol: float | None = None,
                    lambda0: float | None = None) -> "ThetaFunction":
        summary = spectrum_summary(sample, kernel_tol)
        return cls(
            degree=degree,
            backing=sample,
            b=summary.kernel_dim[degree],
            lambda0=summary.lambda0[degree] if lambda0 is None else float(lambda0),
            kernel_tol=summary.kernel_tol,
        )

    @classmethod
    def from_closed_form(cls, form: ClosedFormTheta, degree: int = 0,
                         lambda0: float | None = None) -> "ThetaFunction":
        rest = form.without_constant()
        lam0 = rest.min_rate if lambda0 is None else float(lambda0)
        if not math.isfinite(lam0):
            lam0 = 0.0
        return cls(degree=degree, backing=rest, b=form.constant, lambda0=lam0)

    @classmethod
    def from_callable(cls, func: Callable, degree: int = 0, lambda0: float = 0.0,
                      b: float = 0.0, shifted: bool = False) -> "ThetaFunction":
        """Wrap ``t -> theta(t)``; with ``shifted`` the callable returns
        ``exp(lambda0 t) theta(t)`` instead."""
        return cls(degree=degree, backing=func, b=float(b), lambda0=float(lambda0),
                   shifted_callable=shifted)

    # ------------------------------------------------------------------
    @property
    def kind(self) -> str:
        if isinstance(self.backing, SpectralSample):
            return "sample"
        if isinstance(self.backing, ClosedFormTheta):
            return "closed_form"
        return "callable"

    def _sample_parts(self):
        s = self.backing
        ev = s.eigenvalues[self.degree]
        return ev, s.weights, ev > self.kernel_tol

    def shifted(self, t):
        """``exp(lambda0 t) * theta(t)`` evaluated without overflow."""
        t = _positive_t(t)
        lam0 = self.lambda0
        if self.kind == "closed_form":
            return _out(self.backing.shifted(t, lam0))
        if self.kind == "sample":
            ev, w, live = self._sample_parts()
            x = np.where(live, ev - lam0, np.inf)
            nz = np.exp(-np.multiply.outer(t, x)).sum(axis=-1) @ w
            ker = np.exp(-np.multiply.outer(t, np.where(live, np.inf, ev))).sum(axis=-1) @ w
            return _out(nz + np.exp(lam0 * t) * (ker - self.b))
        if self.shifted_callable:
            return _out(self.backing(t))
        return _out(np.exp(lam0 * t) * np.asarray(self.backing(t), float))

    def __call__(self, t):
        t = _positive_t(t)
        if self.kind == "callable":
            if self.shifted_callable:
                return _out(np.exp(-self.lambda0 * t) * np.asarray(self.backing(t), float))
            return _out(self.backing(t))
        if self.kind == "closed_form":
            return _out(self.backing(t))
        ev, w, live = self._sample_parts()
        nz = np.exp(-np.multiply.outer(t, np.where(live, ev, np.inf))).sum(axis=-1) @ w
        ker = np.exp(-np.multiply.outer(t, np.where(live, np.inf, ev))).sum(axis=-1) @ w
        return _out(nz + ker - self.b)

    def counting(self, lam: float) -> float:
        """Counting function of the spectral measure of ``theta`` at ``lam``."""
        if self.kind == "closed_form":
            return self.backing.counting(lam)
        if self.kind == "sample":
            ev, w, live = self._sample_parts()
            return float(w @ (live & (ev <= lam)).sum(axis=1))
        raise ConfigError("counting function needs a spectral backing")

    def truncated(self, nu: float, t, boundary_term: bool = False):
        """Transform of the spectral measure on ``(lambda0 + nu, inf)``."""
        if nu < 0:
            raise ConfigError("nu must be non-negative")
        t = _positive_t(t)
        cut = self.lambda0 + nu
        if self.kind == "closed_form":
            return _out(self.backing.truncated(cut, t, boundary_term))
        if self.kind == "sample":
            ev, w, live = self._sample_parts()
            keep = live & (ev > cut)
            val = np.exp(-np.multiply.outer(t, np.where(keep, ev, np.inf))).sum(axis=-1) @ w
            if boundary_term:
                val = val + np.exp(-cut * t) * self.counting(cut)
            return _out(val)
        raise ConfigError("truncated theta needs a spectral backing")

    @property
    def max_eigenvalue(self) -> float:
        if self.kind == "sample":
            return float(np.max(self.backing.eigenvalues[self.degree]))
        return math.inf


def _as_theta(backing, degree) -> ThetaFunction:
    if isinstance(backing, ThetaFunction):
        return backing
    if isinstance(backing, SpectralSample):
        return ThetaFunction.from_sample(backing, degree)
    if isinstance(backing, ClosedFormTheta):
        return ThetaFunction.from_closed_form(backing, degree)
    if callable(backing):
        return ThetaFunction.from_callable(backing, degree)
    raise ConfigError(f"unsupported theta backing {type(backing).__name__}")


def theta(backing, degree: int, t):
    """Evaluate ``theta_j(t)`` for any supported backing."""
    return _as_theta(backing, degree)(t)


def theta_truncated(backing, degree: int, nu: float, t, boundary_term: bool = False):
    """Evaluate the truncated theta function ``theta_{j, nu}(t)``."""
    return _as_theta(backing, degree).truncated(nu, t, boundary_term)


# ----------------------------------------------------------------------
# decay exponents


def _envelope(x, y, upper: bool):
    # Line a + s x lying above (or below) all points with least mean gap.
    n = len(x)
    sign = 1.0 if upper else -1.0
    c = sign * np.array([n, x.sum()])
    A = -sign * np.column_stack([np.ones(n), x])
    res = linprog(c, A_ub=A, b_ub=-sign * y, bounds=[(None, None), (None, None)], method="highs")
    if not res.success:
        raise DomainError(f"envelope fit failed: {res.message}")
    return res.x


@dataclass(frozen=True)
class BetaEstimate:
    """Fitted decay exponents of ``exp(lambda0 t) theta(t)`` on a window."""

    beta: float
    beta_bar: float
    window_min: float
    window_max: float
    residual: float
    lambda0: float
    slope: float = math.nan
    n_points: int = 0


def _fit_power_law(t, y, lambda0: float = 0.0, min_ratio: float = 10.0) -> dict:
    """Envelope and least-squares slopes of ``log(exp(lambda0 t) y)`` against ``log t``."""
    t = np.asarray(t, float).reshape(-1)
    y = np.asarray(y, float).reshape(-1)
    if t.shape != y.shape or t.size < 3:
        raise ConfigError("need at least three (t, theta) pairs of equal length")
    t = _positive_t(t)
    if t.max() / t.min() < min_ratio:
        raise ConfigError(f"window ratio t_max/t_min must be at least {min_ratio}")
    if np.any(~(y > 0)):
        raise DomainError("theta must be positive on the fit window")
    x = np.log(t)
    ly = np.log(y) + lambda0 * t
    slope, intercept = np.polyfit(x, ly, 1)
    up = _envelope(x, ly, upper=True)
    lo = _envelope(x, ly, upper=False)
    return dict(
        slope=float(slope),
        intercept=float(intercept),
        beta=float(-up[1]),
        beta_bar=float(-lo[1]),
        residual=float(np.max(np.abs(ly - (intercept + slope * x)))),
        window=(float(t.min()), float(t.max())),
    )


def __getattr__(name):
    # The sklearn-compatible estimator lives apart so importing this module stays cheap.
    if name == "BetaEstimator":
        from ._estimator import BetaEstimator
        return BetaEstimator
    raise AttributeError(name)


def estimate_beta(theta: ThetaFunction, lambda0: float | None = None, window=(10.0, 1000.0),
                  n_points: int = 60) -> BetaEstimate:
    """Estimate ``beta`` and ``beta_bar`` of a theta function on a window."""
    th = _as_theta(theta, 0)
    lam0 = th.lambda0 if lambda0 is None else float(lambda0)
    t_min, t_max = (float(w) for w in window)
    if not (0 < t_min < t_max) or t_max / t_min < 10:
        raise ConfigError("window must satisfy 0 < t_min and t_max / t_min >= 10")
    if n_points < 3:
        raise ConfigError("n_points must be at least 3")
    if th.kind == "sample" and t_min < 0.1 / th.max_eigenvalue:
        raise DomainError("window reaches the saturated small-t regime of a combinatorial theta")
    t = np.geomspace(t_min, t_max, n_points)
    if lam0 == th.lambda0:
        shifted = np.asarray(th.shifted(t), float)
    else:
        shifted = np.asarray(th.shifted(t), float) * np.exp((lam0 - th.lambda0) * t)
    if np.any(~(shifted > 0)):
        raise DomainError("theta is not positive on the fit window")
    # Fit on the shifted values directly so large lambda0 t does not overflow.
    est = _fit_power_law(t, shifted)
    return BetaEstimate(
        beta=est["beta"],
        beta_bar=est["beta_bar"],
        window_min=t_min,
        window_max=t_max,
        residual=est["residual"],
        lambda0=lam0,
        slope=est["slope"],
        n_points=n_points,
    )


# ----------------------------------------------------------------------
# Laplace-Stieltjes transforms of spectral densities


def _laplace_callable(G, lambda0, t):
    # Integration by parts: psi = G(l0) + t int_0^inf exp(-u t) (G(l0 + u) - G(l0)) du,
    # returned without the factor exp(-l0 t).
    g0 = float(G(lambda0))

    def f(u):
        return math.exp(-u * t) * (G(lambda0 + u) - g0)

    scale = 1.0 / t
    with warnings.catch_warnings():
        # roundoff notices near the 1e-12 target are expected and harmless here
        warnings.simplefilter("ignore", IntegrationWarning)
        return g0 + t * _split_quad(f, scale)


def _split_quad(f, scale):
    total, points = 0.0, [0.0] + [scale * 2.0**k for k in range(-30, 8)]
    for a, b in zip(points[:-1], points[1:]):
        total += quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    total += quad(f, points[-1], np.inf, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    return total


def laplace_of_density(G, t, lambda0: float | None = None, shifted: bool = False):
    """Laplace-Stieltjes transform ``psi(t) = int exp(-lam t) dG(lam)``.

    ``G`` is either a tabulation ``(lam, values)`` of a non-decreasing
    function (taken as 0 left of ``lam[0]`` and piecewise linear between
    nodes), or a callable together with ``lambda0``, the left end of its
    support. With ``shifted`` the value ``exp(lambda0 t) psi(t)`` is
    returned, which stays representable for large ``lambda0 t``.
    """
    ts = _positive_t(t)
    out = []
    for tt in np.atleast_1d(ts).astype(float):
        if callable(G):
            if lambda0 is None:
                raise ConfigError("lambda0 is required for a callable density")
            base = float(lambda0)
            if G(base + 1.0) < G(base) or G(base + 2.0) < G(base + 1.0):
                raise ConfigError("G must be non-decreasing")
            psi = _laplace_callable(G, base, tt)
        else:
            lam, vals = (np.asarray(a, float) for a in G)
            if lam.shape != vals.shape or lam.ndim != 1 or lam.size < 2:
                raise ConfigError("tabulated density needs matching 1-d arrays")
            if np.any(np.diff(lam) <= 0):
                raise ConfigError("lambda nodes must be strictly increasing")
            if np.any(np.diff(vals) < 0) or vals[0] < 0:
                raise ConfigError("G must be non-decreasing and non-negative")
            base = lam[0] if lambda0 is None else float(lambda0)
            e = np.exp(-(lam - base) * tt)
            slope = np.diff(vals) / np.diff(lam)
            psi = vals[0] * e[0] + np.sum(slope * (e[:-1] - e[1:])) / tt
            if vals[-1] * e[-1] > 1e-14 * max(psi, 1e-300):
                raise DomainError("tabulation ends before the exponential tail is negligible")
        out.append(psi if shifted else psi * math.exp(-base * tt))
    out = np.array(out)
    return float(out[0]) if np.ndim(t) == 0 else out.reshape(np.shape(t))


def estimate_density_exponent(G: Callable, lambda0: float, window=(1e-4, 1e-2),
                              n_points: int = 40) -> BetaEstimate:
    """Exponent ``alpha`` of ``G(lam) ~ (lam - lambda0)**alpha`` near the bottom.

    The returned estimate reuses :class:`BetaEstimate` with ``beta`` and
    ``beta_bar`` holding the lower and upper envelope exponents.
    """
    lo, hi = (float(w) for w in window)
    if not (0 < lo < hi) or hi / lo < 10:
        raise ConfigError("window must satisfy 0 < lo and hi / lo >= 10")
    d = np.geomspace(lo, hi, n_points)
    vals = np.array([G(lambda0 + x) for x in d], float)
    if np.any(~(vals > 0)):
        raise DomainError("density must be positive on the window")
    # An increasing power law is a decaying one in 1/d.
    est = _fit_power_law(1.0 / d, vals)
    return BetaEstimate(
        beta=est["beta"],
        beta_bar=est["beta_bar"],
        window_min=lo,
        window_max=hi,
        residual=est["residual"],
        lambda0=float(lambda0),
        slope=-est["slope"],
        n_points=n_points,
    )
