"""Closed-form heat traces of closed odd-dimensional hyperbolic manifolds.

Only the identity contribution of the trace formula is modelled: in degree
``j <= n`` (``d = 2n + 1``) the heat trace is ``I_t(sigma_j) + I_t(sigma_{j-1})``
with

    I_t(sigma_j) = a_j int_R exp(-t (nu^2 + c_j^2)) P_j(nu) d nu,
    a_j = binom(d - 1, j) vol,   c_j = n - j,

and ``P_j(nu) = prod_{k=0}^{n} (nu^2 + k^2) / (nu^2 + (n - j)^2)``. Degrees
above ``n`` follow from Hodge duality ``theta_j = theta_{d-j}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ._errors import ConfigError
from .closed_form import ClosedFormTheta
from .spectral import ThetaFunction
from .zeta import ZetaReport, beta_torsion, determinant

__all__ = [
    "HyperbolicModel",
    "plancherel_poly",
    "i_t_sigma",
    "theta_hyperbolic",
    "gap_table",
    "gap_formula",
    "product_theta",
    "product_gap_formula",
    "determinant_hyperbolic",
    "zeta_report_hyperbolic",
    "torsion_hyperbolic",
    "CLOSED_FORM_MODELS",
    "model_thetas",
]

# Shipped closed-form models: odd dimensions of the hyperbolic factors.
CLOSED_FORM_MODELS = {
    "H3": (3,),
    "H5": (5,),
    "H7": (7,),
    "H9": (9,),
    "H3xH3": (3, 3),
    "H3xH5": (3, 5),
}


@dataclass(frozen=True)
class HyperbolicModel:
    """A closed hyperbolic manifold of odd dimension ``d`` and given volume."""

    d: int
    volume: float = 1.0

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 3 or self.d % 2 == 0:
            raise ConfigError(f"d must be an odd integer >= 3, got {self.d!r}")
        if not (self.volume > 0 and math.isfinite(self.volume)):
            raise ConfigError("volume must be positive and finite")

    @property
    def n(self) -> int:
        return (self.d - 1) // 2

    def a(self, j: int) -> float:
        self._check_sigma(j)
        return math.comb(self.d - 1, j) * self.volume

    def c(self, j: int) -> int:
        self._check_sigma(j)
        return self.n - j

    def _check_sigma(self, j):
        if not 0 <= j <= self.n:
            raise ConfigError(f"representation index must lie in 0..{self.n}")


def _poly_mul(p, q):
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for k, b in enumerate(q):
            out[i + k] += a * b
    return out


def plancherel_poly(d: int, j: int) -> tuple:
    """Integer coefficients of ``P_j`` as a polynomial in ``x = nu^2``.

    Entry ``m`` of the result is the coefficient of ``nu^(2m)``. The
    cancelled factor is simply omitted from the product, so the arithmetic
    stays exact.
    """
    if not isinstance(d, int) or d < 3 or d % 2 == 0:
        raise ConfigError(f"d must be an odd integer >= 3, got {d!r}")
    n = (d - 1) // 2
    if not 0 <= j <= n:
        raise ConfigError(f"j must lie in 0..{n}")
    poly = [1]
    for k in range(n + 1):
        if k == n - j:
            continue
        poly = _poly_mul(poly, [k * k, 1])
    return tuple(poly)


def i_t_sigma(model: HyperbolicModel, j: int) -> ClosedFormTheta:
    """``I_t(sigma_j)`` through the Gaussian moments ``Gamma(m + 1/2) t^(-m-1/2)``."""
    if j < 0:
        return ClosedFormTheta()
    coeffs = plancherel_poly(model.d, j)
    a, rate = model.a(j), model.c(j) ** 2
    return ClosedFormTheta(
        (a * cm * math.gamma(m + 0.5), m + 0.5, rate)
        for m, cm in enumerate(coeffs)
        if cm
    )


def theta_hyperbolic(model: HyperbolicModel, degree: int) -> ClosedFormTheta:
    """Heat trace (equal to theta: no L2 kernel) of degree ``degree``."""
    if not 0 <= degree <= model.d:
        raise ConfigError(f"degree must lie in 0..{model.d}")
    j = degree if degree <= model.n else model.d - degree
    return i_t_sigma(model, j) + i_t_sigma(model, j - 1)


def gap_table(model: HyperbolicModel) -> tuple:
    """Bottom of the spectrum per degree, read off as the minimum term rate."""
    return tuple(theta_hyperbolic(model, j).min_rate for j in range(model.d + 1))


def gap_formula(model: HyperbolicModel) -> tuple:
    """Bottom of the spectrum per degree from ``c_j``: ``n^2`` in degree 0,
    ``min(c_j^2, c_{j-1}^2)`` for ``1 <= j <= n``, mirrored above ``n``."""
    n = model.n
    low = [n * n] + [min((n - j) ** 2, (n - j + 1) ** 2) for j in range(1, n + 1)]
    return tuple(float(low[j if j <= n else model.d - j]) for j in range(model.d + 1))


def product_theta(A: Sequence[ClosedFormTheta], B: Sequence[ClosedFormTheta], k: int) -> ClosedFormTheta:
    """Theta of degree ``k`` on a product of two L2-acyclic factors.

    ``A`` and ``B`` list the factor thetas by degree. Since the Laplacian of
    a product metric splits, ``theta_k = sum_{i+j=k} theta_i^A theta_j^B``.
    """
    for name, factor in (("first", A), ("second", B)):
        if not factor:
            raise ConfigError(f"{name} factor has no degrees")
        for deg, th in enumerate(factor):
            if th.constant != 0:
                raise ConfigError(
                    f"{name} factor is not L2-acyclic: degree {deg} has a kernel term"
                )
    if not 0 <= k <= len(A) + len(B) - 2:
        raise ConfigError(f"degree {k} out of range for the product")
    out = ClosedFormTheta()
    for i in range(len(A)):
        j = k - i
        if 0 <= j < len(B):
            out = out + A[i] * B[j]
    return out


def product_gap_formula(gaps_a: Sequence[float], gaps_b: Sequence[float], k: int) -> float:
    """``min(gaps_a[i] + gaps_b[j] : i + j = k)``."""
    vals = [gaps_a[i] + gaps_b[k - i] for i in range(len(gaps_a)) if 0 <= k - i < len(gaps_b)]
    if not vals:
        raise ConfigError(f"degree {k} out of range for the product")
    return min(vals)


def zeta_report_hyperbolic(model: HyperbolicModel, degree: int, check: bool = False) -> ZetaReport:
    """Zeta data of ``Delta_j - lambda0_j`` for the model."""
    th = ThetaFunction.from_closed_form(theta_hyperbolic(model, degree), degree)
    return determinant(th, check=check)


def determinant_hyperbolic(model: HyperbolicModel, degree: int) -> float:
    """``log Det(Delta_j - lambda0_j)``; power terms at the gap contribute 0."""
    return zeta_report_hyperbolic(model, degree).log_determinant


def torsion_hyperbolic(model: HyperbolicModel) -> float:
    """Logarithm of the beta-torsion over all degrees ``0..d``."""
    return beta_torsion([zeta_report_hyperbolic(model, j) for j in range(model.d + 1)])


def model_thetas(name: str, volume: float = 1.0) -> list:
    """Theta functions by degree of a shipped closed-form model.

    Every hyperbolic factor gets volume ``volume``.
    """
    if name not in CLOSED_FORM_MODELS:
        raise ConfigError(f"unknown model {name!r}; known: {sorted(CLOSED_FORM_MODELS)}")
    dims = CLOSED_FORM_MODELS[name]
    factors = [[theta_hyperbolic(HyperbolicModel(d, volume), j) for j in range(d + 1)] for d in dims]
    thetas = factors[0]
    for other in factors[1:]:
        thetas = [product_theta(thetas, other, k) for k in range(len(thetas) + len(other) - 1)]
    return thetas
