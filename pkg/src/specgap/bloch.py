"""Character-twisted Laplacians and their sampled spectra.

For a Z^g-periodic complex the von Neumann trace of an equivariant operator
is the average over the character torus of the ordinary trace of its
twisted matrices. Characters are sampled on a tensor midpoint grid
``k = 2 pi (i + 1/2) / R`` with equal weights, which is the periodic
trapezoid rule shifted off the trivial character.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from ._errors import ConfigError, NumericalError
from .complex import PeriodicComplex
from .whitney import MassFamily, mass_family

__all__ = [
    "TwistedOperatorFamily",
    "SpectralSample",
    "SpectrumSummary",
    "assemble_laplacian",
    "laplacian_families",
    "character_grid",
    "sample_spectrum",
    "vn_heat_trace",
    "spectral_density",
    "spectrum_summary",
]


@dataclass(frozen=True, eq=False)
class TwistedOperatorFamily:
    """The family ``k -> (A_j(k), M_j(k))`` representing the Whitney Laplacian.

    ``A = d_j^H M_{j+1} d_j + M_j d_{j-1} M_{j-1}^{-1} d_{j-1}^H M_j`` so that
    the generalized problem ``A v = lam M v`` is the eigenproblem of
    ``delta d + d delta`` in the Whitney inner product. A nonzero
    ``mass_shift`` adds ``mass_shift * M`` (the deformation ``Delta + m^2``).
    """

    complex: PeriodicComplex
    masses: tuple
    degree: int
    mass_shift: float = 0.0

    @property
    def size(self) -> int:
        return self.complex.n_cells(self.degree)

    def parts(self, k):
        """Return ``(A_up, A_down, M)`` at character ``k``.

        ``A_up`` carries ``delta d`` (coexact spectrum), ``A_down`` carries
        ``d delta`` (exact spectrum). The mass shift is not included.
        """
        c, j, g = self.complex, self.degree, self.complex.rank
        k = np.asarray(k, float).reshape(g)
        M = self.masses[j](k)
        M = 0.5 * (M + M.conj().T)
        if j < g:
            D = c.twisted_coboundary(j, k)
            up = D.conj().T @ self.masses[j + 1](k) @ D
        else:
            up = np.zeros_like(M)
        if j > 0:
            D = c.twisted_coboundary(j - 1, k)
            C = sla.cho_factor(self.masses[j - 1](k))
            down = M @ D @ sla.cho_solve(C, D.conj().T @ M)
        else:
            down = np.zeros_like(M)
        return 0.5 * (up + up.conj().T), 0.5 * (down + down.conj().T), M

    def __call__(self, k):
        up, down, M = self.parts(k)
        A = up + down
        if self.mass_shift:
            A = A + self.mass_shift * M
        return A, M


def assemble_laplacian(complex: PeriodicComplex, masses, degree: int,
                       mass_shift: float = 0.0) -> TwistedOperatorFamily:
    """Twisted Whitney Laplacian of one degree.

    ``masses`` is a sequence of :class:`MassFamily` indexed by degree; the
    entries for ``degree - 1``, ``degree`` and ``degree + 1`` are used when
    those degrees exist.
    """
    g = complex.rank
    if not 0 <= degree <= g:
        raise ConfigError(f"degree must lie in 0..{g}")
    if mass_shift < 0:
        raise ConfigError("mass_shift must be non-negative")
    masses = tuple(masses)
    for j in range(max(0, degree - 1), min(g, degree + 1) + 1):
        if j >= len(masses) or masses[j] is None:
            raise ConfigError(f"mass family of degree {j} is required")
        m = masses[j]
        if not isinstance(m, MassFamily) or m.degree != j or m.size != complex.n_cells(j):
            raise ConfigError(f"mass family of degree {j} does not match the complex")
    return TwistedOperatorFamily(complex, masses, degree, float(mass_shift))


def laplacian_families(complex: PeriodicComplex, mass_shift: float = 0.0) -> list:
    """Laplacian families for all degrees ``0..g``."""
    masses = [mass_family(complex, j) for j in range(complex.rank + 1)]
    return [assemble_laplacian(complex, masses, j, mass_shift) for j in range(complex.rank + 1)]


def character_grid(g: int, resolution: int):
    """Midpoint tensor grid on ``[0, 2 pi)^g`` with equal weights."""
    if resolution < 2:
        raise ConfigError("grid_resolution must be at least 2")
    axis = 2.0 * np.pi * (np.arange(resolution) + 0.5) / resolution
    nodes = np.array(list(itertools.product(axis, repeat=g)))
    weights = np.full(len(nodes), 1.0 / len(nodes))
    return nodes, weights


@dataclass(frozen=True, eq=False)
class SpectralSample:
    """Generalized eigenvalues of twisted Laplacians on a character grid.

    ``eigenvalues[j]`` and ``coexact[j]`` have shape ``(n_nodes, n_cells_j)``
    and are sorted along the last axis. ``coexact[j]`` holds the spectrum of
    ``delta d`` alone, whose nonzero part is the spectrum on the orthogonal
    complement of ``ker d``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    degrees: tuple
    eigenvalues: dict
    coexact: dict
    resolution: int
    mass_shift: float = 0.0
    meta: dict = field(default_factory=dict)

    def n_cells(self, degree: int) -> int:
        return self.eigenvalues[degree].shape[1]

    @property
    def max_eigenvalue(self) -> float:
        return max(float(np.max(self.eigenvalues[j])) for j in self.degrees)


def _solve_node(families, k, verify):
    full, co = [], []
    for fam in families:
        try:
            up, down, M = fam.parts(k)
            A = up + down
            if fam.mass_shift:
                A = A + fam.mass_shift * M
            if verify:
                lam, vec = sla.eigh(A, M)
            else:
                lam = sla.eigh(A, M, eigvals_only=True)
            mu = sla.eigh(up, M, eigvals_only=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(
                f"generalized eigenproblem failed in degree {fam.degree} at character {np.round(k, 12).tolist()}: {exc}"
            ) from exc
        if verify:
            R = A @ vec - (M @ vec) * lam
            scale = max(np.linalg.norm(A, 2), 1.0) * np.linalg.norm(vec, axis=0)
            if np.any(np.linalg.norm(R, axis=0) > 1e-10 * scale):
                raise NumericalError(
                    f"eigen residual above 1e-10 in degree {fam.degree} at character {np.round(k, 12).tolist()}"
                )
        full.append(lam)
        co.append(mu)
    return full, co


def sample_spectrum(families: Sequence[TwistedOperatorFamily], grid_resolution: int = 32,
                    threads: int | None = None, verify: bool = False) -> SpectralSample:
    """Solve all generalized eigenproblems on the character grid.

    Characters may be solved concurrently; results are gathered in grid
    order, so the output does not depend on ``threads``.
    """
    families = list(families)
    if not families:
        raise ConfigError("at least one operator family is required")
    c = families[0].complex
    if any(f.complex is not c for f in families):
        raise ConfigError("all families must share one complex")
    nodes, weights = character_grid(c.rank, int(grid_resolution))

    def work(k):
        return _solve_node(families, k, verify)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, nodes))
    else:
        results = [work(k) for k in nodes]

    degrees = tuple(f.degree for f in families)
    eig = {j: np.array([r[0][i] for r in results]) for i, j in enumerate(degrees)}
    co = {j: np.array([r[1][i] for r in results]) for i, j in enumerate(degrees)}
    return SpectralSample(
        nodes=nodes,
        weights=weights,
        degrees=degrees,
        eigenvalues=eig,
        coexact=co,
        resolution=int(grid_resolution),
        mass_shift=families[0].mass_shift,
        meta={
            "rank": c.rank,
            "n_per_axis": c.n_per_axis,
            "volume": c.volume,
            "cell_counts": c.cell_counts,
        },
    )


def _check_degree(sample: SpectralSample, degree: int):
    if degree not in sample.eigenvalues:
        raise ConfigError(f"degree {degree} is not present in the sample")


def vn_heat_trace(sample: SpectralSample, degree: int, t) -> float | np.ndarray:
    """Von Neumann heat trace: character average of ``tr exp(-t Delta_j(k))``."""
    _check_degree(sample, degree)
    t_arr = np.asarray(t, float)
    if np.any(t_arr <= 0):
        raise ConfigError("t must be positive")
    lam = sample.eigenvalues[degree]
    vals = np.exp(-np.multiply.outer(t_arr, lam)).sum(axis=-1) @ sample.weights
    return float(vals) if vals.ndim == 0 else vals


def _default_tol(sample: SpectralSample) -> float:
    return 1e-10 * max(sample.max_eigenvalue, 1e-300)


def _linear_count(values, weights, lam):
    # Per band, interpolate linearly between periodic neighbours and measure
    # the fraction of each segment where the band lies below lam.
    a = values
    b = np.roll(values, -1, axis=0)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(hi > lo, (lam - lo) / (hi - lo), (lam >= lo).astype(float))
    frac = np.clip(frac, 0.0, 1.0)
    return float(weights @ frac.sum(axis=1))


def spectral_density(sample: SpectralSample, degree: int, lam: float, kind: str = "full",
                     kernel_tol: float | None = None, method: str | None = None) -> float:
    """Spectral counting functions of the sampled Laplacian.

    kind
        ``"full"``: every eigenvalue in ``[0, lam]`` (includes the kernel).
        ``"coexact"``: nonzero eigenvalues of ``delta d`` in ``[0, lam]``,
        i.e. the count on the orthogonal complement of ``ker d``.
        ``"nonzero"``: eigenvalues in ``(kernel_tol, lam]``.
    method
        ``"count"`` weights node counts (first-order accurate);
        ``"linear"`` interpolates bands linearly between nodes, only for
        ``g = 1``. The default is ``"linear"`` when ``g = 1``.
    """
    _check_degree(sample, degree)
    if lam < 0:
        raise ConfigError("lambda must be non-negative")
    g = sample.nodes.shape[1]
    method = method or ("linear" if g == 1 else "count")
    if method not in ("count", "linear"):
        raise ConfigError(f"unknown method {method!r}")
    if method == "linear" and g != 1:
        raise ConfigError("linear band interpolation is only available for g = 1")
    tol = _default_tol(sample) if kernel_tol is None else kernel_tol

    if kind == "full":
        vals = sample.eigenvalues[degree]
    elif kind == "coexact":
        vals = np.where(sample.coexact[degree] > tol, sample.coexact[degree], np.inf)
    elif kind == "nonzero":
        vals = np.where(sample.eigenvalues[degree] > tol, sample.eigenvalues[degree], np.inf)
    else:
        raise ConfigError(f"unknown density kind {kind!r}")

    if method == "count":
        return float(sample.weights @ (vals <= lam).sum(axis=1))
    finite = np.where(np.isfinite(vals), vals, np.finfo(float).max)
    return _linear_count(finite, sample.weights, lam)


@dataclass(frozen=True)
class SpectrumSummary:
    """Per-degree bottom of spectrum, kernel dimension and coexact bottom."""

    degrees: tuple
    lambda0: dict
    kernel_dim: dict
    kappa0: dict
    kernel_tol: float
    generic_kernel_dim: dict = field(default_factory=dict)


def spectrum_summary(sample: SpectralSample, kernel_tol: float | None = None) -> SpectrumSummary:
    """Bottom of the spectrum and Gamma-dimension of the kernel per degree.

    ``kernel_dim`` is the weighted count of eigenvalues at or below
    ``kernel_tol``; ``generic_kernel_dim`` is the smallest per-node kernel
    count, which ignores isolated degenerate characters. ``kappa0`` is the
    bottom of the nonzero ``delta d`` spectrum plus any mass shift (``inf``
    when empty).
    """
    tol = _default_tol(sample) if kernel_tol is None else float(kernel_tol)
    if tol <= 0:
        raise ConfigError("kernel_tol must be positive")
    lam0, kdim, kap, gen = {}, {}, {}, {}
    for j in sample.degrees:
        ev = sample.eigenvalues[j]
        above = ev[ev > tol]
        if above.size == 0:
            raise NumericalError(f"all eigenvalues of degree {j} lie below the kernel tolerance")
        counts = (ev <= tol).sum(axis=1)
        lam0[j] = float(above.min())
        kdim[j] = float(sample.weights @ counts)
        gen[j] = int(counts.min())
        co = sample.coexact[j]
        co = co[co > tol]
        kap[j] = float(co.min()) + sample.mass_shift if co.size else math.inf
    return SpectrumSummary(
        degrees=tuple(sample.degrees),
        lambda0=lam0,
        kernel_dim=kdim,
        kappa0=kap,
        kernel_tol=tol,
        generic_kernel_dim=gen,
    )
