"""Mesh-refinement experiments on flat tori.

Every experiment refines a base complex by repeated subdivision, samples
the Whitney Laplacians of each level and compares a spectral quantity with
its continuum value on the flat torus, where
``tau(exp(-t Delta_j)) = binom(g, j) vol (4 pi t)^(-g/2)`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import rgamma

from ._errors import ConfigError, DomainError, NumericalError
from .bloch import laplacian_families, sample_spectrum, spectral_density, spectrum_summary
from .complex import PeriodicComplex, build_torus_complex, mesh_stats, subdivide
from .spectral import ThetaFunction
from .zeta import ns_zeta

__all__ = [
    "ConvergenceRow",
    "ConvergenceReport",
    "TORUS_PRESETS",
    "EXPERIMENT_PRESETS",
    "torus_preset",
    "torus_theta_reference",
    "torus_counting_reference",
    "refinement_levels",
    "theta_table",
    "theta_convergence",
    "gap_convergence",
    "density_sandwich",
    "fit_dilation",
    "zeta_convergence",
    "run_preset",
]

MASS_SHIFT_LABEL = "deformation: mass shift Delta + m^2 (artificial gap, not a geometric one)"

TORUS_PRESETS = {
    "circle": dict(g=1, n_per_axis=8, lattice_basis=[[1.0]]),
    "square": dict(g=2, n_per_axis=4, lattice_basis=[[1.0, 0.0], [0.0, 1.0]]),
    "square-coarse": dict(g=2, n_per_axis=2, lattice_basis=[[1.0, 0.0], [0.0, 1.0]]),
    "hexagonal": dict(g=2, n_per_axis=4, lattice_basis=[[1.0, 0.0], [0.5, math.sqrt(3) / 2]]),
    "cube": dict(g=3, n_per_axis=2, lattice_basis=np.eye(3).tolist()),
}


def torus_preset(name: str) -> PeriodicComplex:
    if name not in TORUS_PRESETS:
        raise ConfigError(f"unknown torus preset {name!r}; known: {sorted(TORUS_PRESETS)}")
    return build_torus_complex(**TORUS_PRESETS[name])


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    mesh: float
    metric_name: str
    value: float
    error: float
    order: float


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-level measurements with successive-ratio orders and flags."""

    experiment: str
    rows: tuple
    flags: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def metric(self, name: str) -> list:
        return [r for r in self.rows if r.metric_name == name]

    def errors(self, name: str) -> np.ndarray:
        return np.array([r.error for r in self.metric(name)])

    def values(self, name: str) -> np.ndarray:
        return np.array([r.value for r in self.metric(name)])


# ----------------------------------------------------------------------
# continuum references


def torus_theta_reference(g: int, degree: int, volume: float = 1.0) -> Callable:
    """Continuum heat trace ``binom(g, j) vol (4 pi t)^(-g/2)`` of a flat torus cover."""
    if not 0 <= degree <= g:
        raise ConfigError(f"degree must lie in 0..{g}")
    c = math.comb(g, degree) * volume

    def ref(t):
        return c * (4 * np.pi * np.asarray(t, float)) ** (-g / 2)

    return ref


def torus_counting_reference(g: int, degree: int, volume: float = 1.0) -> Callable:
    """Continuum spectral counting function ``binom(g, j) vol w_g lam^(g/2) / (2 pi)^g``."""
    c = math.comb(g, degree) * volume * math.pi ** (g / 2) / math.gamma(g / 2 + 1) / (2 * math.pi) ** g

    def ref(lam):
        return c * np.maximum(np.asarray(lam, float), 0.0) ** (g / 2)

    return ref


def _torus_zeta_reference(g, degree, volume, s, piece):
    c = math.comb(g, degree) * volume * (4 * math.pi) ** (-g / 2)
    val = c * rgamma(s) / (s - g / 2)
    return complex(val if piece == "small" else -val)


# ----------------------------------------------------------------------
# helpers


def refinement_levels(base: PeriodicComplex, levels) -> list:
    """``levels`` successive subdivisions of ``base`` (or an explicit list)."""
    if isinstance(levels, (list, tuple)):
        out = list(levels)
        if len(out) < 2 or not all(isinstance(c, PeriodicComplex) for c in out):
            raise ConfigError("explicit levels must be at least two complexes")
        return out
    if not isinstance(levels, (int, np.integer)) or levels < 1:
        raise ConfigError("levels must be a positive integer")
    out = [base]
    for _ in range(int(levels) - 1):
        out.append(subdivide(out[-1]))
    return out


def _orders(errors, meshes):
    orders, undefined = [math.nan], False
    for l in range(1, len(errors)):
        e0, e1 = errors[l - 1], errors[l]
        ratio = meshes[l - 1] / meshes[l]
        if e0 > 0 and e1 > 0 and ratio > 1:
            orders.append(math.log(e0 / e1) / math.log(ratio))
        else:
            orders.append(math.nan)
            undefined = True
    return orders, undefined


def _standard_flags(errors, meshes, undefined):
    errors = np.asarray(errors)
    return {
        "mesh_strictly_decreasing": bool(np.all(np.diff(meshes) < 0)),
        "errors_strictly_decreasing": bool(np.all(np.diff(errors) < 0)),
        "finest_is_min": bool(errors[-1] <= errors.min()),
        "order_undefined": bool(undefined),
    }


def _sample(c: PeriodicComplex, resolution: int, threads, mass_shift=0.0):
    return sample_spectrum(laplacian_families(c, mass_shift), resolution, threads=threads)


def theta_table(sample, degree: int, ts, reference: Callable):
    """Arrays ``(t, theta_comb, theta_ref, abs_error)`` for one sampled complex."""
    th = ThetaFunction.from_sample(sample, degree)
    ts = np.asarray(ts, float)
    comb = np.asarray(th(ts), float)
    ref = np.asarray(reference(ts), float)
    return ts, comb, ref, np.abs(comb - ref)


# ----------------------------------------------------------------------
# experiments


def theta_convergence(base: PeriodicComplex, levels, t_window=(0.5, 5.0), reference=None,
                      degree: int = 0, grid_resolution: int = 32, n_t: int = 50,
                      threads: int | None = None) -> ConvergenceReport:
    """Sup error of the combinatorial theta against a reference on a t-window.

    ``value`` is the sup error relative to the reference, ``error`` the
    absolute sup error over ``n_t`` log-spaced times.
    """
    t1, t2 = (float(x) for x in t_window)
    if not 0 < t1 < t2:
        raise ConfigError("t_window must satisfy 0 < t1 < t2")
    complexes = refinement_levels(base, levels)
    if reference is None:
        reference = torus_theta_reference(base.rank, degree, base.volume)
    ts = np.geomspace(t1, t2, n_t)
    meshes, errs, rels = [], [], []
    for c in complexes:
        sample = _sample(c, grid_resolution, threads)
        _, comb, ref, err = theta_table(sample, degree, ts, reference)
        meshes.append(mesh_stats(c).mesh)
        errs.append(float(err.max()))
        rels.append(float((err / np.abs(ref)).max()))
    orders, undefined = _orders(errs, meshes)
    rows = tuple(
        ConvergenceRow(l, meshes[l], "theta_sup_error", rels[l], errs[l], orders[l])
        for l in range(len(complexes))
    )
    return ConvergenceReport(
        "theta_convergence", rows, _standard_flags(errs, meshes, undefined),
        {"degree": degree, "t_window": (t1, t2), "grid_resolution": grid_resolution,
         "n_per_axis": [c.n_per_axis for c in complexes]},
    )


def gap_convergence(base: PeriodicComplex, levels, mass_shift: float = 0.0, degree: int = 0,
                    grid_resolution: int = 32, threads: int | None = None) -> ConvergenceReport:
    """Bottom of the spectrum of ``Delta_j + m^2`` across refinements.

    The continuum bottom is exactly ``m^2`` on a flat torus. ``value`` is
    the estimate and ``error`` its distance from ``m^2``; the ``kappa0``
    rows give the bottom on the complement of ``ker d``.
    """
    if mass_shift < 0:
        raise ConfigError("mass_shift must be non-negative")
    complexes = refinement_levels(base, levels)
    meshes, lam, kap = [], [], []
    for c in complexes:
        summary = spectrum_summary(_sample(c, grid_resolution, threads, mass_shift))
        if mass_shift > 0 and summary.kernel_dim[degree] > 0.01:
            raise NumericalError(
                f"kernel detected for the shifted operator (dimension {summary.kernel_dim[degree]:.3g})"
            )
        meshes.append(mesh_stats(c).mesh)
        lam.append(summary.lambda0[degree])
        kap.append(summary.kappa0[degree])
    lam_err = [abs(x - mass_shift) for x in lam]
    kap_err = [abs(x - mass_shift) if math.isfinite(x) else math.nan for x in kap]
    orders, undefined = _orders(lam_err, meshes)
    korders, _ = _orders(kap_err, meshes)
    rows = [ConvergenceRow(l, meshes[l], "lambda0", lam[l], lam_err[l], orders[l])
            for l in range(len(complexes))]
    rows += [ConvergenceRow(l, meshes[l], "kappa0", kap[l], kap_err[l], korders[l])
             for l in range(len(complexes))]
    flags = _standard_flags(lam_err, meshes, undefined)
    flags["monotone_approach"] = bool(np.all(np.diff(lam_err) <= 0))
    meta = {"degree": degree, "mass_shift": mass_shift, "grid_resolution": grid_resolution,
            "n_per_axis": [c.n_per_axis for c in complexes]}
    if mass_shift > 0:
        meta["deformation"] = MASS_SHIFT_LABEL
        meta["ratios"] = [x / mass_shift for x in lam]
    return ConvergenceReport("gap_convergence", tuple(rows), flags, meta)


def fit_dilation(F_small: Callable, F_large: Callable, lambda_grid, d_max: float = 1e3) -> float:
    """Smallest ``D >= 1`` with ``F_small(lam) <= F_large(D lam)`` on the grid."""
    lam = np.asarray(lambda_grid, float)
    target = np.asarray([F_small(x) for x in lam])

    def ok(D):
        return bool(np.all(target <= np.asarray([F_large(D * x) for x in lam]) + 1e-12))

    if ok(1.0):
        return 1.0
    if not ok(d_max):
        return math.inf
    lo, hi = 1.0, d_max
    for _ in range(100):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
        if hi / lo - 1 < 1e-12:
            break
    return hi


def density_sandwich(base: PeriodicComplex, levels, lambda_grid, reference_density=None,
                     degree: int = 0, grid_resolution: int = 64, swap: bool = False,
                     threads: int | None = None) -> ConvergenceReport:
    """Fitted dilations between combinatorial and reference counting functions.

    ``D`` is the smallest factor with ``F_comb(lam) <= F_ref(D lam)`` and
    ``C`` the smallest with ``F_ref(lam) <= F_comb(C lam)``; ``swap``
    exchanges the roles of the two functions. ``error`` is ``factor - 1``.
    """
    lam = np.asarray(lambda_grid, float)
    if lam.ndim != 1 or lam.size < 2 or np.any(lam <= 0):
        raise ConfigError("lambda_grid must hold at least two positive values")
    if reference_density is None:
        reference_density = torus_counting_reference(base.rank, degree, base.volume)
    ref_vals = np.asarray([reference_density(x) for x in np.sort(lam)])
    if np.any(np.diff(ref_vals) < 0):
        raise ConfigError("reference density must be non-decreasing")
    complexes = refinement_levels(base, levels)
    meshes, Ds, Cs = [], [], []
    for c in complexes:
        sample = _sample(c, grid_resolution, threads)

        def comb(x, sample=sample):
            return spectral_density(sample, degree, float(x), kind="full")

        first, second = (reference_density, comb) if swap else (comb, reference_density)
        meshes.append(mesh_stats(c).mesh)
        Ds.append(fit_dilation(first, second, lam))
        Cs.append(fit_dilation(second, first, lam))
    rows = []
    for name, vals in (("dilation_D", Ds), ("dilation_C", Cs)):
        errs = [v - 1.0 for v in vals]
        orders, _ = _orders(errs, meshes)
        rows += [ConvergenceRow(l, meshes[l], name, vals[l], errs[l], orders[l])
                 for l in range(len(complexes))]
    flags = {
        "D_non_increasing": bool(np.all(np.diff(Ds) <= 1e-12)),
        "C_non_increasing": bool(np.all(np.diff(Cs) <= 1e-12)),
        "factors_at_least_one": bool(min(Ds + Cs) >= 1 - 1e-9),
    }
    return ConvergenceReport("density_sandwich", tuple(rows), flags,
                             {"degree": degree, "swap": swap, "grid_resolution": grid_resolution,
                              "n_per_axis": [c.n_per_axis for c in complexes]})


def zeta_convergence(base: PeriodicComplex, levels, s_probes: Sequence[complex], piece: str = "small",
                     degree: int = 0, grid_resolution: int = 32,
                     threads: int | None = None) -> ConvergenceReport:
    """Partial zeta functions (``lambda0 = 0``) against the continuum torus values.

    The small piece needs ``Re s > g/2`` and the large piece ``Re s < g/2``
    for the continuum reference to exist.
    """
    g = base.rank
    probes = [complex(s) for s in s_probes]
    if not probes:
        raise ConfigError("at least one s probe is required")
    for s in probes:
        if piece == "small" and not s.real > g / 2:
            raise DomainError(f"small-piece probe s = {s} must satisfy Re(s) > {g / 2}")
        if piece == "large" and not s.real < g / 2:
            raise DomainError(f"large-piece probe s = {s} must satisfy Re(s) < {g / 2}")
        if piece not in ("small", "large"):
            raise ConfigError(f"unknown piece {piece!r}")
    complexes = refinement_levels(base, levels)
    meshes = [mesh_stats(c).mesh for c in complexes]
    values = {s: [] for s in probes}
    for c in complexes:
        th = ThetaFunction.from_sample(_sample(c, grid_resolution, threads), degree, lambda0=0.0)
        for s in probes:
            values[s].append(ns_zeta(th, math.inf, s, piece))
    rows, all_dec, undefined = [], True, False
    for s in probes:
        if abs(s) < 1e-14 and piece == "large":
            ref = 0.0
        else:
            ref = _torus_zeta_reference(g, degree, base.volume, s, piece)
        errs = [abs(v - ref) for v in values[s]]
        orders, und = _orders(errs, meshes)
        undefined |= und
        all_dec &= bool(np.all(np.diff(errs) < 0)) or max(errs) < 1e-12
        name = f"zeta_{piece}(s={s.real:g}{s.imag:+g}j)"
        rows += [ConvergenceRow(l, meshes[l], name, float(values[s][l].real), errs[l], orders[l])
                 for l in range(len(complexes))]
    flags = {"errors_decreasing": all_dec, "order_undefined": undefined,
             "mesh_strictly_decreasing": bool(np.all(np.diff(meshes) < 0))}
    return ConvergenceReport("zeta_convergence", tuple(rows), flags,
                             {"degree": degree, "piece": piece, "grid_resolution": grid_resolution,
                              "n_per_axis": [c.n_per_axis for c in complexes]})


# ----------------------------------------------------------------------
# shipped experiment presets

EXPERIMENT_PRESETS = {
    "circle-theta": dict(kind="theta", base="circle", degree=0, t_window=(0.5, 5.0)),
    "square-theta": dict(kind="theta", base="square-coarse", degree=1, t_window=(0.5, 5.0),
                         grid_resolution=16, max_levels=3),
    "circle-gap": dict(kind="gap", base="circle", degree=0, mass_shift=1.0, max_levels=3),
    "circle-density": dict(kind="density", base="circle", degree=0,
                           lambda_grid=tuple(np.geomspace(0.5, 50, 25))),
    "circle-zeta": dict(kind="zeta", base="circle", degree=0, s_probes=(2.0,), piece="small"),
}


def run_preset(name: str, levels: int | None = None, threads: int | None = None,
               grid_resolution: int | None = None) -> ConvergenceReport:
    """Run a shipped experiment preset."""
    if name not in EXPERIMENT_PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(EXPERIMENT_PRESETS)}")
    p = dict(EXPERIMENT_PRESETS[name])
    base = torus_preset(p.pop("base"))
    kind = p.pop("kind")
    max_levels = p.pop("max_levels", 4)
    levels = max_levels if levels is None else levels
    if levels < 3:
        raise ConfigError("refinement experiments need at least 3 levels")
    if grid_resolution is not None:
        p["grid_resolution"] = grid_resolution
    if kind == "theta":
        return theta_convergence(base, levels, threads=threads, **p)
    if kind == "gap":
        return gap_convergence(base, levels, threads=threads, **p)
    if kind == "density":
        return density_sandwich(base, levels, threads=threads, **p)
    return zeta_convergence(base, levels, threads=threads, **p)
