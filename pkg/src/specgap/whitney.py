"""Whitney forms, Whitney mass matrices and the de Rham map.

Differential p-forms are represented pointwise by fully antisymmetric
arrays of shape ``(g,) * p`` whose entries are the values of the form on
coordinate basis vectors, ``T[i1, ..., ip] = w(e_i1, ..., e_ip)``. With this
convention a full contraction against ``p`` vectors evaluates the form on
them, and the pointwise inner product is the full contraction of two
tensors divided by ``p!``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from ._errors import ConfigError, NumericalError
from .complex import PeriodicComplex

__all__ = [
    "MassFamily",
    "SampledForm",
    "QuadratureWarning",
    "barycentric_gradients",
    "local_mass",
    "mass_family",
    "whitney_form_at",
    "whitney_form",
    "simplex_rule",
    "integrate_on_simplex",
    "derham_map",
]


class QuadratureWarning(UserWarning):
    """Two successive quadrature orders disagree beyond tolerance."""


# ----------------------------------------------------------------------
# local geometry


def barycentric_gradients(X):
    """Gradients of the barycentric coordinates of a top simplex.

    Parameters
    ----------
    X : ndarray, shape (..., g + 1, g)
        Cartesian vertex coordinates.

    Returns
    -------
    grads : ndarray, shape (..., g + 1, g)
    vol : ndarray, shape (...)
    """
    X = np.asarray(X, float)
    g = X.shape[-1]
    E = X[..., 1:, :] - X[..., :1, :]
    det = np.linalg.det(E)
    if np.any(np.abs(det) <= 1e-14 * np.max(np.abs(E)) ** g):
        raise NumericalError("degenerate simplex (zero volume) in complex")
    inv = np.linalg.inv(E)  # columns are grad mu_1..mu_g
    grads = np.empty(X.shape)
    grads[..., 1:, :] = np.swapaxes(inv, -1, -2)
    grads[..., 0, :] = -grads[..., 1:, :].sum(axis=-2)
    return grads, np.abs(det) / math.factorial(g)


def local_mass(X, degree: int) -> np.ndarray:
    """Element mass matrices of the Whitney p-forms on top simplices.

    Faces are ordered as ``itertools.combinations(range(g + 1), p + 1)``.
    Uses the exact integrals of products of barycentric coordinates,
    ``int mu_a mu_b = vol (1 + delta_ab) / ((g + 1)(g + 2))``, and Gram
    determinants of the (constant) barycentric gradients.
    """
    X = np.asarray(X, float)
    single = X.ndim == 2
    if single:
        X = X[None]
    g = X.shape[-1]
    p = degree
    grads, vol = barycentric_gradients(X)
    G = grads @ np.swapaxes(grads, -1, -2)
    I = vol[:, None, None] * (1.0 + np.eye(g + 1)) / ((g + 1) * (g + 2))
    faces = list(itertools.combinations(range(g + 1), p + 1))
    M = np.zeros((X.shape[0], len(faces), len(faces)))
    scale = math.factorial(p) ** 2
    for fa, a in enumerate(faces):
        for fb, b in enumerate(faces):
            if fb < fa:
                continue
            acc = np.zeros(X.shape[0])
            for i in range(p + 1):
                ra = a[:i] + a[i + 1:]
                for l in range(p + 1):
                    rb = b[:l] + b[l + 1:]
                    if p == 0:
                        gram = 1.0
                    else:
                        gram = np.linalg.det(G[:, list(ra)][:, :, list(rb)])
                    acc += (-1) ** (i + l) * I[:, a[i], b[l]] * gram
            M[:, fa, fb] = M[:, fb, fa] = scale * acc
    return M[0] if single else M


# ----------------------------------------------------------------------
# mass families


@dataclass(frozen=True, eq=False)
class MassFamily:
    """Character-twisted Whitney mass matrices of one degree.

    ``M(k)[r, c] = sum_e values[e] * exp(i k . offsets[e])`` over the
    entries with ``rows[e] == r`` and ``cols[e] == c``. Offsets are lattice
    displacements between the two cells, so the family only depends on
    offset differences.
    """

    degree: int
    size: int
    rows: np.ndarray
    cols: np.ndarray
    offsets: np.ndarray
    values: np.ndarray

    def __call__(self, k) -> np.ndarray:
        k = np.asarray(k, float).ravel()
        M = np.zeros((self.size, self.size), complex)
        np.add.at(M, (self.rows, self.cols), self.values * np.exp(1j * (self.offsets @ k)))
        return M


def mass_family(complex: PeriodicComplex, degree: int) -> MassFamily:
    """Assemble the twisted Whitney mass matrices of degree ``degree``."""
    g = complex.rank
    if not 0 <= degree <= g:
        raise ConfigError(f"degree must lie in 0..{g}")
    tops = complex.to_cartesian(complex.cells[g])
    M_loc = local_mass(tops, degree)
    _, idx, off = complex.top_faces[degree]
    nf = idx.shape[1]
    ia = np.repeat(idx[:, :, None], nf, axis=2).ravel()
    ib = np.repeat(idx[:, None, :], nf, axis=1).ravel()
    doff = (off[:, None, :, :] - off[:, :, None, :]).reshape(-1, g)
    vals = M_loc.ravel()

    # merge duplicate (row, col, offset) keys so evaluation is cheap
    keys = np.concatenate([ia[:, None], ib[:, None], doff], axis=1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inverse.ravel(), vals)
    keep = merged != 0.0
    uniq, merged = uniq[keep], merged[keep]
    return MassFamily(
        degree=degree,
        size=complex.n_cells(degree),
        rows=uniq[:, 0].copy(),
        cols=uniq[:, 1].copy(),
        offsets=uniq[:, 2:].copy(),
        values=merged,
    )


# ----------------------------------------------------------------------
# pointwise Whitney forms


def _wedge(covectors) -> np.ndarray | float:
    q = len(covectors)
    if q == 0:
        return 1.0
    g = len(covectors[0])
    T = np.zeros((g,) * q)
    for perm in itertools.permutations(range(q)):
        sign = np.linalg.det(np.eye(q)[list(perm)])
        term = covectors[perm[0]]
        for r in perm[1:]:
            term = np.multiply.outer(term, covectors[r])
        T += sign * term
    return T


def whitney_form_at(complex: PeriodicComplex, cell, simplex, bary):
    """Value of the Whitney form of ``cell`` at a point of a top simplex.

    Parameters
    ----------
    cell : tuple (degree, index, offset)
        The cell of the cover carrying the form.
    simplex : tuple (index, offset)
        Top simplex of the cover containing the evaluation point.
    bary : array_like, shape (g + 1,)
        Barycentric coordinates of the point in ``simplex``.

    Returns
    -------
    float or ndarray of shape ``(g,) * degree``. Zero when the point's
    simplex is not in the star of ``cell``.
    """
    g, n = complex.rank, complex.n_per_axis
    p, c_idx, c_off = cell
    t_idx, t_off = simplex
    bary = np.asarray(bary, float)
    if bary.shape != (g + 1,) or abs(bary.sum() - 1.0) > 1e-10:
        raise ConfigError("barycentric coordinates must have g+1 entries summing to 1")

    top = complex.cells[g][t_idx] + n * np.asarray(t_off, np.int64)
    verts = complex.cells[p][c_idx] + n * np.asarray(c_off, np.int64)
    pos = []
    for v in verts:
        hit = np.nonzero(np.all(top == v, axis=1))[0]
        if len(hit) == 0:
            return 0.0 if p == 0 else np.zeros((g,) * p)
        pos.append(int(hit[0]))

    if p == 0:
        return float(bary[pos[0]])
    grads, _ = barycentric_gradients(complex.to_cartesian(top))
    out = np.zeros((g,) * p)
    for i in range(p + 1):
        rest = [grads[pos[l]] for l in range(p + 1) if l != i]
        out += (-1) ** i * bary[pos[i]] * _wedge(rest)
    return math.factorial(p) * out


@dataclass(frozen=True)
class SampledForm:
    """A differential form given by a callable on Cartesian points."""

    degree: int
    func: Callable
    periodic: bool = True

    def __call__(self, x):
        return self.func(np.asarray(x, float))

    def check_periodic(self, complex: PeriodicComplex, points, atol: float = 1e-10) -> bool:
        if not self.periodic:
            return False
        for x in np.atleast_2d(points):
            base = np.asarray(self(x))
            for vec in complex.lattice_basis:
                if not np.allclose(np.asarray(self(x + vec)), base, atol=atol, rtol=0):
                    return False
        return True


def whitney_form(complex: PeriodicComplex, degree: int, index: int, offset=None) -> SampledForm:
    """The Whitney form of a cell as a :class:`SampledForm` on the cover."""
    off = np.zeros(complex.rank, np.int64) if offset is None else np.asarray(offset, np.int64)

    def func(x):
        t_idx, t_off, bary = complex.locate(x)
        bary = np.clip(bary, 0.0, None)
        bary /= bary.sum()
        return whitney_form_at(complex, (degree, index, off), (t_idx, t_off), bary)

    return SampledForm(degree=degree, func=func, periodic=False)


# ----------------------------------------------------------------------
# quadrature and the de Rham map


def simplex_rule(p: int, order: int):
    """Collapsed Gauss-Jacobi rule on the reference p-simplex.

    Exact for polynomials of total degree ``order``. Returns points of
    shape ``(Q, p)`` (coordinates along the simplex edges from vertex 0) and
    weights summing to ``1 / p!``.
    """
    if p == 0:
        return np.zeros((1, 0)), np.ones(1)
    m = max(1, (order + 2) // 2)
    axes = []
    for i in range(p):
        alpha = p - 1 - i
        x, w = roots_jacobi(m, alpha, 0.0)
        axes.append(((x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)))
    pts, wts = [], []
    for combo in itertools.product(*[range(m)] * p):
        u = [axes[i][0][c] for i, c in enumerate(combo)]
        w = np.prod([axes[i][1][c] for i, c in enumerate(combo)])
        lam, rem = [], 1.0
        for ui in u:
            lam.append(rem * ui)
            rem *= 1.0 - ui
        pts.append(lam)
        wts.append(w)
    return np.array(pts), np.array(wts)


def integrate_on_simplex(form: Callable, vertices, order: int = 5) -> float:
    """Integral of a p-form over an oriented p-simplex in R^g.

    ``form`` maps a parameter point ``lam`` (coordinates along edges from
    vertex 0) and its Cartesian position to the tensor value; it is called
    as ``form(lam, x)``.
    """
    V = np.asarray(vertices, float)
    p = len(V) - 1
    pts, wts = simplex_rule(p, order)
    edges = V[1:] - V[0]
    total = 0.0
    for lam, w in zip(pts, wts):
        x = V[0] + lam @ edges if p else V[0]
        val = form(lam, x)
        for e in edges:
            val = np.tensordot(e, val, axes=(0, 0))
        total += w * float(np.real(val))
    return total


def derham_map(form: SampledForm, complex: PeriodicComplex, degree: int | None = None,
               offsets=None, order: int = 5) -> np.ndarray:
    """Integrate a form over the j-cells of the cover (the de Rham map).

    Parameters
    ----------
    form : SampledForm
    complex : PeriodicComplex
    degree : int, optional
        Cochain degree; must match ``form.degree``.
    offsets : array_like of shape (m, g), optional
        Lattice offsets of the translated fundamental domains to integrate
        over. Defaults to the fundamental domain only, giving a vector of
        length ``n_cells``; otherwise the result has shape ``(m, n_cells)``.
    order : int
        Quadrature order; the result is cross-checked against ``2 * order``
        and a :class:`QuadratureWarning` is emitted on disagreement beyond
        1e-8 relative, in which case the higher-order values are returned.
    """
    p = form.degree if degree is None else degree
    if p != form.degree:
        raise ConfigError(f"form of degree {form.degree} cannot give a {p}-cochain")
    g, n = complex.rank, complex.n_per_axis
    single = offsets is None
    offs = np.zeros((1, g), np.int64) if single else np.asarray(offsets, np.int64).reshape(-1, g)

    def run(q):
        out = np.zeros((len(offs), complex.n_cells(p)))
        for a, m in enumerate(offs):
            for i, cell in enumerate(complex.cells[p]):
                verts = complex.to_cartesian(cell + n * m)
                out[a, i] = integrate_on_simplex(lambda lam, x: form(x), verts, q)
        return out

    lo, hi = run(order), run(2 * order)
    scale = max(np.max(np.abs(hi)), 1e-300)
    if np.max(np.abs(lo - hi)) > 1e-8 * scale:
        warnings.warn(
            f"de Rham quadrature orders {order} and {2 * order} disagree "
            f"by {np.max(np.abs(lo - hi)):.3e}",
            QuadratureWarning,
            stacklevel=2,
        )
    return hi[0] if single else hi
