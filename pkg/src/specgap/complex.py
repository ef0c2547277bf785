"""Periodic (Z^g-invariant) simplicial complexes on flat tori.

A complex is stored through its fundamental domain. Every simplex of the
covering triangulation is a chain of integer grid points; the fundamental
domain of a complex with ``n_per_axis = n`` holds the grid points in
``[0, n)^g`` and the deck group acts by translation by ``n`` grid units along
each lattice direction.

A simplex is kept in canonical form: its vertices are sorted
lexicographically (this also fixes the orientation) and the whole simplex is
translated so that its first vertex lies in the fundamental domain. Any other
simplex of the cover is ``canonical + n * offset`` for a unique lattice offset.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._errors import ConfigError

__all__ = [
    "PeriodicComplex",
    "MeshStats",
    "build_torus_complex",
    "subdivide",
    "mesh_stats",
]


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PeriodicComplex:
    """Kuhn-Freudenthal triangulation of R^g, periodic under a lattice Z^g.

    Use :func:`build_torus_complex` rather than instantiating directly.

    Attributes
    ----------
    rank : int
        Rank ``g`` of the deck group.
    n_per_axis : int
        Grid points per lattice direction inside the fundamental domain.
    lattice_basis : ndarray, shape (g, g)
        Rows are the lattice translation vectors.
    cells : tuple of ndarray
        ``cells[j]`` has shape ``(n_cells_j, j + 1, g)`` and holds the integer
        grid coordinates of the vertices of each canonical j-simplex.
    """

    rank: int
    n_per_axis: int
    lattice_basis: np.ndarray
    cells: tuple
    _index: tuple = field(repr=False)

    # ------------------------------------------------------------------
    # basic geometry
    @property
    def volume(self) -> float:
        """Volume of the fundamental domain."""
        return float(abs(np.linalg.det(self.lattice_basis)))

    @cached_property
    def vertex_positions(self) -> np.ndarray:
        """Cartesian coordinates of the fundamental-domain vertices."""
        return self.to_cartesian(self.cells[0][:, 0, :])

    def to_cartesian(self, grid_points) -> np.ndarray:
        """Map integer (or fractional) grid coordinates to Cartesian ones."""
        pts = np.asarray(grid_points, dtype=float)
        return (pts / self.n_per_axis) @ self.lattice_basis

    def n_cells(self, degree: int) -> int:
        return len(self.cells[degree])

    @property
    def cell_counts(self) -> tuple:
        return tuple(len(c) for c in self.cells)

    @property
    def euler_characteristic(self) -> int:
        return sum((-1) ** j * len(c) for j, c in enumerate(self.cells))

    def vertex_refs(self, degree: int):
        """Vertex references ``(fd_index, lattice_offset)`` of each j-cell.

        Returns arrays of shape ``(n_cells, j + 1)`` and ``(n_cells, j + 1, g)``.
        """
        pts = self.cells[degree]
        n = self.n_per_axis
        offsets = np.floor_divide(pts, n)
        local = pts - n * offsets
        idx = np.ravel_multi_index(
            tuple(np.moveaxis(local, -1, 0)), (n,) * self.rank
        )
        return idx, offsets

    # ------------------------------------------------------------------
    # lookup of arbitrary simplices of the cover
    def canonicalize(self, vertices):
        """Return ``(index, offset)`` for a simplex of the cover.

        ``vertices`` are integer grid points in chain (lexicographic) order.
        Raises ``KeyError`` if the simplex does not belong to the complex.
        """
        v = np.asarray(vertices, dtype=np.int64)
        offset = np.floor_divide(v[0], self.n_per_axis)
        canon = v - self.n_per_axis * offset
        return self._index[len(v) - 1][canon.tobytes()], offset

    @cached_property
    def coboundary(self) -> tuple:
        """Signed incidence data of the coboundary maps.

        ``coboundary[j]`` is a tuple ``(rows, cols, signs, offsets)``: the
        (j+1)-cell ``rows[e]`` has the j-cell ``cols[e] + offsets[e]`` as its
        face with incidence sign ``signs[e]``.
        """
        out = []
        for j in range(self.rank):
            rows, cols, signs, offs = [], [], [], []
            for r, tau in enumerate(self.cells[j + 1]):
                for i in range(j + 2):
                    face = np.delete(tau, i, axis=0)
                    c, off = self.canonicalize(face)
                    rows.append(r)
                    cols.append(c)
                    signs.append(-1.0 if i % 2 else 1.0)
                    offs.append(off)
            out.append(
                (
                    _frozen(rows, np.int64),
                    _frozen(cols, np.int64),
                    _frozen(signs, float),
                    _frozen(np.reshape(offs, (-1, self.rank)), np.int64),
                )
            )
        return tuple(out)

    def twisted_coboundary(self, degree: int, k) -> np.ndarray:
        """Dense matrix of ``d_j(k)`` acting on Bloch cochains of character k.

        A Bloch cochain satisfies ``f(sigma + offset) = exp(i k.offset) f(sigma)``.
        """
        k = np.asarray(k, dtype=float).reshape(self.rank)
        rows, cols, signs, offs = self.coboundary[degree]
        D = np.zeros((self.n_cells(degree + 1), self.n_cells(degree)), complex)
        np.add.at(D, (rows, cols), signs * np.exp(1j * (offs @ k)))
        return D

    @cached_property
    def top_faces(self) -> tuple:
        """Faces of each canonical top simplex, grouped by degree.

        ``top_faces[j]`` is ``(local, index, offset)``: ``local`` lists the
        vertex subsets (positions inside the top simplex) of its j-faces,
        ``index[t, f]`` / ``offset[t, f]`` identify face ``f`` of top simplex
        ``t`` in the cover.
        """
        g = self.rank
        tops = self.cells[g]
        out = []
        for j in range(g + 1):
            local = list(itertools.combinations(range(g + 1), j + 1))
            idx = np.empty((len(tops), len(local)), np.int64)
            off = np.empty((len(tops), len(local), g), np.int64)
            for t, top in enumerate(tops):
                for f, sub in enumerate(local):
                    idx[t, f], off[t, f] = self.canonicalize(top[list(sub)])
            out.append((tuple(local), _frozen(idx), _frozen(off)))
        return tuple(out)

    def locate(self, x):
        """Find a top simplex containing the Cartesian point ``x``.

        Returns ``(top_index, top_offset, barycentric)`` where the containing
        simplex of the cover is the canonical top simplex shifted by
        ``top_offset`` and ``barycentric`` has ``g + 1`` entries summing to 1.
        """
        g, n = self.rank, self.n_per_axis
        u = np.linalg.solve(self.lattice_basis.T, np.asarray(x, float)) * n
        corner = np.floor(u).astype(np.int64)
        r = u - corner
        perm = np.argsort(-r, kind="stable")
        verts = [corner.copy()]
        for axis in perm:
            nxt = verts[-1].copy()
            nxt[axis] += 1
            verts.append(nxt)
        rs = r[perm]
        bary = np.empty(g + 1)
        bary[0] = 1.0 - rs[0]
        bary[1:g] = rs[:-1] - rs[1:]
        bary[g] = rs[-1]
        idx, off = self.canonicalize(np.array(verts))
        return idx, off, bary


@dataclass(frozen=True)
class MeshStats:
    """Mesh size (largest simplex diameter) and minimal fullness."""

    mesh: float
    fullness_min: float


def _kuhn_tops(g: int, n: int) -> np.ndarray:
    tops = []
    for corner in itertools.product(range(n), repeat=g):
        for perm in itertools.permutations(range(g)):
            v = np.array(corner, dtype=np.int64)
            chain = [v.copy()]
            for axis in perm:
                v = v.copy()
                v[axis] += 1
                chain.append(v)
            tops.append(chain)
    return np.array(tops, dtype=np.int64)


def build_torus_complex(g: int, n_per_axis: int, lattice_basis=None) -> PeriodicComplex:
    """Kuhn-Freudenthal triangulation of the g-cube grid, tiled periodically.

    Each of the ``n_per_axis**g`` grid cubes of the fundamental domain is
    split into ``g!`` simplices.

    Parameters
    ----------
    g : int
        Rank of the deck group, 1, 2 or 3.
    n_per_axis : int
        Number of grid cells along each lattice direction.
    lattice_basis : array_like, shape (g, g), optional
        Rows are the lattice vectors. Defaults to the identity.
    """
    if not isinstance(g, (int, np.integer)) or g not in (1, 2, 3):
        raise ConfigError(f"unsupported rank g={g!r}; expected 1, 2 or 3")
    if not isinstance(n_per_axis, (int, np.integer)) or n_per_axis < 1:
        raise ConfigError(f"n_per_axis must be a positive integer, got {n_per_axis!r}")
    basis = np.eye(g) if lattice_basis is None else np.array(lattice_basis, float)
    basis = basis.reshape(g, g)
    scale = np.prod(np.linalg.norm(basis, axis=1))
    if scale == 0 or abs(np.linalg.det(basis)) <= 1e-12 * scale:
        raise ConfigError("lattice basis is degenerate")

    n = int(n_per_axis)
    tops = _kuhn_tops(g, n)
    cells = []
    index = []
    for j in range(g + 1):
        seen = {}
        for top in tops:
            for sub in itertools.combinations(range(g + 1), j + 1):
                face = top[list(sub)]
                off = np.floor_divide(face[0], n)
                canon = face - n * off
                key = canon.tobytes()
                if key not in seen:
                    seen[key] = canon
        keys = sorted(seen, key=lambda k: tuple(seen[k].ravel()))
        arr = np.array([seen[k] for k in keys], dtype=np.int64).reshape(-1, j + 1, g)
        cells.append(_frozen(arr))
        index.append({k: i for i, k in enumerate(keys)})

    return PeriodicComplex(
        rank=g,
        n_per_axis=n,
        lattice_basis=_frozen(basis),
        cells=tuple(cells),
        _index=tuple(index),
    )


def subdivide(complex: PeriodicComplex) -> PeriodicComplex:
    """Edge-midpoint (Freudenthal) subdivision of a Kuhn complex.

    Every Kuhn simplex splits into ``2**g`` simplices similar to the
    simplices of the parent, so fullness is preserved while the mesh halves.
    """
    if not isinstance(complex, PeriodicComplex):
        raise ConfigError("subdivide expects a PeriodicComplex built by build_torus_complex")
    return build_torus_complex(
        complex.rank, 2 * complex.n_per_axis, complex.lattice_basis
    )


def mesh_stats(complex: PeriodicComplex) -> MeshStats:
    """Mesh (max simplex diameter) and min fullness ``vol / diam**g`` of top simplices."""
    g = complex.rank
    edges = complex.to_cartesian(complex.cells[1][:, 1] - complex.cells[1][:, 0])
    mesh = float(np.max(np.linalg.norm(edges, axis=1)))
    tops = complex.to_cartesian(complex.cells[g])
    E = tops[:, 1:, :] - tops[:, :1, :]
    vols = np.abs(np.linalg.det(E)) / math.factorial(g)
    diffs = tops[:, :, None, :] - tops[:, None, :, :]
    diams = np.max(np.linalg.norm(diffs, axis=-1), axis=(1, 2))
    fullness = vols / diams**g
    return MeshStats(mesh=mesh, fullness_min=float(np.min(fullness)))
