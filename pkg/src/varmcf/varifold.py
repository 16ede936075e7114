"""Varifold representations: weighted atoms and volumetric cell measures.

A varifold here is a finite nonnegative measure on position x tangent-plane
pairs. Atomic representations store (position, projector, mass) triples;
the volumetric representation spreads each cell's mass uniformly over the
cell, paired with a single per-cell plane. All types are immutable after
construction, and evaluation callables are expected to accept batched numpy
arrays: test functions map (N, n) points to (N,) values, fields additionally
expose a ``jacobian`` method mapping (N, n) to (N, n, n).
"""

from __future__ import annotations

import csv

import numpy as np

__all__ = [
    "PointCloudVarifold",
    "SampledManifoldVarifold",
    "VolumetricVarifold",
]

_PROJ_TOL = 1e-10


def _validate_projectors(proj, d):
    if np.max(np.abs(proj - np.swapaxes(proj, -1, -2))) > 1e-12:
        raise ValueError("projectors must be symmetric within 1e-12")
    pp = np.einsum("...ij,...jl->...il", proj, proj)
    if np.max(np.abs(pp - proj)) > _PROJ_TOL:
        raise ValueError("projectors must be idempotent within 1e-10")
    traces = np.einsum("...ii->...", proj)
    if np.max(np.abs(traces - d)) > _PROJ_TOL:
        raise ValueError(f"projector traces must equal {d} within 1e-10")


class _AtomicVarifold:
    """Shared implementation for varifolds supported on finitely many atoms."""

    def __init__(self, positions, projectors, masses, dim=None):
        positions = np.ascontiguousarray(positions, dtype=float)
        projectors = np.ascontiguousarray(projectors, dtype=float)
        masses = np.ascontiguousarray(masses, dtype=float)
        if positions.ndim != 2:
            raise ValueError("positions must be (N, n)")
        n = positions.shape[1]
        if projectors.shape != (len(positions), n, n):
            raise ValueError("projectors must be (N, n, n)")
        if masses.shape != (len(positions),):
            raise ValueError("masses must be (N,)")
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(masses))
                and np.all(np.isfinite(projectors))):
            raise ValueError("non-finite values in varifold data")
        if np.any(masses < 0):
            raise ValueError("masses must be nonnegative")
        keep = masses > 0
        positions, projectors, masses = (
            positions[keep], projectors[keep], masses[keep]
        )
        if dim is None:
            if len(masses) == 0:
                raise ValueError("cannot infer dimension from an empty varifold")
            dim = int(round(float(np.trace(projectors[0]))))
        _validate_projectors(projectors, dim)
        for arr in (positions, projectors, masses):
            arr.flags.writeable = False
        self.positions = positions
        self.projectors = projectors
        self.masses = masses
        self.d = int(dim)
        self._caches = {}

    @property
    def n(self):
        return self.positions.shape[1]

    def __len__(self):
        return len(self.masses)

    def mass_total(self):
        """Total mass of the spatial measure."""
        return float(np.sum(self.masses))

    def mass_apply(self, phi):
        """Integrate a scalar function of position against the mass measure."""
        return float(np.sum(self.masses * np.asarray(phi(self.positions))))

    def varifold_apply(self, f):
        """Integrate f(position, plane) against the full varifold."""
        vals = np.asarray(f(self.positions, self.projectors))
        return float(np.sum(self.masses * vals))

    def first_variation(self, field):
        """Integral of the tangential divergence of a C^1 vector field.

        The tangential divergence at an atom is trace(P J) with J the field
        Jacobian; for a sampled closed surface this equals -int H . X up to
        quadrature error.
        """
        jac = np.asarray(field.jacobian(self.positions))
        div = np.einsum("kij,kji->k", self.projectors, jac)
        return float(np.sum(self.masses * div))


class PointCloudVarifold(_AtomicVarifold):
    """Varifold supported on an unstructured weighted point cloud.

    CSV interchange format: header row, then one row per atom with columns
    x1..xn, mass, followed by d*n tangent basis entries (basis vectors
    stored row-major).
    """

    def to_csv(self, path):
        n, d = self.n, self.d
        basis = _basis_from_projectors(self.projectors, d)
        header = (
            [f"x{i + 1}" for i in range(n)]
            + ["mass"]
            + [f"t{a + 1}_{i + 1}" for a in range(d) for i in range(n)]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(len(self)):
                row = (
                    [_fmt(v) for v in self.positions[k]]
                    + [_fmt(self.masses[k])]
                    + [_fmt(v) for v in basis[k].reshape(-1)]
                )
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError("empty point cloud file") from None
            rows = list(reader)
        n = sum(1 for name in header if name.startswith("x"))
        if n == 0 or len(header) <= n or header[n] != "mass":
            raise ValueError("header must be x1..xn, mass, tangent columns")
        rest = len(header) - n - 1
        if rest == 0 or rest % n != 0:
            raise ValueError(
                f"tangent block of {rest} columns is not a multiple of n={n}"
            )
        d = rest // n
        data = []
        for row in rows:
            if len(row) != len(header):
                raise ValueError(
                    f"row has {len(row)} columns, expected {len(header)}"
                )
            data.append([float(v) for v in row])
        if not data:
            raise ValueError("point cloud file has no atoms")
        data = np.asarray(data, dtype=float)
        if not np.all(np.isfinite(data)):
            raise ValueError("non-finite values in point cloud file")
        positions = data[:, :n]
        masses = data[:, n]
        basis = data[:, n + 1:].reshape(-1, d, n)
        projectors = np.empty((len(data), n, n))
        for k in range(len(data)):
            q, _ = np.linalg.qr(basis[k].T)
            q = q[:, :d]
            projectors[k] = q @ q.T
        return cls(positions, projectors, masses, dim=d)


class SampledManifoldVarifold(_AtomicVarifold):
    """Varifold induced by a quadrature sample of an analytic shape."""

    def __init__(self, sample):
        super().__init__(
            sample.positions, sample.projectors, sample.weights, dim=sample.dim
        )

    @classmethod
    def from_shape(cls, shape, resolution):
        return cls(shape.sample(resolution))


class VolumetricVarifold:
    """Cell-based varifold: per cell a mass and a single tangent plane.

    The spatial measure restricted to a cell is Lebesgue measure rescaled to
    carry the cell mass; integrals are evaluated with a midpoint rule on
    ``subdivisions`` subcells per axis.

    Parameters
    ----------
    mesh : Mesh
        Uniform cubical mesh the cell indices refer to.
    cell_indices : (M, n) int array
        Integer grid coordinates of the occupied cells.
    masses : (M,) array
        Cell masses; zero-mass cells are dropped.
    projectors : (M, n, n) array
        Per-cell tangent projectors.
    """

    def __init__(self, mesh, cell_indices, masses, projectors,
                 subdivisions=2):
        cell_indices = np.ascontiguousarray(cell_indices, dtype=np.int64)
        masses = np.ascontiguousarray(masses, dtype=float)
        projectors = np.ascontiguousarray(projectors, dtype=float)
        if cell_indices.ndim != 2:
            raise ValueError("cell_indices must be (M, n)")
        m, n = cell_indices.shape
        if masses.shape != (m,) or projectors.shape != (m, n, n):
            raise ValueError("inconsistent cell array shapes")
        if np.any(masses < 0):
            raise ValueError("cell masses must be nonnegative")
        if not (np.all(np.isfinite(masses)) and np.all(np.isfinite(projectors))):
            raise ValueError("non-finite values in cell data")
        keep = masses > 0
        cell_indices, masses, projectors = (
            cell_indices[keep], masses[keep], projectors[keep]
        )
        # Normalize storage order so evaluation is independent of input order.
        order = np.lexsort(cell_indices.T[::-1])
        cell_indices, masses, projectors = (
            cell_indices[order], masses[order], projectors[order]
        )
        if len(cell_indices) > 1:
            same = np.all(np.diff(cell_indices, axis=0) == 0, axis=1)
            if np.any(same):
                raise ValueError("duplicate cell indices")
        if len(masses) == 0:
            raise ValueError("volumetric varifold has no cells")
        d = int(round(float(np.trace(projectors[0]))))
        _validate_projectors(projectors, d)
        subdivisions = int(subdivisions)
        if subdivisions < 1:
            raise ValueError("subdivisions must be >= 1")
        for arr in (cell_indices, masses, projectors):
            arr.flags.writeable = False
        self.mesh = mesh
        self.cell_indices = cell_indices
        self.masses = masses
        self.projectors = projectors
        self.d = d
        self.subdivisions = subdivisions
        self._quad_cache = {}
        self._caches = {}

    @property
    def n(self):
        return self.cell_indices.shape[1]

    @property
    def h(self):
        """Cell diameter bound of the underlying mesh."""
        return self.mesh.h

    def __len__(self):
        return len(self.masses)

    def cell_centers(self):
        return self.mesh.cell_center(self.cell_indices)

    def quadrature_points(self, subdivisions=None):
        """Midpoint subcell quadrature nodes, (M * s^n, n), cell-major.

        Returns (points, cell_index_of_point). Cached per subdivision count.
        """
        s = self.subdivisions if subdivisions is None else int(subdivisions)
        if s < 1:
            raise ValueError("subdivisions must be >= 1")
        if s not in self._quad_cache:
            n = self.n
            edge = self.mesh.edge
            offs_1d = (np.arange(s) + 0.5) * (edge / s)
            grids = np.meshgrid(*([offs_1d] * n), indexing="ij")
            offsets = np.stack([g.reshape(-1) for g in grids], axis=1)
            corners = self.mesh.origin + self.cell_indices * edge
            pts = corners[:, None, :] + offsets[None, :, :]
            owner = np.repeat(np.arange(len(self)), s**n)
            pts = pts.reshape(-1, n)
            pts.flags.writeable = False
            owner.flags.writeable = False
            self._quad_cache[s] = (pts, owner)
        return self._quad_cache[s]

    def mass_total(self):
        return float(np.sum(self.masses))

    def mass_apply(self, phi, subdivisions=None):
        """Integrate a scalar function against the cell-spread mass measure."""
        s = self.subdivisions if subdivisions is None else int(subdivisions)
        pts, _ = self.quadrature_points(s)
        vals = np.asarray(phi(pts)).reshape(len(self), -1)
        return float(np.sum(self.masses * vals.mean(axis=1)))

    def varifold_apply(self, f, subdivisions=None):
        s = self.subdivisions if subdivisions is None else int(subdivisions)
        pts, owner = self.quadrature_points(s)
        proj = self.projectors[owner]
        vals = np.asarray(f(pts, proj)).reshape(len(self), -1)
        return float(np.sum(self.masses * vals.mean(axis=1)))

    def first_variation(self, field, subdivisions=None):
        """Cell-quadrature integral of the tangential divergence of a field."""
        s = self.subdivisions if subdivisions is None else int(subdivisions)
        pts, owner = self.quadrature_points(s)
        jac = np.asarray(field.jacobian(pts))
        div = np.einsum("kij,kji->k", self.projectors[owner], jac)
        div = div.reshape(len(self), -1)
        return float(np.sum(self.masses * div.mean(axis=1)))


def _basis_from_projectors(projectors, d):
    """Orthonormal tangent bases (N, d, n) extracted from projectors."""
    vals, vecs = np.linalg.eigh(projectors)
    # eigh sorts ascending; the top-d eigenvectors span the plane.
    basis = np.swapaxes(vecs[..., -d:], -1, -2)
    del vals
    return basis


def _fmt(v):
    return f"{float(v):.17g}"
