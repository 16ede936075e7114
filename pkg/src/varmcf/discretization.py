"""Uniform cubical meshes and the binning of samples into cell varifolds.

``discretize`` collapses a weighted surface sample to one (mass, plane)
pair per occupied mesh cell: the mass is the summed weight, the plane is
the one closest in Frobenius norm to the mass-weighted mean projector,
i.e. the span of its top eigenvectors. The cell diameter ``mesh.h``
controls how far any sample point can sit from its cell's quadrature
nodes, which is what the measure-approximation guarantees are written in
terms of.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .varifold import VolumetricVarifold

__all__ = [
    "Mesh",
    "discretize",
    "tangent_fit_quality",
    "write_cells_csv",
    "read_cells_csv",
]


class Mesh:
    """Axis-aligned uniform grid of cubical cells covering a box.

    The grid is anchored at ``lo``; the number of cells per axis is the
    smallest count whose union covers [lo, hi].
    """

    __slots__ = ("origin", "upper", "edge", "counts")

    def __init__(self, lo, hi, edge):
        lo = np.ascontiguousarray(lo, dtype=float)
        hi = np.ascontiguousarray(hi, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("lo and hi must be vectors of equal length")
        if np.any(hi <= lo):
            raise ValueError("box must have positive extent on every axis")
        edge = float(edge)
        if not (edge > 0 and math.isfinite(edge)):
            raise ValueError("edge must be positive and finite")
        # ceil with slack so an exact integer extent is not pushed up a cell
        counts = np.maximum(
            1, np.ceil((hi - lo) / edge - 1e-12).astype(np.int64)
        )
        self.origin = lo
        self.upper = hi
        self.edge = edge
        self.counts = counts
        for arr in (self.origin, self.upper, self.counts):
            arr.flags.writeable = False

    @classmethod
    def covering(cls, points, edge, pad=0.0):
        """Mesh over the bounding box of a point set, inflated by ``pad``."""
        points = np.asarray(points, dtype=float)
        return cls(points.min(axis=0) - pad, points.max(axis=0) + pad, edge)

    @property
    def n(self):
        return len(self.origin)

    @property
    def h(self):
        """Cell diameter: edge times sqrt(n)."""
        return self.edge * math.sqrt(self.n)

    def num_cells(self):
        return int(np.prod(self.counts))

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        slack = 1e-9 * self.edge
        return np.all(
            (points >= self.origin - slack) & (points <= self.upper + slack),
            axis=-1,
        )

    def cell_index(self, points):
        """Integer grid coordinates of the cells containing ``points``.

        Raises ValueError if any point lies outside the box.
        """
        points = np.asarray(points, dtype=float)
        inside = self.contains(points)
        if not np.all(inside):
            bad = int(np.sum(~inside))
            raise ValueError(
                f"{bad} point(s) lie outside the mesh box"
            )
        idx = np.floor((points - self.origin) / self.edge).astype(np.int64)
        # points on the far face belong to the last cell
        return np.clip(idx, 0, self.counts - 1)

    def cell_center(self, indices):
        return self.origin + (np.asarray(indices) + 0.5) * self.edge


def discretize(sample, mesh, subdivisions=2):
    """Bin a weighted sample into a :class:`VolumetricVarifold`.

    ``sample`` needs positions, projectors, and per-point weights (any
    object shaped like ``WeightedSample`` or an atomic varifold works).
    Binning is order-independent: points are grouped by cell with a stable
    sort before any accumulation.
    """
    positions = sample.positions
    projectors = sample.projectors
    weights = getattr(sample, "weights", None)
    if weights is None:
        weights = sample.masses
    d = getattr(sample, "dim", None)
    if d is None:
        d = sample.d
    if positions.shape[1] != mesh.n:
        raise ValueError(
            f"sample dimension {positions.shape[1]} != mesh dimension {mesh.n}"
        )

    idx = mesh.cell_index(positions)
    lin = np.ravel_multi_index(tuple(idx.T), tuple(mesh.counts))
    order = np.argsort(lin, kind="stable")
    sorted_lin = lin[order]
    starts = np.flatnonzero(
        np.r_[True, sorted_lin[1:] != sorted_lin[:-1]]
    )

    w_sorted = weights[order]
    cell_mass = np.add.reduceat(w_sorted, starts)
    weighted_proj = w_sorted[:, None, None] * projectors[order]
    proj_sum = np.add.reduceat(weighted_proj, starts, axis=0)

    keep = cell_mass > 0
    cell_mass = cell_mass[keep]
    mean_proj = proj_sum[keep] / cell_mass[:, None, None]
    mean_proj = 0.5 * (mean_proj + np.swapaxes(mean_proj, -1, -2))
    cell_idx = idx[order][starts][keep]

    # Frobenius-nearest rank-d projector: span of the top-d eigenvectors.
    _, vecs = np.linalg.eigh(mean_proj)
    top = vecs[..., -d:]
    cell_proj = np.einsum("kia,kja->kij", top, top)

    return VolumetricVarifold(
        mesh, cell_idx, cell_mass, cell_proj, subdivisions=subdivisions
    )


def tangent_fit_quality(sample, volumetric):
    """Mass-weighted mean Frobenius distance from sample planes to cell planes.

    Measures how well a single plane per cell represents the sample's
    tangent field; decays linearly in the cell size for smooth surfaces.
    """
    mesh = volumetric.mesh
    idx = mesh.cell_index(sample.positions)
    lin = np.ravel_multi_index(tuple(idx.T), tuple(mesh.counts))
    cell_lin = np.ravel_multi_index(
        tuple(volumetric.cell_indices.T), tuple(mesh.counts)
    )
    pos = np.searchsorted(cell_lin, lin)
    if np.any(pos >= len(cell_lin)) or np.any(cell_lin[pos] != lin):
        raise ValueError(
            "sample occupies a cell absent from the volumetric varifold"
        )
    weights = getattr(sample, "weights", None)
    if weights is None:
        weights = sample.masses
    diff = sample.projectors - volumetric.projectors[pos]
    dist = np.sqrt(np.einsum("kij,kij->k", diff, diff))
    total = float(np.sum(weights))
    if total == 0:
        raise ValueError("sample has zero total weight")
    return float(np.sum(weights * dist)) / total


def write_cells_csv(volumetric, path):
    """Cell table: grid index, center, mass, projector entries (row-major).

    A leading comment line records the mesh geometry so the table can be
    read back without the originating mesh object.
    """
    mesh = volumetric.mesh
    n = volumetric.n
    origin_txt = " ".join(f"{v:.17g}" for v in mesh.origin)
    header = (
        [f"k{i + 1}" for i in range(n)]
        + [f"c{i + 1}" for i in range(n)]
        + ["mass"]
        + [f"p{i + 1}_{j + 1}" for i in range(n) for j in range(n)]
    )
    centers = volumetric.cell_centers()
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# edge={mesh.edge:.17g} origin={origin_txt} "
            f"subdivisions={volumetric.subdivisions}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(volumetric)):
            row = (
                [str(int(v)) for v in volumetric.cell_indices[k]]
                + [f"{v:.17g}" for v in centers[k]]
                + [f"{volumetric.masses[k]:.17g}"]
                + [f"{v:.17g}" for v in volumetric.projectors[k].reshape(-1)]
            )
            writer.writerow(row)


def read_cells_csv(path):
    """Rebuild a :class:`VolumetricVarifold` written by ``write_cells_csv``.

    The reconstructed mesh box is tight around the occupied cells.
    """
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError("missing mesh comment line")
        meta = {}
        for tok in first[1:].split():
            if "=" in tok:
                key, _, val = tok.partition("=")
                meta.setdefault(key, []).append(val)
            else:
                # continuation of a vector-valued entry such as origin
                meta[key].append(tok)
        edge = float(meta["edge"][0])
        origin = np.array([float(v) for v in meta["origin"]])
        subdivisions = int(meta["subdivisions"][0])
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    n = sum(1 for name in header if name.startswith("k"))
    if len(header) != 2 * n + 1 + n * n:
        raise ValueError("cell table header has unexpected column count")
    if not rows:
        raise ValueError("cell table has no cells")
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != len(header):
        raise ValueError("cell table row width does not match header")
    cell_idx = data[:, :n].astype(np.int64)
    masses = data[:, 2 * n]
    projectors = data[:, 2 * n + 1:].reshape(-1, n, n)
    hi = origin + (cell_idx.max(axis=0) + 1) * edge
    mesh = Mesh(origin, hi, edge)
    return VolumetricVarifold(
        mesh, cell_idx, masses, projectors, subdivisions=subdivisions
    )
