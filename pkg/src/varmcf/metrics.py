"""Distances and regularity diagnostics for discrete measures.

The bounded-Lipschitz (flat) distance between finite measures mu and nu is

    sup { integral of phi d(mu - nu) : sup|phi| + lip(phi) <= 1 }.

For atomic measures the supremum is attained by a function defined on the
union support, so it is an exact linear program over the atom values, one
box constraint per atom and one slope constraint per atom pair. No pair is
pruned: dropping constraints between distant atoms changes the optimum
(two unit atoms at distance 3 have distance 6/5, not 2).
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .varifold import VolumetricVarifold

__all__ = [
    "AtomicMeasure",
    "atomize",
    "bounded_lipschitz_distance",
    "ahlfors_estimate",
    "ahlfors_scan",
]


class AtomicMeasure:
    """Finite nonnegative measure supported on finitely many points.

    May be empty (the zero measure). Zero-mass atoms are dropped.
    """

    def __init__(self, positions, masses):
        positions = np.ascontiguousarray(positions, dtype=float)
        masses = np.ascontiguousarray(masses, dtype=float)
        if positions.ndim != 2:
            raise ValueError("positions must be (N, n)")
        if masses.shape != (len(positions),):
            raise ValueError("masses must be (N,)")
        if np.any(masses < 0):
            raise ValueError("masses must be nonnegative")
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(masses))):
            raise ValueError("non-finite values in measure data")
        keep = masses > 0
        positions, masses = positions[keep], masses[keep]
        for arr in (positions, masses):
            arr.flags.writeable = False
        self.positions = positions
        self.masses = masses

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((0, n)), np.zeros(0))

    @property
    def n(self):
        return self.positions.shape[1]

    def __len__(self):
        return len(self.masses)

    def total_mass(self):
        return float(np.sum(self.masses))


def atomize(obj, subdivisions=None):
    """Spatial mass measure of a varifold (or sample) as an atomic measure.

    Volumetric varifolds are expanded to their midpoint subcell nodes, each
    node carrying an equal share of its cell's mass; the node cloud lies
    within ``mesh.h`` of any point of the represented measure.
    """
    if isinstance(obj, AtomicMeasure):
        return obj
    if isinstance(obj, VolumetricVarifold):
        s = obj.subdivisions if subdivisions is None else int(subdivisions)
        pts, owner = obj.quadrature_points(s)
        masses = obj.masses[owner] / s**obj.n
        return AtomicMeasure(pts, masses)
    weights = getattr(obj, "weights", None)
    if weights is None:
        weights = obj.masses
    return AtomicMeasure(obj.positions, weights)


def _merged_signed_difference(mu, nu):
    """Union support and per-point signed mass difference, duplicates merged."""
    pts = np.vstack([mu.positions, nu.positions])
    signed = np.concatenate([mu.masses, -nu.masses])
    if len(pts) == 0:
        return pts, signed
    order = np.lexsort(pts.T[::-1])
    pts, signed = pts[order], signed[order]
    new = np.r_[True, np.any(pts[1:] != pts[:-1], axis=1)]
    group = np.cumsum(new) - 1
    unique_pts = pts[new]
    sums = np.zeros(len(unique_pts))
    np.add.at(sums, group, signed)
    return unique_pts, sums


def bounded_lipschitz_distance(mu, nu):
    """Exact bounded-Lipschitz distance between two atomic measures.

    Solves the defining linear program on the union support with the HiGHS
    solver; variables are the test-function values plus its sup norm and
    Lipschitz constant.
    """
    mu = atomize(mu)
    nu = atomize(nu)
    if len(mu) and len(nu) and mu.n != nu.n:
        raise ValueError("measures live in different ambient dimensions")
    pts, c = _merged_signed_difference(mu, nu)
    k = len(pts)
    if k == 0 or np.all(c == 0):
        return 0.0

    # variables: phi_1..phi_k, a (sup bound), L (lipschitz bound)
    rows, cols, vals = [], [], []
    rhs = []

    def add_row(entries, b):
        r = len(rhs)
        for col, val in entries:
            rows.append(r)
            cols.append(col)
            vals.append(val)
        rhs.append(b)

    for i in range(k):
        add_row([(i, 1.0), (k, -1.0)], 0.0)   # phi_i <= a
        add_row([(i, -1.0), (k, -1.0)], 0.0)  # -phi_i <= a
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    iu, ju = np.triu_indices(k, 1)
    for i, j, d in zip(iu, ju, dist[iu, ju]):
        add_row([(int(i), 1.0), (int(j), -1.0), (k + 1, -d)], 0.0)
        add_row([(int(i), -1.0), (int(j), 1.0), (k + 1, -d)], 0.0)
    add_row([(k, 1.0), (k + 1, 1.0)], 1.0)    # a + L <= 1

    a_ub = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(rhs), k + 2)
    )
    objective = np.zeros(k + 2)
    objective[:k] = -c  # linprog minimizes
    bounds = [(-1.0, 1.0)] * k + [(0.0, 1.0), (0.0, 1.0)]
    res = linprog(
        objective, A_ub=a_ub, b_ub=np.asarray(rhs), bounds=bounds,
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"distance LP failed: {res.message}")
    return float(-res.fun)


def _probe_indices(count, max_probes):
    if count <= max_probes:
        return np.arange(count)
    return np.unique(np.linspace(0, count - 1, max_probes).round().astype(int))


def ahlfors_scan(obj, d, radii, max_probes=64, probes=None):
    """Ball-mass ratios mass(B(x, r)) / r^d over support probes and radii.

    Probes default to an even subsample of the support; pass ``probes`` to
    scan other centers. Returns a list of (probe, radius, ball_mass, ratio)
    tuples where the ratio is max(mass / r^d, r^d / mass), the two-sided
    regularity defect; an empty ball yields an infinite ratio.
    """
    measure = atomize(obj)
    if len(measure) == 0:
        raise ValueError("cannot scan an empty measure")
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    if probes is None:
        idx = _probe_indices(len(measure), max_probes)
        probes = measure.positions[idx]
    else:
        probes = np.atleast_2d(np.asarray(probes, dtype=float))
    diff = measure.positions[None, :, :] - probes[:, None, :]
    dist = np.sqrt(np.einsum("pmi,pmi->pm", diff, diff))
    rows = []
    for p in range(len(probes)):
        for r in radii:
            ball = float(np.sum(measure.masses[dist[p] <= r]))
            scale = r**d
            if ball == 0.0:
                ratio = np.inf
            else:
                ratio = max(ball / scale, scale / ball)
            rows.append((probes[p], float(r), ball, float(ratio)))
    return rows


def ahlfors_estimate(obj, d, radii, max_probes=64):
    """Largest two-sided ball-mass ratio: an empirical regularity constant."""
    rows = ahlfors_scan(obj, d, radii, max_probes=max_probes)
    return max(row[3] for row in rows)
