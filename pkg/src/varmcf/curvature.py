"""Kernel-regularized first variation, mass density, and mean curvature.

For a varifold with atoms (x_j, P_j, m_j) and a kernel pair (rho, xi) at
scale eps, the regularized quantities at a point y are

    first variation:  sum_j m_j P_j grad rho_eps(x_j - y)
    mass density:     sum_j m_j xi_eps(|x_j - y|)

and the approximate mean curvature is minus their quotient times the ratio
of the pair's normalization constants (c_xi / c_rho), which makes the value
invariant under rescaling either profile and consistent with the classical
mean curvature as eps shrinks. Volumetric varifolds are evaluated through
their midpoint subcell quadrature, refined automatically when the cell size
is not small compared to eps.

Evaluation at many points uses a uniform spatial hash with bucket size eps,
so only atoms inside the kernel support are touched. Neighbor lists are
assembled in sorted atom order, which keeps results independent of probe
ordering.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .varifold import VolumetricVarifold

__all__ = [
    "DenominatorTooSmall",
    "CurvatureQuery",
    "CurvatureField",
    "regularized_first_variation",
    "regularized_mass",
    "approx_mean_curvature",
    "curvature_field",
    "write_curvature_csv",
]

# Largest probe-block x neighbor-count product handled in one broadcast.
_BLOCK_BUDGET = 4_000_000


class DenominatorTooSmall(ValueError):
    """Regularized mass at a query point fell below the safeguard floor."""

    def __init__(self, point, denominator, floor):
        self.point = np.asarray(point, dtype=float)
        self.denominator = float(denominator)
        self.floor = float(floor)
        super().__init__(
            f"regularized mass {self.denominator:.3e} at point "
            f"{np.array2string(self.point, precision=6)} is below the "
            f"floor {self.floor:.3e}; the point is too far from the support"
        )


class CurvatureQuery:
    """Evaluation parameters: kernel pair, scale eps, denominator guard.

    ``tau`` sets the floor tau * eps**(d - n) under which the curvature
    quotient is refused; d and n come from the pair.
    """

    def __init__(self, pair, epsilon, tau=1e-14):
        epsilon = float(epsilon)
        if not (0.0 < epsilon <= 1.0):
            raise ValueError("epsilon must lie in (0, 1]")
        tau = float(tau)
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.pair = pair
        self.epsilon = epsilon
        self.tau = tau

    @property
    def floor(self):
        return self.tau * self.epsilon ** (self.pair.d - self.pair.n)


class CurvatureField:
    """Mean curvature evaluated at a batch of points, failures recorded.

    ``values`` rows are nan where ``ok`` is False; ``denominators`` always
    holds the regularized mass so failures can be diagnosed.
    """

    def __init__(self, points, values, denominators, ok):
        self.points = points
        self.values = values
        self.denominators = denominators
        self.ok = ok

    def __len__(self):
        return len(self.points)

    @property
    def n_failures(self):
        return int(np.sum(~self.ok))


def _atom_cloud(varifold, query):
    """Represent the varifold as a (positions, projectors, masses) cloud.

    Volumetric varifolds are expanded into their subcell quadrature nodes,
    with enough subdivisions that subcells stay below eps / 4.
    """
    if not isinstance(varifold, VolumetricVarifold):
        return varifold.positions, varifold.projectors, varifold.masses
    s = max(
        2,
        varifold.subdivisions,
        math.ceil(4.0 * varifold.h / query.epsilon),
    )
    key = ("atom_cloud", s)
    if key not in varifold._caches:
        pts, owner = varifold.quadrature_points(s)
        masses = np.repeat(varifold.masses / s**varifold.n, s**varifold.n)
        masses.flags.writeable = False
        varifold._caches[key] = (pts, owner, masses)
    pts, owner, masses = varifold._caches[key]
    return pts, varifold.projectors[owner], masses


def _bucket_table(positions, epsilon):
    """Uniform hash: map bucket key -> sorted indices of atoms inside."""
    origin = positions.min(axis=0)
    keys = np.floor((positions - origin) / epsilon).astype(np.int64)
    order = np.lexsort(keys.T[::-1])
    sorted_keys = keys[order]
    starts = np.flatnonzero(
        np.r_[True, np.any(sorted_keys[1:] != sorted_keys[:-1], axis=1)]
    )
    ends = np.r_[starts[1:], len(order)]
    table = {}
    for a, b in zip(starts, ends):
        idx = np.sort(order[a:b])
        idx.flags.writeable = False
        table[tuple(sorted_keys[a])] = idx
    return origin, table


def _hashed_atoms(varifold, query):
    key = ("support_hash", query.epsilon)
    if key not in varifold._caches:
        pts, proj, masses = _atom_cloud(varifold, query)
        origin, table = _bucket_table(pts, query.epsilon)
        varifold._caches[key] = (pts, proj, masses, origin, table)
    return varifold._caches[key]


def _neighbor_offsets(n):
    grids = np.meshgrid(*([np.arange(-1, 2)] * n), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def _pair_sums(varifold, query, points):
    """Regularized first variation and mass at each point: ((P, n), (P,))."""
    pts, proj, masses, origin, table = _hashed_atoms(varifold, query)
    points = np.ascontiguousarray(points, dtype=float)
    n = pts.shape[1]
    if points.shape[1] != n:
        raise ValueError(f"query points must have dimension {n}")
    eps = query.epsilon
    pair = query.pair
    inv_eps_n = eps ** (-n)

    num = np.zeros((len(points), n))
    den = np.zeros(len(points))

    probe_keys = np.floor((points - origin) / eps).astype(np.int64)
    order = np.lexsort(probe_keys.T[::-1])
    sorted_keys = probe_keys[order]
    starts = np.flatnonzero(
        np.r_[True, np.any(sorted_keys[1:] != sorted_keys[:-1], axis=1)]
    )
    ends = np.r_[starts[1:], len(order)]
    offsets = _neighbor_offsets(n)

    for a, b in zip(starts, ends):
        base = sorted_keys[a]
        lists = [
            table[k]
            for k in map(tuple, base + offsets)
            if k in table
        ]
        if not lists:
            continue
        sel = np.sort(np.concatenate(lists))
        probe_rows = order[a:b]
        block = max(1, _BLOCK_BUDGET // max(1, len(sel)))
        a_pts = pts[sel]
        a_proj = proj[sel]
        a_mass = masses[sel]
        for c in range(0, len(probe_rows), block):
            rows = probe_rows[c:c + block]
            diff = a_pts[None, :, :] - points[rows][:, None, :]
            r = np.sqrt(np.einsum("gmi,gmi->gm", diff, diff))
            u = r / eps
            den[rows] = np.einsum(
                "m,gm->g", a_mass, pair.xi(u)
            ) * inv_eps_n
            # grad rho_eps(w) = eps^-(n+1) rho'(|w|/eps) w/|w|, zero at w=0
            coef = pair.rho.derivative(u) / np.maximum(r, 1e-300)
            coef *= eps ** (-(n + 1))
            num[rows] = np.einsum(
                "gm,mij,gmj->gi", a_mass * coef, a_proj, diff
            )
    return num, den


def _as_batch(points):
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    return np.atleast_2d(points), single


def regularized_first_variation(varifold, query, points):
    """Kernel-smoothed first variation sum_j m_j P_j grad rho_eps(x_j - y)."""
    batch, single = _as_batch(points)
    num, _ = _pair_sums(varifold, query, batch)
    return num[0] if single else num


def regularized_mass(varifold, query, points):
    """Kernel-smoothed mass density sum_j m_j xi_eps(|x_j - y|)."""
    batch, single = _as_batch(points)
    _, den = _pair_sums(varifold, query, batch)
    return float(den[0]) if single else den


def approx_mean_curvature(varifold, query, points):
    """Regularized mean curvature; raises if any denominator underflows."""
    batch, single = _as_batch(points)
    num, den = _pair_sums(varifold, query, batch)
    floor = query.floor
    bad = den < floor
    if np.any(bad):
        worst = int(np.argmin(den))
        raise DenominatorTooSmall(batch[worst], den[worst], floor)
    ratio = query.pair.c_xi / query.pair.c_rho
    values = -ratio * num / den[:, None]
    return values[0] if single else values


def curvature_field(varifold, query, points):
    """Like :func:`approx_mean_curvature` but records failures per point."""
    batch, _ = _as_batch(points)
    num, den = _pair_sums(varifold, query, batch)
    ok = den >= query.floor
    ratio = query.pair.c_xi / query.pair.c_rho
    values = np.full_like(num, np.nan)
    values[ok] = -ratio * num[ok] / den[ok, None]
    return CurvatureField(batch, values, den, ok)


def write_curvature_csv(field, path):
    """Table of query point, curvature vector, denominator, and status."""
    n = field.points.shape[1]
    header = (
        [f"x{i + 1}" for i in range(n)]
        + [f"H{i + 1}" for i in range(n)]
        + ["denominator", "status"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(field)):
            status = "ok" if field.ok[k] else "small_denominator"
            row = (
                [f"{v:.17g}" for v in field.points[k]]
                + [f"{v:.17g}" for v in field.values[k]]
                + [f"{field.denominators[k]:.17g}", status]
            )
            writer.writerow(row)
