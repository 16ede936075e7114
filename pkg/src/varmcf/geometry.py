"""Analytic closed shapes, tangent planes, and surface sampling.

Shapes know their exact geometry: positions, tangent planes as orthogonal
projectors, mean curvature vectors, principal curvature bounds, and total
d-dimensional measure. ``sample_surface`` turns a shape into a weighted
point sample whose weights are quadrature weights for the surface measure,
using spectrally accurate product rules on the parameter domain.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ellipe

__all__ = [
    "Plane",
    "WeightedSample",
    "AnalyticShape",
    "Circle",
    "Ellipse",
    "Sphere",
    "Torus",
    "projector_distance",
    "exact_mean_curvature",
    "sample_surface",
    "make_shape",
]

# Tolerances for projector invariants and on-shape membership checks.
SYMMETRY_TOL = 1e-12
IDEMPOTENT_TOL = 1e-10
TRACE_TOL = 1e-10
ON_SHAPE_TOL = 1e-8


def _as_points(y, n):
    """Return (points, was_single) with points shaped (N, n)."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        if y.shape[0] != n:
            raise ValueError(f"expected a point in R^{n}, got shape {y.shape}")
        return y[None, :], True
    if y.ndim != 2 or y.shape[1] != n:
        raise ValueError(f"expected points shaped (N, {n}), got {y.shape}")
    return y, False


class Plane:
    """A d-dimensional linear subspace of R^n stored as an orthogonal projector.

    Parameters
    ----------
    projector : (n, n) array_like
        Symmetric idempotent matrix projecting onto the subspace.
    dim : int, optional
        Subspace dimension. Inferred from the trace when omitted.

    Raises
    ------
    ValueError
        If the matrix is not symmetric (1e-12), not idempotent (1e-10),
        or its trace differs from ``dim`` by more than 1e-10.
    """

    __slots__ = ("projector", "dim")

    def __init__(self, projector, dim=None):
        p = np.array(projector, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"projector must be square, got shape {p.shape}")
        if np.max(np.abs(p - p.T)) > SYMMETRY_TOL:
            raise ValueError("projector is not symmetric within 1e-12")
        if np.max(np.abs(p @ p - p)) > IDEMPOTENT_TOL:
            raise ValueError("projector is not idempotent within 1e-10")
        tr = float(np.trace(p))
        if dim is None:
            dim = int(round(tr))
        if abs(tr - dim) > TRACE_TOL:
            raise ValueError(f"trace {tr} does not match dimension {dim}")
        p.flags.writeable = False
        self.projector = p
        self.dim = int(dim)

    @classmethod
    def from_basis(cls, basis):
        """Build the plane spanned by the rows of ``basis`` (d, n)."""
        b = np.atleast_2d(np.asarray(basis, dtype=float))
        q, _ = np.linalg.qr(b.T)
        q = q[:, : b.shape[0]]
        return cls(q @ q.T, b.shape[0])

    @property
    def n(self):
        return self.projector.shape[0]

    def __repr__(self):
        return f"Plane(dim={self.dim}, n={self.n})"


def projector_distance(p, q):
    """Frobenius distance between two planes' projectors.

    Accepts ``Plane`` objects or raw projector arrays. Two orthogonal lines
    in R^2 are at distance sqrt(2); the x-axis and the 45-degree line are at
    distance 1.
    """
    if isinstance(p, Plane) and isinstance(q, Plane):
        if p.dim != q.dim or p.n != q.n:
            raise ValueError(
                f"dimension mismatch: ({p.dim}, {p.n}) vs ({q.dim}, {q.n})"
            )
        a, b = p.projector, q.projector
    else:
        a = p.projector if isinstance(p, Plane) else np.asarray(p, dtype=float)
        b = q.projector if isinstance(q, Plane) else np.asarray(q, dtype=float)
        if a.shape != b.shape:
            raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b, "fro"))


class WeightedSample:
    """Point sample of a surface: positions, tangent projectors, weights.

    Weights are quadrature weights for the d-dimensional surface measure,
    so ``weights.sum()`` approximates the total measure.
    """

    __slots__ = ("positions", "projectors", "weights", "dim")

    def __init__(self, positions, projectors, weights, dim):
        self.positions = np.ascontiguousarray(positions, dtype=float)
        self.projectors = np.ascontiguousarray(projectors, dtype=float)
        self.weights = np.ascontiguousarray(weights, dtype=float)
        self.dim = int(dim)
        if self.positions.ndim != 2:
            raise ValueError("positions must be (N, n)")
        n = self.positions.shape[1]
        if self.projectors.shape != (len(self.positions), n, n):
            raise ValueError("projectors must be (N, n, n)")
        if self.weights.shape != (len(self.positions),):
            raise ValueError("weights must be (N,)")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        for arr in (self.positions, self.projectors, self.weights):
            arr.flags.writeable = False

    @property
    def n(self):
        return self.positions.shape[1]

    def __len__(self):
        return len(self.positions)

    def total_weight(self):
        return float(np.sum(self.weights))


class AnalyticShape:
    """Base class for closed shapes with exact differential geometry.

    Subclasses set ``d`` (intrinsic dimension) and ``n`` (ambient dimension)
    and implement the geometry queries. Off-shape points are rejected with a
    tolerance of 1e-8.
    """

    d = None
    n = None

    def mean_curvature(self, y):
        """Mean curvature vector at on-shape points ``y``.

        For the d-sphere of radius r centered at c this is -(d/r^2)(y - c);
        it points toward the local center of curvature.
        """
        raise NotImplementedError

    def tangent_projector(self, y):
        """Tangent-plane projectors, shaped like ``y`` with a trailing (n, n)."""
        raise NotImplementedError

    def max_principal_curvature(self, y):
        """Largest principal curvature magnitude at on-shape points."""
        raise NotImplementedError

    def global_max_principal_curvature(self):
        """Upper bound of the principal curvature over the whole shape."""
        raise NotImplementedError

    def total_measure(self):
        """Exact d-dimensional measure of the shape."""
        raise NotImplementedError

    def sample(self, resolution):
        """Quadrature sample; see ``sample_surface``."""
        raise NotImplementedError

    def bounding_box(self, margin=0.0):
        """Axis-aligned box containing the shape, inflated by ``margin``."""
        raise NotImplementedError

    def _reject_off_shape(self, mismatch, what="point"):
        worst = float(np.max(mismatch))
        if worst > ON_SHAPE_TOL:
            raise ValueError(
                f"{what} not on the shape within {ON_SHAPE_TOL:g} "
                f"(distance {worst:.3e})"
            )


class Circle(AnalyticShape):
    """Circle of given radius and center in R^2."""

    d = 1
    n = 2

    def __init__(self, radius=1.0, center=(0.0, 0.0)):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float).copy()
        if self.center.shape != (2,):
            raise ValueError("center must be a point in R^2")
        self.center.flags.writeable = False

    def mean_curvature(self, y):
        pts, single = _as_points(y, 2)
        rel = pts - self.center
        dist = np.linalg.norm(rel, axis=1)
        self._reject_off_shape(np.abs(dist - self.radius))
        h = -rel / self.radius**2
        return h[0] if single else h

    def tangent_projector(self, y):
        pts, single = _as_points(y, 2)
        rel = pts - self.center
        dist = np.linalg.norm(rel, axis=1)
        self._reject_off_shape(np.abs(dist - self.radius))
        t = np.stack([-rel[:, 1], rel[:, 0]], axis=1) / dist[:, None]
        p = t[:, :, None] * t[:, None, :]
        return p[0] if single else p

    def max_principal_curvature(self, y):
        pts, single = _as_points(y, 2)
        rel = np.linalg.norm(pts - self.center, axis=1)
        self._reject_off_shape(np.abs(rel - self.radius))
        k = np.full(len(pts), 1.0 / self.radius)
        return float(k[0]) if single else k

    def global_max_principal_curvature(self):
        return 1.0 / self.radius

    def total_measure(self):
        return 2.0 * np.pi * self.radius

    def sample(self, resolution):
        resolution = _check_resolution(resolution)
        theta = 2.0 * np.pi * np.arange(resolution) / resolution
        cos, sin = np.cos(theta), np.sin(theta)
        pts = self.center + self.radius * np.stack([cos, sin], axis=1)
        t = np.stack([-sin, cos], axis=1)
        proj = t[:, :, None] * t[:, None, :]
        w = np.full(resolution, 2.0 * np.pi * self.radius / resolution)
        return WeightedSample(pts, proj, w, self.d)

    def bounding_box(self, margin=0.0):
        r = self.radius + margin
        return self.center - r, self.center + r


class Ellipse(AnalyticShape):
    """Axis-aligned ellipse with semi-axes a (x) and b (y)."""

    d = 1
    n = 2

    def __init__(self, a, b, center=(0.0, 0.0)):
        if a <= 0 or b <= 0:
            raise ValueError("semi-axes must be positive")
        self.a = float(a)
        self.b = float(b)
        self.center = np.asarray(center, dtype=float).copy()
        self.center.flags.writeable = False

    def _theta_of(self, pts):
        rel = pts - self.center
        theta = np.arctan2(rel[:, 1] / self.b, rel[:, 0] / self.a)
        recon = np.stack(
            [self.a * np.cos(theta), self.b * np.sin(theta)], axis=1
        )
        self._reject_off_shape(np.linalg.norm(recon - rel, axis=1))
        return theta

    def _speed(self, theta):
        return np.sqrt(
            (self.a * np.sin(theta)) ** 2 + (self.b * np.cos(theta)) ** 2
        )

    def mean_curvature(self, y):
        pts, single = _as_points(y, 2)
        theta = self._theta_of(pts)
        speed = self._speed(theta)
        kappa = self.a * self.b / speed**3
        # Inward unit normal of the counterclockwise parametrization.
        normal = np.stack(
            [-self.b * np.cos(theta), -self.a * np.sin(theta)], axis=1
        ) / speed[:, None]
        h = kappa[:, None] * normal
        return h[0] if single else h

    def tangent_projector(self, y):
        pts, single = _as_points(y, 2)
        theta = self._theta_of(pts)
        t = np.stack(
            [-self.a * np.sin(theta), self.b * np.cos(theta)], axis=1
        )
        t /= np.linalg.norm(t, axis=1)[:, None]
        p = t[:, :, None] * t[:, None, :]
        return p[0] if single else p

    def max_principal_curvature(self, y):
        pts, single = _as_points(y, 2)
        theta = self._theta_of(pts)
        k = self.a * self.b / self._speed(theta) ** 3
        return float(k[0]) if single else k

    def global_max_principal_curvature(self):
        hi = max(self.a, self.b)
        lo = min(self.a, self.b)
        return hi / lo**2

    def total_measure(self):
        hi = max(self.a, self.b)
        lo = min(self.a, self.b)
        return float(4.0 * hi * ellipe(1.0 - (lo / hi) ** 2))

    def sample(self, resolution):
        resolution = _check_resolution(resolution)
        theta = 2.0 * np.pi * np.arange(resolution) / resolution
        pts = self.center + np.stack(
            [self.a * np.cos(theta), self.b * np.sin(theta)], axis=1
        )
        t = np.stack(
            [-self.a * np.sin(theta), self.b * np.cos(theta)], axis=1
        )
        speed = np.linalg.norm(t, axis=1)
        t /= speed[:, None]
        proj = t[:, :, None] * t[:, None, :]
        w = speed * (2.0 * np.pi / resolution)
        return WeightedSample(pts, proj, w, self.d)

    def bounding_box(self, margin=0.0):
        half = np.array([self.a, self.b]) + margin
        return self.center - half, self.center + half


class Sphere(AnalyticShape):
    """Round 2-sphere of given radius and center in R^3."""

    d = 2
    n = 3

    def __init__(self, radius=1.0, center=(0.0, 0.0, 0.0)):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float).copy()
        if self.center.shape != (3,):
            raise ValueError("center must be a point in R^3")
        self.center.flags.writeable = False

    def _check(self, pts):
        rel = pts - self.center
        dist = np.linalg.norm(rel, axis=1)
        self._reject_off_shape(np.abs(dist - self.radius))
        return rel

    def mean_curvature(self, y):
        pts, single = _as_points(y, 3)
        rel = self._check(pts)
        h = -(2.0 / self.radius**2) * rel
        return h[0] if single else h

    def tangent_projector(self, y):
        pts, single = _as_points(y, 3)
        rel = self._check(pts) / self.radius
        p = np.eye(3) - rel[:, :, None] * rel[:, None, :]
        return p[0] if single else p

    def max_principal_curvature(self, y):
        pts, single = _as_points(y, 3)
        self._check(pts)
        k = np.full(len(pts), 1.0 / self.radius)
        return float(k[0]) if single else k

    def global_max_principal_curvature(self):
        return 1.0 / self.radius

    def total_measure(self):
        return 4.0 * np.pi * self.radius**2

    def sample(self, resolution):
        """Product rule: trapezoid in azimuth, Gauss-Legendre in the polar
        coordinate z. The area element is r dtheta dz, so the rule integrates
        the total measure exactly and smooth integrands spectrally."""
        resolution = _check_resolution(resolution)
        u, gw = np.polynomial.legendre.leggauss(resolution)
        ntheta = 2 * resolution
        theta = 2.0 * np.pi * np.arange(ntheta) / ntheta
        r = self.radius
        ring = r * np.sqrt(1.0 - u**2)
        cos, sin = np.cos(theta), np.sin(theta)
        # Outer products over (polar node, azimuth node).
        x = ring[:, None] * cos[None, :]
        yy = ring[:, None] * sin[None, :]
        z = np.broadcast_to((r * u)[:, None], x.shape)
        pts = np.stack([x, yy, z], axis=-1).reshape(-1, 3) + self.center
        w = (r**2 * gw)[:, None] * np.full(ntheta, 2.0 * np.pi / ntheta)
        w = w.reshape(-1)
        nu = (pts - self.center) / r
        proj = np.eye(3) - nu[:, :, None] * nu[:, None, :]
        return WeightedSample(pts, proj, w, self.d)

    def bounding_box(self, margin=0.0):
        r = self.radius + margin
        return self.center - r, self.center + r


class Torus(AnalyticShape):
    """Round torus in R^3: distance R from the axis, tube radius a < R."""

    d = 2
    n = 3

    def __init__(self, major_radius=2.0, minor_radius=0.5,
                 center=(0.0, 0.0, 0.0)):
        if not 0 < minor_radius < major_radius:
            raise ValueError("need 0 < minor_radius < major_radius")
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)
        self.center = np.asarray(center, dtype=float).copy()
        self.center.flags.writeable = False

    def _angles_of(self, pts):
        rel = pts - self.center
        theta = np.arctan2(rel[:, 1], rel[:, 0])
        s = np.sqrt(rel[:, 0] ** 2 + rel[:, 1] ** 2)
        psi = np.arctan2(rel[:, 2], s - self.major_radius)
        recon = self._position(theta, psi)
        self._reject_off_shape(np.linalg.norm(recon - rel, axis=1))
        return theta, psi

    def _position(self, theta, psi):
        ring = self.major_radius + self.minor_radius * np.cos(psi)
        return np.stack(
            [ring * np.cos(theta), ring * np.sin(theta),
             self.minor_radius * np.sin(psi)],
            axis=-1,
        )

    @staticmethod
    def _outward_normal(theta, psi):
        return np.stack(
            [np.cos(psi) * np.cos(theta), np.cos(psi) * np.sin(theta),
             np.sin(psi)],
            axis=-1,
        )

    def mean_curvature(self, y):
        pts, single = _as_points(y, 3)
        theta, psi = self._angles_of(pts)
        ring = self.major_radius + self.minor_radius * np.cos(psi)
        total = 1.0 / self.minor_radius + np.cos(psi) / ring
        h = -total[:, None] * self._outward_normal(theta, psi)
        return h[0] if single else h

    def tangent_projector(self, y):
        pts, single = _as_points(y, 3)
        theta, psi = self._angles_of(pts)
        nu = self._outward_normal(theta, psi)
        p = np.eye(3) - nu[:, :, None] * nu[:, None, :]
        return p[0] if single else p

    def max_principal_curvature(self, y):
        pts, single = _as_points(y, 3)
        _, psi = self._angles_of(pts)
        ring = self.major_radius + self.minor_radius * np.cos(psi)
        k = np.maximum(1.0 / self.minor_radius, np.abs(np.cos(psi)) / ring)
        return float(k[0]) if single else k

    def global_max_principal_curvature(self):
        return max(
            1.0 / self.minor_radius,
            1.0 / (self.major_radius - self.minor_radius),
        )

    def total_measure(self):
        return 4.0 * np.pi**2 * self.major_radius * self.minor_radius

    def sample(self, resolution):
        resolution = _check_resolution(resolution)
        theta = 2.0 * np.pi * np.arange(resolution) / resolution
        psi = 2.0 * np.pi * np.arange(resolution) / resolution
        tg, pg = np.meshgrid(theta, psi, indexing="ij")
        tg, pg = tg.reshape(-1), pg.reshape(-1)
        pts = self._position(tg, pg) + self.center
        nu = self._outward_normal(tg, pg)
        proj = np.eye(3) - nu[:, :, None] * nu[:, None, :]
        ring = self.major_radius + self.minor_radius * np.cos(pg)
        w = self.minor_radius * ring * (2.0 * np.pi / resolution) ** 2
        return WeightedSample(pts, proj, w, self.d)

    def bounding_box(self, margin=0.0):
        out = self.major_radius + self.minor_radius + margin
        up = self.minor_radius + margin
        half = np.array([out, out, up])
        return self.center - half, self.center + half


def _check_resolution(resolution):
    resolution = int(resolution)
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    return resolution


def exact_mean_curvature(shape, y):
    """Mean curvature vector of ``shape`` at on-shape points ``y``."""
    return shape.mean_curvature(y)


def sample_surface(shape, resolution):
    """Sample ``shape`` into a WeightedSample at the given resolution.

    Resolution counts quadrature nodes per parameter axis (at least 8).
    Doubling it at least halves the total-measure error until the rule's
    floor; for the circle, sphere, and torus the total measure is exact up
    to roundoff.
    """
    return shape.sample(resolution)


_SHAPES = {
    "circle": Circle,
    "ellipse": Ellipse,
    "sphere": Sphere,
    "torus": Torus,
}


def make_shape(name, **params):
    """Construct a shape by name: circle, ellipse, sphere, or torus."""
    try:
        cls = _SHAPES[name]
    except KeyError:
        raise ValueError(
            f"unknown shape {name!r}; choose from {sorted(_SHAPES)}"
        ) from None
    return cls(**params)
