"""Space-time residual of the weak mean curvature flow identity.

For a smooth flow and a time-independent C^2 test function phi,

    d/dt  integral phi d||M(t)||
        = integral ( -phi |H|^2 + grad phi . H ) d||M(t)||,

so the residual of the time-integrated identity measures how far a
discrete trajectory is from flowing by its regularized mean curvature.
This module assembles that residual for volumetric snapshots, evaluates
the feasibility and rate constants that bound it, and provides the radial
C^2 test functions and vector fields used throughout.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .curvature import CurvatureQuery, curvature_field
from .discretization import Mesh, discretize

__all__ = [
    "RadialBump",
    "ConstantVectorField",
    "LinearVectorField",
    "BumpVectorField",
    "ConstantsLedger",
    "constants_ledger",
    "gamma_feasible",
    "GammaHypothesisError",
    "measure_curvature_consistency",
    "measure_tangent_lipschitz",
    "ResidualReport",
    "brakke_residual",
    "exact_flow_residual",
]

_NORM_GRID_SIZE = 20001


def _smoothstep(u):
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def _smoothstep_d1(u):
    return 30.0 * u**2 * (1.0 - u) ** 2


def _smoothstep_d2(u):
    return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)


class RadialBump:
    """C^2 radial cutoff: 1 inside, 0 outside, quintic ramp in between.

    The ramp is a function of squared distance, so the function is C^2
    everywhere including the center and both ramp edges. ``sup_value``,
    ``sup_gradient``, and ``sup_hessian`` are computed on a dense radial
    grid; ``c2_norm`` is their sum.
    """

    def __init__(self, center, inner_radius, outer_radius):
        center = np.asarray(center, dtype=float)
        inner_radius = float(inner_radius)
        outer_radius = float(outer_radius)
        if not 0.0 <= inner_radius < outer_radius:
            raise ValueError("need 0 <= inner_radius < outer_radius")
        self.center = center
        self.inner_radius = inner_radius
        self.outer_radius = outer_radius
        self._s0 = inner_radius**2
        self._s1 = outer_radius**2
        self._ds = self._s1 - self._s0
        self._compute_norms()

    def _ramp(self, s):
        u = np.clip((s - self._s0) / self._ds, 0.0, 1.0)
        return 1.0 - _smoothstep(u)

    def __call__(self, points):
        rel = np.asarray(points, dtype=float) - self.center
        return self._ramp(np.einsum("...i,...i->...", rel, rel))

    def gradient(self, points):
        rel = np.asarray(points, dtype=float) - self.center
        s = np.einsum("...i,...i->...", rel, rel)
        u = np.clip((s - self._s0) / self._ds, 0.0, 1.0)
        coef = -_smoothstep_d1(u) * (2.0 / self._ds)
        return coef[..., None] * rel

    def hessian(self, points):
        rel = np.asarray(points, dtype=float) - self.center
        s = np.einsum("...i,...i->...", rel, rel)
        u = np.clip((s - self._s0) / self._ds, 0.0, 1.0)
        a = -_smoothstep_d1(u) * (2.0 / self._ds)
        b = -_smoothstep_d2(u) * (4.0 / self._ds**2)
        n = rel.shape[-1]
        eye = np.eye(n)
        return (
            a[..., None, None] * eye
            + b[..., None, None] * rel[..., :, None] * rel[..., None, :]
        )

    def _compute_norms(self):
        r = np.linspace(0.0, self.outer_radius, _NORM_GRID_SIZE)
        s = r**2
        u = np.clip((s - self._s0) / self._ds, 0.0, 1.0)
        grad_mag = _smoothstep_d1(u) * (2.0 / self._ds) * r
        # Hessian eigenvalues: a (tangential) and a + b r^2 (radial).
        a = -_smoothstep_d1(u) * (2.0 / self._ds)
        b = -_smoothstep_d2(u) * (4.0 / self._ds**2)
        hess_op = np.maximum(np.abs(a), np.abs(a + b * s))
        self.sup_value = 1.0
        self.sup_gradient = float(np.max(grad_mag))
        self.sup_hessian = float(np.max(hess_op))

    @property
    def lip(self):
        return self.sup_gradient

    @property
    def c2_norm(self):
        return self.sup_value + self.sup_gradient + self.sup_hessian


class ConstantVectorField:
    def __init__(self, vector):
        self.vector = np.asarray(vector, dtype=float)

    def __call__(self, points):
        return np.broadcast_to(self.vector, np.shape(points)).copy()

    def jacobian(self, points):
        n = len(self.vector)
        return np.zeros((len(points), n, n))


class LinearVectorField:
    """X(x) = A x + b with constant Jacobian A."""

    def __init__(self, matrix, offset=None):
        self.matrix = np.asarray(matrix, dtype=float)
        n = self.matrix.shape[0]
        self.offset = (
            np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
        )

    def __call__(self, points):
        return points @ self.matrix.T + self.offset

    def jacobian(self, points):
        return np.broadcast_to(
            self.matrix, (len(points),) + self.matrix.shape
        ).copy()


class BumpVectorField:
    """X(x) = phi(x) v for a scalar bump phi and a fixed direction v."""

    def __init__(self, bump, direction):
        self.bump = bump
        self.direction = np.asarray(direction, dtype=float)

    def __call__(self, points):
        return self.bump(points)[:, None] * self.direction

    def jacobian(self, points):
        grad = self.bump.gradient(points)
        return self.direction[None, :, None] * grad[:, None, :]


class GammaHypothesisError(ValueError):
    """The mesh is too coarse for the kernel scale: 2h > gamma * eps."""


def gamma_feasible(c0, lambda_max, beta, lip_xi, d, floor=1e-6):
    """Largest mesh-to-kernel ratio allowed by the stability estimates.

    Takes the minimum of the structural caps: the regularity cap
    1 / (8 (1 + c0^(2/d))), the curvature cap 1 / lambda_max, and two
    kernel-floor caps keeping the discrete regularized mass bounded away
    from zero (the second with a factor-of-two safety margin so the
    resulting lower bound stays at least beta / 2).
    """
    c0 = float(c0)
    if c0 <= 1.0:
        raise ValueError("c0 must exceed 1")
    lambda_max = float(lambda_max)
    beta = float(beta)
    lip_xi = float(lip_xi)
    if min(lambda_max, beta, lip_xi) <= 0:
        raise ValueError("lambda_max, beta, and lip_xi must be positive")
    caps = (
        1.0 / (8.0 * (1.0 + c0 ** (2.0 / d))),
        1.0 / lambda_max,
        beta / (2.0 ** (3 * d) * c0**2 * (lip_xi + 1.0)),
        0.5 * beta / (2.0 ** (3 * d + 1) * c0**2 * lip_xi),
    )
    value = min(caps)
    if value < floor:
        raise ValueError(
            f"feasible mesh-kernel ratio {value:.3e} fell below {floor:g}"
        )
    return value


class ConstantsLedger:
    """Explicit constants entering the residual bounds.

    Inputs are geometric and kernel quantities; derived coefficients are
    evaluated once at construction. ``combined_rate_coeff`` multiplies
    (t2 - t1)(eps + h / eps^3) in the main estimate and
    ``weak_bound_coeff`` multiplies (eps + h / eps^3) in the standalone
    form.
    """

    INPUT_FIELDS = (
        "d",
        "ahlfors_constant",
        "curvature_consistency_constant",
        "tangent_lipschitz_constant",
        "kernel_floor",
        "mesh_kernel_ratio",
        "sup_rho_deriv",
        "sup_rho_second",
        "sup_xi_deriv",
        "initial_mass",
        "horizon",
    )
    DERIVED_FIELDS = (
        "exact_flow_term_coeff",
        "measure_transfer_coeff",
        "h_eps_sup_coeff",
        "h_eps_lip_coeff",
        "mass_lower_coeff",
        "representation_switch_coeff",
        "discrete_mass_lower_coeff",
        "h_eps_stability_coeff",
        "combined_rate_coeff",
        "weak_bound_coeff",
    )

    def __init__(self, d, ahlfors_constant, curvature_consistency_constant,
                 tangent_lipschitz_constant, kernel_floor, mesh_kernel_ratio,
                 sup_rho_deriv, sup_rho_second, sup_xi_deriv, initial_mass,
                 horizon):
        self.d = int(d)
        self.ahlfors_constant = float(ahlfors_constant)
        self.curvature_consistency_constant = float(
            curvature_consistency_constant
        )
        self.tangent_lipschitz_constant = float(tangent_lipschitz_constant)
        self.kernel_floor = float(kernel_floor)
        self.mesh_kernel_ratio = float(mesh_kernel_ratio)
        self.sup_rho_deriv = float(sup_rho_deriv)
        self.sup_rho_second = float(sup_rho_second)
        self.sup_xi_deriv = float(sup_xi_deriv)
        self.initial_mass = float(initial_mass)
        self.horizon = float(horizon)
        for name in self.INPUT_FIELDS[1:]:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        self._derive()

    def _derive(self):
        d = self.d
        c0 = self.ahlfors_constant
        c1 = self.curvature_consistency_constant
        c2 = self.tangent_lipschitz_constant
        beta = self.kernel_floor
        gamma = self.mesh_kernel_ratio
        mass0 = self.initial_mass

        self.exact_flow_term_coeff = c1 * mass0 * (2.0 + c1)
        self.h_eps_sup_coeff = (
            c0**2 * 2.0 ** (3 * d + 1) * self.sup_rho_deriv / beta
        )
        self.h_eps_lip_coeff = self.h_eps_sup_coeff * (
            1.0 + c0**2 * 2.0 ** (3 * d + 2) * self.sup_xi_deriv / beta
        )
        self.measure_transfer_coeff = (
            2.0 / gamma * (self.h_eps_sup_coeff**2 + self.h_eps_sup_coeff)
            + 2.0 * self.h_eps_sup_coeff * self.h_eps_lip_coeff
            + self.h_eps_lip_coeff
        ) * mass0
        self.mass_lower_coeff = beta / c0 * 2.0 ** (-2 * d - 1)
        self.discrete_mass_lower_coeff = (
            beta - gamma * c0**2 * 2.0 ** (3 * d + 1) * self.sup_xi_deriv
        )
        if self.discrete_mass_lower_coeff <= 0:
            raise ValueError(
                "mesh_kernel_ratio too large: the discrete regularized "
                "mass lower bound is not positive"
            )
        self.h_eps_stability_coeff = (
            self.sup_rho_deriv * self.sup_xi_deriv * 2.0 ** (2 * d) * c0**2
            / (self.mass_lower_coeff * self.discrete_mass_lower_coeff)
            + 2.0**d * self.sup_rho_second * (1.0 + 2.0 * c2) * c0
            / self.discrete_mass_lower_coeff
        )
        self.representation_switch_coeff = (
            self.h_eps_stability_coeff * mass0
            * (2.0 * self.h_eps_sup_coeff + 1.0)
        )
        self.combined_rate_coeff = (
            self.exact_flow_term_coeff
            + self.measure_transfer_coeff
            + self.representation_switch_coeff
        )
        self.weak_bound_coeff = (
            mass0 * (2.0 + c1) + self.combined_rate_coeff * self.horizon
        )

    def as_dict(self):
        return {
            name: getattr(self, name)
            for name in self.INPUT_FIELDS + self.DERIVED_FIELDS
        }


def constants_ledger(pair, d, ahlfors_constant,
                     curvature_consistency_constant,
                     tangent_lipschitz_constant, mesh_kernel_ratio,
                     initial_mass, horizon, kernel_floor=None):
    """Build a :class:`ConstantsLedger` from a kernel pair and measurements.

    Kernel sup norms come from the pair; the kernel floor defaults to the
    pair's minimum mass-profile value over the radii the regularity
    constant guarantees are populated.
    """
    if kernel_floor is None:
        kernel_floor = pair.beta(ahlfors_constant)
    return ConstantsLedger(
        d=d,
        ahlfors_constant=ahlfors_constant,
        curvature_consistency_constant=curvature_consistency_constant,
        tangent_lipschitz_constant=tangent_lipschitz_constant,
        kernel_floor=kernel_floor,
        mesh_kernel_ratio=mesh_kernel_ratio,
        sup_rho_deriv=pair.sup_rho_deriv,
        sup_rho_second=pair.sup_rho_second,
        sup_xi_deriv=pair.sup_xi_deriv,
        initial_mass=initial_mass,
        horizon=horizon,
    )


def measure_curvature_consistency(shape, resolution, pair, epsilons,
                                  probe_count=32):
    """Empirical curvature consistency constant and its per-scale table.

    Returns (estimate, rows) where rows are (eps, max error) pairs over
    probe points on the shape and the estimate is max(error / eps).
    """
    from .varifold import SampledManifoldVarifold

    v = SampledManifoldVarifold.from_shape(shape, resolution)
    probes = shape.sample(probe_count).positions
    h_true = shape.mean_curvature(probes)
    rows = []
    for eps in epsilons:
        query = CurvatureQuery(pair, eps)
        field = curvature_field(v, query, probes)
        if field.n_failures:
            raise RuntimeError(
                f"curvature evaluation failed at {field.n_failures} probes"
            )
        err = float(np.max(np.linalg.norm(field.values - h_true, axis=1)))
        rows.append((float(eps), err))
    estimate = max(err / eps for eps, err in rows)
    return estimate, rows


def measure_tangent_lipschitz(shape, resolution, max_separation=0.1):
    """Largest projector distance to point distance ratio at short range."""
    sample = shape.sample(resolution)
    pts = sample.positions
    proj = sample.projectors
    best = 0.0
    block = 256
    for a in range(0, len(pts), block):
        diff = pts[a:a + block, None, :] - pts[None, :, :]
        dist = np.sqrt(np.einsum("pmi,pmi->pm", diff, diff))
        pdiff = proj[a:a + block, None] - proj[None, :]
        pdist = np.sqrt(np.einsum("pmij,pmij->pm", pdiff, pdiff))
        mask = (dist > 0) & (dist <= max_separation)
        if np.any(mask):
            best = max(best, float(np.max(pdist[mask] / dist[mask])))
    return best


def _time_weights(times, rule):
    dt = times[1] - times[0]
    count = len(times)
    if rule == "trapezoid":
        w = np.full(count, dt)
        w[0] = w[-1] = 0.5 * dt
        return w
    if rule == "simpson":
        if (count - 1) % 2 != 0:
            raise ValueError(
                "the simpson rule needs an even number of time panels"
            )
        w = np.empty(count)
        w[0] = w[-1] = dt / 3.0
        w[1:-1:2] = 4.0 * dt / 3.0
        w[2:-1:2] = 2.0 * dt / 3.0
        return w
    raise ValueError(f"unknown time rule {rule!r}")


class ResidualReport:
    """All terms of the assembled space-time residual.

    ``residual`` equals (final mass term - initial mass term) minus the
    time-quadrature sum of the flux integrand, recomputable from the
    stored arrays via :meth:`recompute`; reversing the time orientation
    negates it exactly.
    """

    def __init__(self, times, mass_phi, curvature_terms, transport_terms,
                 time_weights, time_rule, epsilon=None, h=None, edge=None,
                 gamma=None, hypothesis_satisfied=None, failed_nodes=0,
                 bounds=None):
        self.times = np.asarray(times, dtype=float)
        self.mass_phi = np.asarray(mass_phi, dtype=float)
        self.curvature_terms = np.asarray(curvature_terms, dtype=float)
        self.transport_terms = np.asarray(transport_terms, dtype=float)
        self.time_weights = np.asarray(time_weights, dtype=float)
        self.time_rule = time_rule
        self.epsilon = epsilon
        self.h = h
        self.edge = edge
        self.gamma = gamma
        self.hypothesis_satisfied = hypothesis_satisfied
        self.failed_nodes = int(failed_nodes)
        self.bounds = dict(bounds) if bounds else {}
        self.mass_difference = float(self.mass_phi[-1] - self.mass_phi[0])
        self.flux_integral = float(
            np.sum(self.time_weights
                   * (-self.curvature_terms + self.transport_terms))
        )
        self.residual = self.mass_difference - self.flux_integral

    def recompute(self, orientation=1):
        """Re-derive the residual from the stored terms.

        ``orientation=-1`` integrates the identity from the final time back
        to the initial one, which negates the residual exactly.
        """
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        mass_diff = self.mass_phi[-1] - self.mass_phi[0]
        flux = np.sum(
            self.time_weights
            * (-self.curvature_terms + self.transport_terms)
        )
        return orientation * (mass_diff - flux)

    @property
    def abs_residual(self):
        return abs(self.residual)

    def as_dict(self):
        out = {
            "t_start": float(self.times[0]),
            "t_end": float(self.times[-1]),
            "time_rule": self.time_rule,
            "residual": self.residual,
            "abs_residual": self.abs_residual,
            "mass_difference": self.mass_difference,
            "flux_integral": self.flux_integral,
            "failed_nodes": self.failed_nodes,
        }
        for name in ("epsilon", "h", "edge", "gamma"):
            value = getattr(self, name)
            if value is not None:
                out[name] = float(value)
        if self.hypothesis_satisfied is not None:
            out["hypothesis_satisfied"] = bool(self.hypothesis_satisfied)
        out.update(self.bounds)
        return out


def _thread_count(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("VARMCF_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(
                f"VARMCF_THREADS must be an integer, got {env!r}"
            ) from None
    return 1


def _snapshot_terms(volumetric, query, phi):
    """Mass, curvature, and transport integrals of one snapshot."""
    pts, owner = volumetric.quadrature_points()
    phi_vals = phi(pts)
    grad_vals = phi.gradient(pts)
    per_node = volumetric.masses[owner] / (
        volumetric.subdivisions**volumetric.n
    )
    mass_phi = float(np.sum(per_node * phi_vals))

    active = (phi_vals != 0.0) | np.any(grad_vals != 0.0, axis=1)
    h_vals = np.zeros_like(grad_vals)
    failed = 0
    if np.any(active):
        field = curvature_field(volumetric, query, pts[active])
        failed = field.n_failures
        filled = field.values.copy()
        filled[~field.ok] = 0.0
        h_vals[active] = filled
    h_sq = np.einsum("ki,ki->k", h_vals, h_vals)
    curvature_term = float(np.sum(per_node * phi_vals * h_sq))
    transport_term = float(
        np.sum(per_node * np.einsum("ki,ki->k", grad_vals, h_vals))
    )
    return mass_phi, curvature_term, transport_term, failed


def brakke_residual(trajectory, edge, pair, epsilon, phi,
                    time_rule="simpson", subdivisions=2, gamma=None,
                    enforce_gamma=True, tau=1e-14, ledger=None,
                    threads=None):
    """Residual of the weak flow identity along a discretized trajectory.

    Each snapshot sample is binned on a fixed mesh of the given cell edge;
    the regularized mean curvature of the resulting cell varifold is
    integrated against the test function with the chosen time rule. When
    ``gamma`` is given, the mesh hypothesis 2 h <= gamma * eps is checked:
    violations raise :class:`GammaHypothesisError` if ``enforce_gamma``,
    otherwise they are recorded on the report. Passing a constants ledger
    attaches the main and standalone residual bounds.
    """
    lo, hi = trajectory.bounding_box()
    mesh = Mesh(lo, hi, edge)
    query = CurvatureQuery(pair, epsilon, tau=tau)
    hypothesis = None
    if gamma is not None:
        hypothesis = bool(2.0 * mesh.h <= gamma * epsilon)
        if enforce_gamma and not hypothesis:
            raise GammaHypothesisError(
                f"2h = {2.0 * mesh.h:.6g} exceeds gamma * eps = "
                f"{gamma * epsilon:.6g}; refine the mesh or raise eps"
            )
    weights = _time_weights(trajectory.times, time_rule)

    def one(i):
        vol = discretize(
            trajectory.sample(i), mesh, subdivisions=subdivisions
        )
        return _snapshot_terms(vol, query, phi)

    count = _thread_count(threads)
    indices = range(len(trajectory.times))
    if count > 1:
        with ThreadPoolExecutor(max_workers=count) as pool:
            results = list(pool.map(one, indices))
    else:
        results = [one(i) for i in indices]
    mass_phi, curvature_terms, transport_terms, failures = zip(*results)

    bounds = {}
    if ledger is not None:
        rate = epsilon + mesh.h / epsilon**3
        span = float(trajectory.times[-1] - trajectory.times[0])
        mass_drop = float(trajectory.masses[0] - trajectory.masses[-1])
        distance_cap = mesh.h * float(trajectory.masses[0])
        bounds["main_bound"] = (
            2.0 * phi.lip * distance_cap
            + phi.sup_value
            * ledger.curvature_consistency_constant * epsilon * mass_drop
            + phi.c2_norm * ledger.combined_rate_coeff * span * rate
        )
        bounds["weak_bound"] = phi.c2_norm * ledger.weak_bound_coeff * rate

    return ResidualReport(
        trajectory.times, mass_phi, curvature_terms, transport_terms,
        weights, time_rule, epsilon=epsilon, h=mesh.h, edge=edge,
        gamma=gamma, hypothesis_satisfied=hypothesis,
        failed_nodes=sum(failures), bounds=bounds,
    )


def exact_flow_residual(trajectory, phi, time_rule="simpson"):
    """Residual control: exact curvature on the sampled measure, no mesh.

    Isolates the time-quadrature error of the identity; for an exact
    shrinker this is the only error source, so the value shrinks at the
    order of the chosen rule.
    """
    weights = _time_weights(trajectory.times, time_rule)
    mass_phi = []
    curvature_terms = []
    transport_terms = []
    for i in range(len(trajectory.times)):
        sample = trajectory.sample(i)
        shape = trajectory.shape(i)
        w = sample.weights
        pts = sample.positions
        phi_vals = phi(pts)
        grad_vals = phi.gradient(pts)
        h_vals = shape.mean_curvature(pts)
        mass_phi.append(float(np.sum(w * phi_vals)))
        curvature_terms.append(
            float(np.sum(w * phi_vals * np.einsum("ki,ki->k", h_vals, h_vals)))
        )
        transport_terms.append(
            float(np.sum(w * np.einsum("ki,ki->k", grad_vals, h_vals)))
        )
    return ResidualReport(
        trajectory.times, mass_phi, curvature_terms, transport_terms,
        weights, time_rule,
    )
