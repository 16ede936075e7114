"""Shape geometry: projectors, curvature oracles, quadrature sampling."""

import numpy as np
import pytest
from scipy.special import ellipe

from varmcf.geometry import (
    Circle,
    Ellipse,
    Plane,
    Sphere,
    Torus,
    exact_mean_curvature,
    make_shape,
    projector_distance,
    sample_surface,
)


def test_plane_invariants_enforced():
    with pytest.raises(ValueError, match="symmetric"):
        Plane(np.array([[1.0, 1e-6], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="idempotent"):
        Plane(np.array([[0.5, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="trace"):
        Plane(np.eye(2), dim=1)


def test_plane_from_basis_orthonormalizes():
    # Non-orthonormal basis of the xy-plane in R^3.
    basis = np.array([[2.0, 0.0, 0.0], [1.0, 3.0, 0.0]])
    p = Plane.from_basis(basis)
    expected = np.diag([1.0, 1.0, 0.0])
    assert np.max(np.abs(p.projector - expected)) < 1e-12
    assert p.dim == 2


def test_projector_distance_examples():
    x_axis = Plane.from_basis([[1.0, 0.0]])
    y_axis = Plane.from_basis([[0.0, 1.0]])
    diag = Plane.from_basis([[1.0, 1.0]])
    assert abs(projector_distance(x_axis, y_axis) - np.sqrt(2)) < 1e-14
    assert abs(projector_distance(x_axis, diag) - 1.0) < 1e-14
    assert projector_distance(x_axis, x_axis) == 0.0


def test_projector_distance_dimension_mismatch():
    line = Plane.from_basis([[1.0, 0.0]])
    plane3 = Plane.from_basis([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    with pytest.raises(ValueError, match="mismatch"):
        projector_distance(line, plane3)


def test_circle_mean_curvature_value():
    circle = Circle(radius=1.0)
    h = exact_mean_curvature(circle, np.array([1.0, 0.0]))
    assert np.max(np.abs(h - np.array([-1.0, 0.0]))) < 1e-12


@pytest.mark.parametrize("radius", [0.5, 1.0, 2.0])
def test_sphere_mean_curvature_magnitude(radius):
    sphere = Sphere(radius=radius)
    sample = sphere.sample(16)
    h = sphere.mean_curvature(sample.positions)
    mags = np.linalg.norm(h, axis=1)
    assert np.max(np.abs(mags - 2.0 / radius)) / (2.0 / radius) < 1e-12
    # Points toward the center.
    rel = sample.positions - sphere.center
    assert np.all(np.sum(h * rel, axis=1) < 0)


def test_off_shape_point_rejected():
    circle = Circle(radius=1.0)
    with pytest.raises(ValueError, match="not on the shape"):
        circle.mean_curvature(np.array([1.0 + 1e-6, 0.0]))
    ellipse = Ellipse(1.5, 1.0)
    with pytest.raises(ValueError, match="not on the shape"):
        ellipse.tangent_projector(np.array([1.6, 0.0]))


def test_resolution_floor():
    with pytest.raises(ValueError, match="at least 8"):
        Circle().sample(4)


def test_circle_sample_total_measure_exact():
    circle = Circle(radius=1.3, center=(0.2, -0.4))
    for res in (8, 64, 512):
        s = circle.sample(res)
        assert abs(s.total_weight() - circle.total_measure()) < 1e-12


def test_sphere_sample_total_measure():
    sphere = Sphere(radius=1.0)
    s = sphere.sample(128)
    rel = abs(s.total_weight() - 4.0 * np.pi) / (4.0 * np.pi)
    assert rel < 1e-6


def test_torus_sample_total_measure():
    torus = Torus(2.0, 0.5)
    s = torus.sample(64)
    exact = 4.0 * np.pi**2 * 2.0 * 0.5
    assert abs(s.total_weight() - exact) / exact < 1e-12


def test_ellipse_total_measure_matches_quadrature():
    ellipse = Ellipse(1.5, 1.0)
    exact = ellipse.total_measure()
    assert abs(exact - 4.0 * 1.5 * ellipe(1.0 - (1.0 / 1.5) ** 2)) < 1e-14
    errs = []
    for res in (8, 16, 32, 64):
        errs.append(abs(ellipse.sample(res).total_weight() - exact))
    floor = 1e-13 * exact
    for coarse, fine in zip(errs, errs[1:]):
        if coarse < floor:
            break
        assert fine <= coarse / 2.0


@pytest.mark.parametrize(
    "shape",
    [Circle(1.0), Ellipse(1.5, 1.0), Sphere(1.0), Torus(2.0, 0.5)],
    ids=["circle", "ellipse", "sphere", "torus"],
)
def test_sample_projector_invariants(shape):
    s = shape.sample(16)
    p = s.projectors
    assert np.max(np.abs(p - np.swapaxes(p, 1, 2))) < 1e-12
    assert np.max(np.abs(np.einsum("kij,kjl->kil", p, p) - p)) < 1e-10
    traces = np.einsum("kii->k", p)
    assert np.max(np.abs(traces - shape.d)) < 1e-10


def test_circle_tangent_projector_analytic():
    circle = Circle(1.0)
    theta = 0.7
    y = np.array([np.cos(theta), np.sin(theta)])
    t = np.array([-np.sin(theta), np.cos(theta)])
    p = circle.tangent_projector(y)
    assert np.max(np.abs(p - np.outer(t, t))) < 1e-12


def test_torus_tangent_kills_normal():
    torus = Torus(2.0, 0.5)
    s = torus.sample(12)
    h = torus.mean_curvature(s.positions)
    # H is normal, so tangent projectors must annihilate it.
    proj_h = np.einsum("kij,kj->ki", s.projectors, h)
    assert np.max(np.abs(proj_h)) < 1e-10


def test_max_principal_curvature():
    ellipse = Ellipse(1.5, 1.0)
    k_end = ellipse.max_principal_curvature(np.array([1.5, 0.0]))
    assert abs(k_end - 1.5 / 1.0**2) < 1e-12
    assert abs(ellipse.global_max_principal_curvature() - 1.5) < 1e-12
    torus = Torus(2.0, 0.5)
    assert abs(torus.global_max_principal_curvature() - 2.0) < 1e-12
    tight = Torus(1.0, 0.6)
    assert abs(tight.global_max_principal_curvature() - 1.0 / 0.4) < 1e-12


def test_make_shape_dispatch():
    c = make_shape("circle", radius=2.0)
    assert isinstance(c, Circle) and c.radius == 2.0
    with pytest.raises(ValueError, match="unknown shape"):
        make_shape("helicoid")


# The area-variation oracle. The first variation of area under a velocity
# field X equals -int H . X over a closed shape, so a centered difference of
# the deformed area must match the curvature quadrature.

def _field(points):
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    return np.stack([np.sin(y), np.cos(z), np.sin(x)], axis=-1)


def _field_jacobian(points):
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    j = np.zeros(points.shape[:-1] + (3, 3))
    j[..., 0, 1] = np.cos(y)
    j[..., 1, 2] = -np.sin(z)
    j[..., 2, 0] = np.cos(x)
    return j


def _torus_area_deformed(torus, t, res=256):
    theta = 2.0 * np.pi * np.arange(res) / res
    psi = 2.0 * np.pi * np.arange(res) / res
    tg, pg = np.meshgrid(theta, psi, indexing="ij")
    R, a = torus.major_radius, torus.minor_radius
    ring = R + a * np.cos(pg)
    pos = np.stack(
        [ring * np.cos(tg), ring * np.sin(tg), a * np.sin(pg)], axis=-1
    )
    d_theta = np.stack(
        [-ring * np.sin(tg), ring * np.cos(tg), np.zeros_like(tg)], axis=-1
    )
    d_psi = np.stack(
        [-a * np.sin(pg) * np.cos(tg), -a * np.sin(pg) * np.sin(tg),
         a * np.cos(pg)],
        axis=-1,
    )
    jac = _field_jacobian(pos)
    f_theta = d_theta + t * np.einsum("...ij,...j->...i", jac, d_theta)
    f_psi = d_psi + t * np.einsum("...ij,...j->...i", jac, d_psi)
    cross = np.cross(f_theta, f_psi)
    element = np.linalg.norm(cross, axis=-1)
    return element.sum() * (2.0 * np.pi / res) ** 2


def test_torus_curvature_matches_area_variation():
    torus = Torus(2.0, 0.5)
    t0 = 1e-4
    fd = (_torus_area_deformed(torus, t0) - _torus_area_deformed(torus, -t0))
    fd /= 2.0 * t0
    s = torus.sample(256)
    h = torus.mean_curvature(s.positions)
    rhs = -np.sum(s.weights * np.sum(h * _field(s.positions), axis=1))
    assert abs(fd - rhs) < 1e-6


def test_torus_outer_equator_curvature_value():
    # At the outer equator both principal curvatures bend inward.
    torus = Torus(2.0, 0.5)
    y = np.array([2.5, 0.0, 0.0])
    h = torus.mean_curvature(y)
    expected = -(1.0 / 0.5 + 1.0 / 2.5) * np.array([1.0, 0.0, 0.0])
    assert np.max(np.abs(h - expected)) < 1e-12


def _circle_length_deformed(circle, t, res=512):
    theta = 2.0 * np.pi * np.arange(res) / res
    r = circle.radius
    pos3 = np.stack(
        [r * np.cos(theta), r * np.sin(theta), np.zeros(res)], axis=-1
    )
    d_theta = np.stack(
        [-r * np.sin(theta), r * np.cos(theta), np.zeros(res)], axis=-1
    )
    jac = _field_jacobian(pos3)[:, :2, :2]
    f_theta = d_theta[:, :2] + t * np.einsum(
        "kij,kj->ki", jac, d_theta[:, :2]
    )
    return np.linalg.norm(f_theta, axis=1).sum() * (2.0 * np.pi / res)


def test_circle_curvature_matches_length_variation():
    circle = Circle(1.0)
    t0 = 1e-4
    fd = (_circle_length_deformed(circle, t0)
          - _circle_length_deformed(circle, -t0)) / (2.0 * t0)
    s = circle.sample(512)
    h = circle.mean_curvature(s.positions)
    field2 = _field(np.concatenate(
        [s.positions, np.zeros((len(s), 1))], axis=1
    ))[:, :2]
    rhs = -np.sum(s.weights * np.sum(h * field2, axis=1))
    assert abs(fd - rhs) < 1e-6
