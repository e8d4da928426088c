import numpy as np
import pytest

from willflow.errors import DegenerateImmersionError
from willflow.geometry import (
    Immersion,
    balance_residual,
    build_geometry,
    chart_hopf,
    chart_metric_consistency,
    dlm_distance,
    energies,
    hopf_residual,
    sampled_hausdorff,
    scale_translate,
    standard_embedding,
)
from willflow.sphere_spectral import eval_coeffs_at_points, get_grid


def test_sphere_curvatures(sphere):
    assert np.allclose(sphere.H, 1.0, atol=1e-12), "The unit sphere has H = 1."
    assert np.allclose(sphere.K, 1.0, atol=1e-12), "The unit sphere has K = 1."
    assert np.allclose(sphere.normal, sphere.grid.position, atol=1e-12), "The normal points outwards."
    assert np.allclose(sphere.lam, 0.0, atol=1e-12), "The standard embedding is isometric."
    assert np.allclose(sphere.mean_curvature_vector(), -sphere.normal, atol=1e-12), "Hvec = -H N."


def test_sphere_energies(sphere):
    report = energies(sphere)
    assert abs(report.W0) < 1e-12, "The round sphere has no trace-free curvature."
    assert np.isclose(report.W1, 4 * np.pi), "int H^2 = 4 pi on the unit sphere."
    assert np.isclose(report.W2, 2 * np.pi), "W2 = (W0 + W1) / 2."
    assert np.isclose(report.area, 4 * np.pi), "Area of the unit sphere."
    assert np.isclose(report.gauss_bonnet, 4 * np.pi), "Gauss-Bonnet."
    assert np.isclose(report.euler_char, 2.0), "The sphere has Euler characteristic 2."
    assert report.hopf_l2 < 1e-12, "The standard embedding is conformal."
    assert report.dlm_distance < 1e-12, "The sphere is at distance zero from itself."


def test_sphere_laplacian(sphere):
    lap = sphere.laplace_beltrami(sphere.phi)
    assert np.allclose(lap, -2 * sphere.phi, atol=1e-11), "Laplace I = -2 I on the sphere."


def test_sphere_normal_derivative(sphere):
    N_t, N_p = sphere.normal_derivative()
    assert np.allclose(N_t, sphere.grid.e_theta, atol=1e-12), "dN = dI on the unit sphere."
    assert np.allclose(N_p, sphere.grid.e_phi, atol=1e-12), "dN = dI on the unit sphere."


def test_sphere_is_balanced(sphere):
    assert np.linalg.norm(balance_residual(sphere)) < 1e-12, "The sphere is well-balanced."
    assert np.max(np.abs(chart_hopf(sphere, "north"))) < 1e-12, "g_zz vanishes for a conformal map."


def test_scale_translate(sphere):
    im = scale_translate(sphere, 2.0, (0.5, -1.0, 0.25))
    assert np.isclose(im.area(), 16 * np.pi), "Scaling by 2 multiplies the area by 4."
    assert np.allclose(im.H, 0.5, atol=1e-12), "Scaling by 2 halves H."
    assert np.allclose(im.barycenter(), [0.5, -1.0, 0.25], atol=1e-12), "The translation moves the barycenter."
    assert abs(energies(im).W0) < 1e-12, "W0 is scale invariant."


def test_rebuild_is_bit_exact(bumped):
    again = build_geometry(bumped.coeffs)
    assert np.array_equal(again.phi, bumped.phi), "Rebuilding from coefficients reproduces the immersion."
    fields = build_geometry(bumped.phi_fields)
    assert np.allclose(fields.phi, bumped.phi, atol=1e-14), "Building from fields gives the same immersion."


def test_euler_identity_on_bump(bumped):
    report = energies(bumped)
    assert 0 < report.W0 < 0.1, "A small bump has a small positive energy."
    assert abs(report.euler_char - 2.0) < 1e-6, "Euler characteristic from W1 - W0."
    assert abs(report.gauss_bonnet - 4 * np.pi) < 1e-6, "Gauss-Bonnet."
    assert abs(report.W2 - 0.5 * (report.W0 + report.W1)) < 1e-8, "|A|^2 = |A0|^2 + 2 H^2."
    assert report.hopf_l2 > 1e-4, "A normal graph is not conformal."


def test_resolution_independence(bumped):
    coarse = energies(bumped)
    fine = energies(bumped.on_grid(get_grid(32)))
    assert np.isclose(coarse.W0, fine.W0, rtol=1e-8), "W0 should be resolved at L = 24."
    assert np.isclose(coarse.area, fine.area, rtol=1e-12), "Area should be resolved at L = 24."


def test_degenerate_immersion():
    grid = get_grid(8)
    flat = grid.position.copy()
    flat[2] = 0.0
    with pytest.raises(DegenerateImmersionError) as err:
        Immersion.from_values(grid, flat)
    assert err.value.exit_code == 6, "Degeneracy is a numerical failure."


def test_dlm_distance_ignores_translation(sphere):
    moved = scale_translate(sphere, 1.0, (1.0, 2.0, 3.0))
    assert dlm_distance(moved) < 1e-12, "Translations are not measured."
    assert dlm_distance(scale_translate(sphere, 1.1)) > 0.1, "Scaling is measured."


def test_sampled_hausdorff(sphere):
    bigger = scale_translate(sphere, 1.1)
    assert np.isclose(sampled_hausdorff(sphere, bigger, L_sample=16), 0.1, atol=1e-10), "Concentric spheres are 0.1 apart."
    assert sampled_hausdorff(sphere, sphere, L_sample=16) < 1e-12, "A surface is at distance zero from itself."


def test_hopf_of_stretched_sphere():
    grid = get_grid(8)
    stretched = Immersion.from_values(grid, grid.position * np.array([1.0, 1.0, 1.3])[:, None, None])
    assert hopf_residual(stretched) > 1e-2, "An ellipsoid of revolution is not conformally parametrized."
    assert hopf_residual(standard_embedding(grid)) < 1e-12, "The sphere is."


def test_hausdorff_of_shifted_sphere(sphere):
    shifted = scale_translate(sphere, 1.0, (0.05, 0.0, 0.0))
    distance = sampled_hausdorff(sphere, shifted, L_sample=20)
    assert np.isclose(distance, 0.05, atol=1e-9), "Unit spheres 0.05 apart have Hausdorff distance 0.05."


def test_curvatures_against_finite_differences(bumped):
    grid = bumped.grid
    mask = grid.sin_theta[:, None] * np.ones(grid.shape) > 0.3
    theta, phi = grid.theta2d[mask], grid.phi2d[mask]
    h = 1e-3

    def at(dt, dp):
        pts = np.stack([theta + dt * h, phi + dp * h], axis=-1)
        return eval_coeffs_at_points(bumped.coeffs, pts).real

    center = at(0, 0)
    x_t = (at(1, 0) - at(-1, 0)) / (2 * h)
    x_p = (at(0, 1) - at(0, -1)) / (2 * h)
    x_tt = (at(1, 0) - 2 * center + at(-1, 0)) / h ** 2
    x_pp = (at(0, 1) - 2 * center + at(0, -1)) / h ** 2
    x_tp = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * h ** 2)
    cross = np.cross(x_t, x_p, axis=0)
    normal = cross / np.linalg.norm(cross, axis=0)
    E, F, G = np.sum(x_t * x_t, axis=0), np.sum(x_t * x_p, axis=0), np.sum(x_p * x_p, axis=0)
    l_, m_, n_ = (-np.sum(normal * x, axis=0) for x in (x_tt, x_tp, x_pp))
    det = E * G - F ** 2
    H = (E * n_ - 2 * F * m_ + G * l_) / (2 * det)
    K = (l_ * n_ - m_ ** 2) / det
    assert np.allclose(H, bumped.H[mask], atol=1e-5), "H matches the coordinate formula."
    assert np.allclose(K, bumped.K[mask], atol=1e-5), "K matches the coordinate formula."


def test_trace_free_curvature_identities(bumped):
    half = 0.5 * bumped.A0_norm2
    assert np.allclose(half, bumped.H ** 2 - bumped.K, atol=1e-8), "|A0|^2 / 2 = H^2 - K."
    assert np.allclose(half, 0.25 * bumped.A_norm2 - 0.5 * bumped.K, atol=1e-8), "|A0|^2 / 2 = |A|^2 / 4 - K / 2."


def test_scaling_covariance(bumped):
    big = scale_translate(bumped, 2.0)
    small, large = energies(bumped), energies(big)
    for name in ["W0", "W1", "W2"]:
        assert np.isclose(getattr(large, name), getattr(small, name), rtol=1e-10), "{} is scale invariant.".format(name)
    assert np.isclose(large.area, 4 * small.area, rtol=1e-12), "Scaling by 2 multiplies the area by 4."
    assert np.allclose(big.lam, bumped.lam + np.log(2.0), atol=1e-12), "lam shifts by log 2."
    assert np.allclose(big.H, bumped.H / 2, atol=1e-12), "H scales like length^-1."
    assert np.allclose(big.K, bumped.K / 4, atol=1e-12), "K scales like length^-2."


def test_chart_metric_consistency(bumped):
    assert chart_metric_consistency(bumped) < 1e-12, "g_ww = z^4 g_zz on the overlap band."
    atlas = bumped.grid.chart_atlas
    band = atlas.overlap
    north = chart_hopf(bumped, "north")[band]
    south = chart_hopf(bumped, "south")[band]
    assert np.allclose(south, atlas.north[band] ** 4 * north, atol=1e-12), "The chart Hopf differentials transform as quadratic differentials."
