import numpy as np
import pytest

from willflow.errors import ConfigurationError
from willflow.sphere_spectral import (
    ScalarField,
    SpinField,
    analyze,
    chart_derivative,
    chart_overlap_residual,
    curl,
    divergence,
    eth,
    eth_bar,
    eth_bar_kernel_dimension,
    eval_at_points,
    eval_coeffs_at_points,
    get_grid,
    grad_frame,
    harmonic,
    hodge_split,
    integrate,
    laplace_s2,
    poisson_solve,
    real_harmonic,
    resize_coeffs,
    synthesize,
    w22_norm,
)


def random_real_field(grid, seed=0, lmin=0):
    rng = np.random.default_rng(seed)
    coeffs = grid.analysis(rng.standard_normal(grid.shape), 0)
    coeffs[:lmin] = 0.0
    return ScalarField(grid, coeffs=coeffs)


def test_constant_coefficient():
    grid = get_grid(8)
    coeffs = grid.analysis(np.ones(grid.shape), 0)
    assert np.isclose(coeffs[0, 8], np.sqrt(4 * np.pi)), "a_00 of the constant 1 should be sqrt(4 pi)."
    coeffs[0, 8] = 0.0
    assert np.max(np.abs(coeffs)) < 1e-13, "The constant has no other modes."


def test_analyze_synthesize_pair():
    grid = get_grid(10)
    f = random_real_field(grid, seed=3)
    g = synthesize(analyze(f))
    assert g.grid.L_max == 10, "The grid is inferred from the table."
    assert np.allclose(g.values, f.values, atol=1e-12), "synthesize inverts analyze on band-limited fields."


def test_grid_layout():
    grid = get_grid(10)
    assert grid.shape == (11, 22), "Grid should have L+1 rings and 2L+2 meridians."
    assert np.all(np.diff(grid.theta) > 0), "Rings should run from north to south."
    assert np.isclose(grid.weights.sum(), 4 * np.pi), "Quadrature weights should sum to 4 pi."


def test_transform_is_a_projection():
    grid = get_grid(12)
    f = random_real_field(grid)
    again = grid.analysis(grid.synthesis(f.coeffs, 0).real, 0)
    assert np.allclose(again, f.coeffs, atol=1e-12), "Analysis should invert synthesis."


@pytest.mark.parametrize("spin", [-2, -1, 1, 2])
def test_spin_transform_roundtrip(spin):
    grid = get_grid(10)
    rng = np.random.default_rng(abs(spin))
    l = grid.degrees[:, None]
    m = np.arange(-10, 11)[None, :]
    mask = (l >= abs(spin)) & (np.abs(m) <= l)
    coeffs = (rng.standard_normal(grid.coeff_shape) + 1j * rng.standard_normal(grid.coeff_shape)) * mask
    values = grid.synthesis(coeffs, spin)
    assert np.allclose(grid.analysis(values, spin), coeffs, atol=1e-11), "Spin {} transform should be lossless.".format(spin)


def test_unsupported_spin():
    grid = get_grid(4)
    with pytest.raises(ConfigurationError):
        SpinField(grid, 3, values=np.zeros(grid.shape))


def test_mismatched_coefficients():
    with pytest.raises(ConfigurationError):
        ScalarField(get_grid(6), coeffs=np.zeros((5, 9)))


def test_grad_frame_of_height():
    grid = get_grid(8)
    f = ScalarField(grid, values=np.cos(grid.theta2d))
    u = grad_frame(f).values
    assert np.allclose(u.real, -np.sin(grid.theta2d), atol=1e-12), "d_theta cos(theta) = -sin(theta)."
    assert np.allclose(u.imag, 0.0, atol=1e-12), "cos(theta) does not depend on phi."


def test_grad_frame_of_longitude_mode():
    grid = get_grid(8)
    st, ct, cp, sp = np.sin(grid.theta2d), np.cos(grid.theta2d), np.cos(grid.phi2d), np.sin(grid.phi2d)
    u = grad_frame(ScalarField(grid, values=st * cp)).values
    assert np.allclose(u.real, ct * cp, atol=1e-12), "d_theta y1 = cos(theta) cos(phi)."
    assert np.allclose(u.imag, -sp, atol=1e-12), "(1/sin theta) d_phi y1 = -sin(phi)."


def test_eth_bar_kernel():
    grid = get_grid(8)
    assert eth_bar_kernel_dimension(grid) == 6, "The conformal Killing fields span six real dimensions."
    killing = SpinField(grid, 1, values=1j * np.sin(grid.theta2d))
    assert np.max(np.abs(eth_bar(killing).coeffs)) < 1e-12, "Rotation about the z axis is a Killing field."


def test_eth_eth_bar_is_laplacian():
    grid = get_grid(10)
    f = random_real_field(grid, seed=3)
    lap = eth(eth_bar(f))
    assert np.allclose(lap.coeffs, laplace_s2(f).coeffs, atol=1e-11), "eth eth_bar should be the Laplacian on scalars."


def test_adjointness():
    grid = get_grid(10)
    f = grad_frame(random_real_field(grid, seed=1)) + grad_frame(random_real_field(grid, seed=2)) * 1j
    h = eth_bar(grad_frame(random_real_field(grid, seed=3)))
    lhs = np.sum(eth_bar(f).coeffs * np.conj(h.coeffs))
    rhs = -np.sum(f.coeffs * np.conj(eth(h).coeffs))
    assert np.isclose(lhs, rhs, atol=1e-10), "eth should be minus the adjoint of eth_bar."


def test_laplacian_eigenvalue():
    grid = get_grid(8)
    y = real_harmonic(grid, 3, -2)
    assert np.allclose(laplace_s2(y).values, -12 * y.values, atol=1e-12), "Y_3m has eigenvalue -12."


def test_poisson_solve():
    grid = get_grid(10)
    f = random_real_field(grid, seed=4) + 2.5
    u = poisson_solve(f)
    mean = integrate(f) / (4 * np.pi)
    assert np.allclose(laplace_s2(u).values, f.values - mean, atol=1e-11), "Poisson solution should reproduce the source."
    assert abs(integrate(u)) < 1e-12, "Poisson solution should have mean zero."


def test_hodge_split():
    grid = get_grid(10)
    a = random_real_field(grid, seed=5, lmin=1)
    b = random_real_field(grid, seed=6, lmin=1)
    u = grad_frame(a) + grad_frame(b) * 1j
    a2, b2 = hodge_split(u)
    assert np.allclose(a2.values, a.values, atol=1e-11), "Exact potential should be recovered."
    assert np.allclose(b2.values, b.values, atol=1e-11), "Co-exact potential should be recovered."


def test_divergence_and_curl():
    grid = get_grid(10)
    f = random_real_field(grid, seed=7)
    u = grad_frame(f)
    assert np.allclose(divergence(u).values, laplace_s2(f).values, atol=1e-10), "div grad is the Laplacian."
    assert np.allclose(curl(u).values, 0.0, atol=1e-10), "Gradients are curl free."


def test_integrals():
    grid = get_grid(8)
    ct = np.cos(grid.theta2d)
    assert np.isclose(integrate(ScalarField(grid, values=ct ** 2)), 4 * np.pi / 3), "int y3^2 = 4 pi / 3."


def test_point_evaluation_at_poles():
    grid = get_grid(8)
    y10 = real_harmonic(grid, 1, 0)
    values = eval_at_points(y10, [[0.0, 0.0], [np.pi, 1.0]])
    c = np.sqrt(3 / (4 * np.pi))
    assert np.allclose(values, [c, -c], atol=1e-13), "Y_10 at the poles is +-sqrt(3 / 4 pi)."


CHART_STENCIL_H = 2e-3


def _chart_stencil():
    """Offsets ``h r e^{i alpha}`` and the pseudo-inverse of the cubic Taylor basis in z and conj(z)."""
    radii = np.array([1.0, 2.0])[:, None]
    alphas = 2 * np.pi * np.arange(8)[None, :] / 8
    d = (CHART_STENCIL_H * radii * np.exp(1j * alphas)).ravel()
    dc = np.conj(d)
    basis = np.stack([d, dc, d ** 2, d * dc, dc ** 2, d ** 3, d ** 2 * dc, d * dc ** 2, dc ** 3], axis=-1)
    return d, np.linalg.pinv(basis)


def test_eth_against_chart_differences():
    grid = get_grid(12)
    L = grid.L_max
    coeffs = np.zeros(grid.coeff_shape, dtype=complex)
    coeffs[3, 2 + L] = 1.0
    f = SpinField(grid, 0, coeffs=coeffs)
    exact_bar = eth_bar(f).values
    exact = eth(f).values

    def at(z):
        pts = np.stack([2 * np.arctan(1 / np.abs(z)), np.angle(z)], axis=-1)
        return eval_coeffs_at_points(coeffs, pts)

    offsets, pinv = _chart_stencil()
    atlas = grid.chart_atlas
    nodes = np.argwhere(atlas.overlap)[::7]
    scale = np.max(np.abs(exact_bar))
    for i, j in nodes:
        z0 = atlas.north[i, j]
        taylor = pinv @ (at(z0 + offsets) - at(np.array([z0])))
        rho = 2 / (1 + abs(z0) ** 2)
        phase = np.exp(1j * grid.phi[j])
        assert abs(2 / rho * phase * taylor[0] - exact_bar[i, j]) < 1e-6 * scale, "eth_bar matches (2 / rho) e^(i phi) df/dz at node {}.".format((i, j))
        assert abs(2 / rho / phase * taylor[1] - exact[i, j]) < 1e-6 * scale, "eth matches (2 / rho) e^(-i phi) df/dzbar at node {}.".format((i, j))

    up = grid.integrate(exact_bar * np.conj(harmonic(grid, 3, 2, 1)))
    down = grid.integrate(exact * np.conj(harmonic(grid, 3, 2, -1)))
    assert np.isclose(up, np.sqrt(12), rtol=1e-10), "eth_bar Y_32 = sqrt(12) Y^1_32."
    assert np.isclose(down, -np.sqrt(12), rtol=1e-10), "eth Y_32 = -sqrt(12) Y^-1_32."


def test_chart_overlap_residual():
    grid = get_grid(10)
    f = random_real_field(grid, seed=5)
    assert chart_overlap_residual(f) < 1e-12, "d/dw = -z^2 d/dz on the overlap band."
    z = grid.chart_atlas.north[grid.chart_atlas.overlap]
    assert np.all(np.abs(z) >= np.tan(np.pi / 6) - 1e-12) and np.all(np.abs(z) <= 1 / np.tan(np.pi / 6) + 1e-12), "The band is pi/3 <= theta <= 2 pi/3."


def test_chart_derivative():
    grid = get_grid(10)
    f = ScalarField(grid, values=np.cos(grid.theta2d))
    z = grid.chart_atlas.north
    expected = 2 * np.conj(z) / (1 + np.abs(z) ** 2) ** 2
    assert np.allclose(chart_derivative(f, "north"), expected, atol=1e-11), "d/dz of y3 in the north chart."
    w = grid.chart_atlas.south
    expected = -2 * np.conj(w) / (1 + np.abs(w) ** 2) ** 2
    assert np.allclose(chart_derivative(f, "south"), expected, atol=1e-11), "d/dw of y3 in the south chart."


def test_resize_and_norm():
    grid = get_grid(6)
    f = random_real_field(grid, seed=8)
    up = resize_coeffs(f.coeffs, 9)
    assert np.array_equal(resize_coeffs(up, 6), f.coeffs), "Padding then truncating is lossless."
    assert np.isclose(w22_norm(up), w22_norm(f.coeffs)), "Padding does not change the norm."
