import numpy as np
import pytest

from willflow.errors import GaugeError
from willflow.geometry import Immersion, energies
from willflow.sphere_spectral import get_grid, real_harmonic
from willflow.willmore import (
    dissipation_rate,
    form_discrepancy,
    noether_residuals,
    tangency_residual,
    weak_pairing,
    willmore_divergence_form,
    willmore_operator,
)


def test_sphere_is_critical(sphere):
    wf = willmore_operator(sphere)
    assert np.max(np.abs(wf.dW)) < 1e-10, "The round sphere is a critical point."
    assert np.max(np.abs(wf.w_theta)) < 1e-10, "w vanishes on the round sphere."
    assert dissipation_rate(sphere, wf) < 1e-20, "Nothing to dissipate on the sphere."
    assert tangency_residual(sphere, wf) < 1e-10, "w is normal to the sphere."


def test_non_conformal_is_refused(bumped):
    with pytest.raises(GaugeError):
        willmore_operator(bumped)
    with pytest.raises(GaugeError):
        willmore_divergence_form(bumped)


def test_gradient_is_normal(bumped):
    wf = willmore_operator(bumped, require_conformal=False, dealias=False)
    tangential = np.sum(wf.dW * bumped.d_theta, axis=0)
    assert np.max(np.abs(tangential)) < 1e-12, "dW is a normal field."
    assert np.allclose(wf.dW, wf.dW_sc * bumped.normal), "dW = dW_sc N."


def test_divergence_form_agrees(bumped):
    wf = willmore_operator(bumped, require_conformal=False)
    assert form_discrepancy(bumped, wf) < 1e-5, "div w should match the scalar formula."
    assert tangency_residual(bumped, wf) < 1e-7, "w pairs to zero with dPhi."


def test_noether_residuals(bumped):
    wf = willmore_operator(bumped, require_conformal=False)
    residuals = noether_residuals(bumped, wf)
    assert residuals.shape == (4,), "Translation, rotation, dilation and inversion."
    assert np.all(residuals < 1e-6), "Conservation laws should hold to quadrature accuracy: {}".format(residuals)


def test_dealiased_operator(bumped):
    plain = willmore_operator(bumped, require_conformal=False, dealias=False)
    dealiased = willmore_operator(bumped, require_conformal=False, dealias=True)
    assert np.allclose(plain.dW, dealiased.dW, atol=1e-8), "Padding should not change a resolved gradient."


def test_first_variation(bumped):
    grid = bumped.grid
    y = real_harmonic(grid, 2, 2).values
    direction = grid.analysis(y * grid.position, 0)
    h = 1e-4
    plus = energies(Immersion(grid, bumped.coeffs + h * direction)).W0
    minus = energies(Immersion(grid, bumped.coeffs - h * direction)).W0
    numeric = (plus - minus) / (2 * h)

    test_values = grid.synthesis(direction, 0).real
    wf = willmore_operator(bumped, require_conformal=False)
    strong = float(bumped.integrate(np.sum(wf.dW * test_values, axis=0)))
    weak = weak_pairing(bumped, test_values)
    assert abs(numeric) > 1e-3, "The bump should not be critical in its own direction."
    assert np.isclose(strong, numeric, rtol=1e-5), "dW should be the L2 gradient of W0."
    assert np.isclose(weak, numeric, rtol=1e-5), "The weak pairing should match the first variation."


def test_scaling_covariance():
    grid = get_grid(16)
    y = real_harmonic(grid, 3, 1).values
    im = Immersion.from_values(grid, grid.position * (1 + 0.03 * y))
    big = Immersion(grid, 2.0 * im.coeffs)
    wf, wf_big = (willmore_operator(x, require_conformal=False) for x in (im, big))
    assert np.allclose(wf_big.dW, wf.dW / 8.0, atol=1e-10), "dW scales like length^-3."
