"""Willmore operator, its divergence form and the Noether residuals.

With the normal of :mod:`willflow.geometry` the L2 gradient of the Willmore
energy is ``dW = -(Laplace_g H + 2 H (H^2 - K)) N`` and ``dW = div_g w`` with
``w = -dH N + H dN - H^2 dPhi``.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from willflow.log import logger
from willflow.errors import GaugeError
from willflow.geometry import Immersion, frame_gradient, hopf_residual
from willflow.sphere_spectral import Grid, ScalarField, padded_grid, resize_coeffs

# hopf_residual above which conformal-gauge formulas are refused
CONFORMAL_TOLERANCE = 1e-4


@dataclass
class WillmoreFields:
    """Willmore gradient and its flux form for one immersion.

    Attributes:
        dW (numpy.ndarray): Normal-valued gradient, (3, nlat, nlon).
        dW_sc (numpy.ndarray): ``<dW, N>``.
        w_theta, w_phi (numpy.ndarray): The vector-valued one-form ``w`` on the
            frame vectors, (3, nlat, nlon) each.
        q_term (numpy.ndarray): ``|A0|^2 H``.
    """

    dW: np.ndarray
    dW_sc: np.ndarray
    w_theta: np.ndarray
    w_phi: np.ndarray
    q_term: np.ndarray

    @property
    def w_form(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.w_theta, self.w_phi

    def dW_fields(self, grid: Grid) -> Tuple[ScalarField, ...]:
        return tuple(ScalarField(grid, values=v) for v in self.dW)


def _restrict(values: np.ndarray, fine: Grid, coarse: Grid) -> np.ndarray:
    coeffs = resize_coeffs(fine.analysis(values, 0), coarse.L_max)
    return coarse.synthesis(coeffs, 0).real


def check_conformal(im: Immersion, tol: float = CONFORMAL_TOLERANCE):
    residual = hopf_residual(im)
    if residual > tol:
        logger.error("Hopf residual {:.3e} exceeds {:.1e}.".format(residual, tol))
        raise GaugeError(
            "Immersion is not conformal (hopf residual {:.3e} > {:.1e}).".format(
                residual, tol
            )
        )


def willmore_operator(
    im: Immersion,
    require_conformal: bool = True,
    conformal_tol: float = CONFORMAL_TOLERANCE,
    dealias: bool = True,
) -> WillmoreFields:
    """Willmore gradient from the scalar codimension-one formula.

    The Laplace-Beltrami operator of the induced metric is used, so the
    formula is valid for any parametrization; the conformality check only
    guards the conformal-gauge callers.

    Args:
        im (Immersion): Immersion with geometry built.
        require_conformal (bool): Raise if ``im`` is not conformal.
        conformal_tol (float): Bound on the Hopf residual.
        dealias (bool): Evaluate the nonlinear terms on the padded grid.

    Returns:
        WillmoreFields: The gradient and the flux form.

    Raises:
        GaugeError: if ``require_conformal`` and the Hopf residual is too large.
    """
    if require_conformal:
        check_conformal(im, conformal_tol)
    if dealias:
        fine = padded_grid(im.grid)
        wf = willmore_operator(im.on_grid(fine), require_conformal=False, dealias=False)
        restrict = lambda v: _restrict(v, fine, im.grid)
        return WillmoreFields(
            dW=restrict(wf.dW),
            dW_sc=restrict(wf.dW_sc),
            w_theta=restrict(wf.w_theta),
            w_phi=restrict(wf.w_phi),
            q_term=restrict(wf.q_term),
        )

    H, K = im.H, im.K
    lap_H = im.laplace_beltrami(H)
    dW_sc = -(lap_H + 2 * H * (H ** 2 - K))
    dW = dW_sc * im.normal

    grad_H = frame_gradient(im.grid, im.grid.analysis(H, 0))
    N_t, N_p = im.normal_derivative()
    w_theta = -grad_H.real * im.normal + H * N_t - H ** 2 * im.d_theta
    w_phi = -grad_H.imag * im.normal + H * N_p - H ** 2 * im.d_phi
    return WillmoreFields(
        dW=dW, dW_sc=dW_sc, w_theta=w_theta, w_phi=w_phi, q_term=im.A0_norm2 * H
    )


def willmore_divergence_form(
    im: Immersion, wf: WillmoreFields = None, require_conformal: bool = True
) -> np.ndarray:
    """``div_g w`` for cross-validation of :func:`willmore_operator`.

    Returns:
        numpy.ndarray: The three components, (3, nlat, nlon).
    """
    if wf is None:
        wf = willmore_operator(im, require_conformal=require_conformal)
    elif require_conformal:
        check_conformal(im)
    return im.one_form_divergence(wf.w_theta, wf.w_phi)


def _as_values(testfn: Union[Sequence[ScalarField], np.ndarray]) -> np.ndarray:
    if isinstance(testfn, np.ndarray):
        return testfn
    return np.stack([f.values for f in testfn])


def weak_pairing(im: Immersion, testfn) -> float:
    """Distributional Willmore pairing with a vector-valued test function.

    ``int <Hvec, Laplace_g phi> - <2 H dN - H^2 dPhi, dphi>_g dsigma_g``; for
    smooth immersions this equals ``int <dW, phi> dsigma_g``.
    """
    phi = _as_values(testfn)
    lap = im.laplace_beltrami(phi)
    first = im.integrate(np.sum(im.mean_curvature_vector() * lap, axis=0))
    grad = frame_gradient(im.grid, im.grid.analysis(phi, 0))
    N_t, N_p = im.normal_derivative()
    H = im.H
    alpha = (2 * H * N_t - H ** 2 * im.d_theta, 2 * H * N_p - H ** 2 * im.d_phi)
    second = im.integrate(im.form_inner(alpha, (grad.real, grad.imag)))
    return float(first - second)


def noether_residuals(im: Immersion, wf: WillmoreFields) -> np.ndarray:
    """Norms of the translation, rotation, dilation and inversion integrals.

    Each integrand is a divergence on the closed surface, so all four vanish
    up to discretization error.
    """
    dW, Phi = wf.dW, im.phi
    phi_dot_dW = np.sum(Phi * dW, axis=0)
    r1 = np.linalg.norm(im.integrate(dW))
    r2 = np.linalg.norm(im.integrate(np.cross(Phi, dW, axis=0)))
    r3 = abs(float(im.integrate(phi_dot_dW)))
    inversion = (
        np.cross(Phi, np.cross(Phi, dW, axis=0), axis=0)
        + Phi * phi_dot_dW
        + 4 * im.mean_curvature_vector()
    )
    r4 = np.linalg.norm(im.integrate(inversion))
    residuals = np.array([r1, r2, r3, r4])
    logger.debug(
        "Noether residuals: {}".format(", ".join("{:.3e}".format(r) for r in residuals))
    )
    return residuals


def tangency_residual(im: Immersion, wf: WillmoreFields) -> float:
    """``max |<w, dPhi>_g|`` relative to the size of the ``H^2 dPhi`` term of ``w``."""
    pairing = im.form_inner(wf.w_form, (im.d_theta, im.d_phi))
    scale = max(
        np.max(np.linalg.norm(wf.w_theta, axis=0)),
        np.max(np.linalg.norm(wf.w_phi, axis=0)),
        np.max(im.H ** 2 * np.sqrt(im.E + im.G)),
        1e-300,
    )
    return float(np.max(np.abs(pairing)) / scale)


def form_discrepancy(im: Immersion, wf: WillmoreFields) -> float:
    """Relative L2 gap between the scalar and the divergence form."""
    div = willmore_divergence_form(im, wf, require_conformal=False)
    gap = np.sqrt(im.integrate(np.sum((div - wf.dW) ** 2, axis=0)))
    norm = np.sqrt(im.integrate(np.sum(wf.dW ** 2, axis=0)))
    return float(gap / (1.0 + norm))


def dissipation_rate(im: Immersion, wf: WillmoreFields) -> float:
    """``int |dW|^2 dsigma_g``."""
    return float(im.integrate(np.sum(wf.dW ** 2, axis=0)))
