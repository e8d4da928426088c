"""Hodge potentials of the Willmore flux and the second-order system they satisfy.

On a conformal immersion the Hodge star of one-forms is rotation by 90 degrees
in the round frame, ``(*a)_theta = -a_phi`` and ``(*a)_phi = a_theta``, and
every one-form on the sphere splits as ``d(potential) + *d(co-potential)``.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from willflow.log import logger
from willflow.errors import ConsistencyError
from willflow.geometry import Immersion, frame_gradient
from willflow.sphere_spectral import Grid
from willflow.willmore import WillmoreFields, check_conformal

# relative bound on |int dW dsigma_g| for the first Poisson problem
SOLVABILITY_TOLERANCE = 1e-6


@dataclass
class HodgePotentials:
    """Mean-zero potentials; vector-valued ones have shape (3, nlat, nlon).

    ``d scrL + *dL = w``, ``d scrR + *dR = -dPhi x Hvec - (*dPhi) x L`` and
    ``d scrS + *dS = -<*dPhi, L>``.
    """

    scrL: np.ndarray
    L: np.ndarray
    scrR: np.ndarray
    R: np.ndarray
    scrS: np.ndarray
    S: np.ndarray
    residuals: Dict[str, float] = field(default_factory=dict)


def _inverse_laplacian(grid: Grid) -> np.ndarray:
    l = grid.degrees[:, None].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(l > 0, -1.0 / (l * (l + 1)), 0.0)


def _split(grid: Grid, form: Tuple[np.ndarray, np.ndarray]):
    """Exact and co-exact potentials of a (vector-valued) one-form."""
    u = grid.analysis(form[0] + 1j * form[1], 1)
    l = grid.degrees[:, None].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(l > 0, -1.0 / np.sqrt(l * (l + 1)), 0.0)
    potentials = grid.synthesis(u * inv, 0)
    return potentials.real, potentials.imag


def differential(grid: Grid, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    grad = frame_gradient(grid, grid.analysis(values, 0))
    return grad.real, grad.imag


def star(form):
    return -form[1], form[0]


def _add(a, b):
    return a[0] + b[0], a[1] + b[1]


def _diff(a, b):
    return a[0] - b[0], a[1] - b[1]


def _l2(im: Immersion, values: np.ndarray) -> float:
    if values.ndim == 3:
        values = np.sum(values ** 2, axis=0)
    else:
        values = values ** 2
    return float(np.sqrt(im.integrate(values)))


def _form_l2(im: Immersion, form) -> float:
    return float(np.sqrt(max(im.integrate(im.form_inner(form, form)), 0.0)))


def cross_contract(im: Immersion, a, b) -> np.ndarray:
    """``g^{ab} alpha_a x beta_b`` for vector-valued forms."""
    gi_tt, gi_tp, gi_pp = im.g_inv
    c = lambda x, y: np.cross(x, y, axis=0)
    return (
        gi_tt * c(a[0], b[0])
        + gi_tp * (c(a[0], b[1]) + c(a[1], b[0]))
        + gi_pp * c(a[1], b[1])
    )


def scalar_contract(im: Immersion, a, q) -> np.ndarray:
    """``g^{ab} alpha_a q_b`` for a vector-valued and a scalar form."""
    gi_tt, gi_tp, gi_pp = im.g_inv
    return (
        gi_tt * a[0] * q[0]
        + gi_tp * (a[0] * q[1] + a[1] * q[0])
        + gi_pp * a[1] * q[1]
    )


def solve_potentials(
    im: Immersion, wf: WillmoreFields, solvability_tol: float = SOLVABILITY_TOLERANCE
) -> HodgePotentials:
    """Solves the chain of Poisson problems for the six Hodge potentials.

    Raises:
        ConsistencyError: if ``int dW dsigma_g`` is not small against
            ``1 + int |dW| dsigma_g``.
        GaugeError: if ``im`` is not conformal.
    """
    check_conformal(im)
    grid = im.grid
    r1 = np.linalg.norm(im.integrate(wf.dW))
    scale = 1.0 + float(im.integrate(np.linalg.norm(wf.dW, axis=0)))
    if r1 > solvability_tol * scale:
        logger.error("Willmore gradient integrates to {:.3e}.".format(r1))
        raise ConsistencyError(
            "Source of the first Poisson problem integrates to {:.3e} (bound {:.1e}).".format(
                r1, solvability_tol * scale
            )
        )
    e2l = np.exp(2 * im.lam)
    source = grid.analysis(e2l * wf.dW, 0)
    scrL = grid.synthesis(source * _inverse_laplacian(grid), 0).real
    _, L = _split(grid, wf.w_form)

    Hvec = im.mean_curvature_vector()
    dPhi = (im.d_theta, im.d_phi)
    star_dPhi = star(dPhi)
    cross = lambda x, y: np.cross(x, y, axis=0)
    rho = (
        -cross(dPhi[0], Hvec) - cross(star_dPhi[0], L),
        -cross(dPhi[1], Hvec) - cross(star_dPhi[1], L),
    )
    scrR, R = _split(grid, rho)
    sigma = (
        -np.sum(star_dPhi[0] * L, axis=0),
        -np.sum(star_dPhi[1] * L, axis=0),
    )
    scrS, S = _split(grid, sigma)

    mean_source = np.exp(-2 * im.lam) * (im.integrate(wf.dW) / (4 * np.pi))[:, None, None]
    residuals = {
        "poisson_scrL": _l2(im, im.laplace_beltrami(scrL) - (wf.dW - mean_source))
        / (1.0 + _l2(im, wf.dW)),
        "reconstruction_w": _form_l2(
            im, _diff(_add(differential(grid, scrL), star(differential(grid, L))), wf.w_form)
        )
        / (1.0 + _form_l2(im, wf.w_form)),
        "reconstruction_rho": _form_l2(
            im, _diff(_add(differential(grid, scrR), star(differential(grid, R))), rho)
        )
        / (1.0 + _form_l2(im, rho)),
        "reconstruction_sigma": _form_l2(
            im, _diff(_add(differential(grid, scrS), star(differential(grid, S))), sigma)
        )
        / (1.0 + _form_l2(im, sigma)),
    }
    logger.debug(
        "Hodge potential residuals: {}".format(
            ", ".join("{} {:.2e}".format(k, v) for k, v in residuals.items())
        )
    )
    return HodgePotentials(scrL=scrL, L=L, scrR=scrR, R=R, scrS=scrS, S=S, residuals=residuals)


def system_residuals(im: Immersion, wf: WillmoreFields, hp: HodgePotentials) -> np.ndarray:
    """L2 norms of the three second-order identities linking Phi, R and S.

    ``Laplace_g Phi = dPhi x. (d scrR + *dR) + <dPhi, d scrS + *dS>``,
    ``Laplace_g R = dN x. (d scrR + *dR) - <dN, d scrS + *dS> + (*dPhi) x. d scrL``,
    ``Laplace_g S = <dN, d scrR + *dR> + <*dPhi, d scrL>``, where the dot
    contracts the form indices with the induced metric.
    """
    grid = im.grid
    P = _add(differential(grid, hp.scrR), star(differential(grid, hp.R)))
    Q = _add(differential(grid, hp.scrS), star(differential(grid, hp.S)))
    dL = differential(grid, hp.scrL)
    dPhi = (im.d_theta, im.d_phi)
    dN = im.normal_derivative()
    star_dPhi = star(dPhi)

    first = im.laplace_beltrami(im.phi) - cross_contract(im, dPhi, P) - scalar_contract(im, dPhi, Q)
    second = (
        im.laplace_beltrami(hp.R)
        - cross_contract(im, dN, P)
        + scalar_contract(im, dN, Q)
        - cross_contract(im, star_dPhi, dL)
    )
    third = (
        im.laplace_beltrami(hp.S)
        - im.form_inner(dN, P)
        - im.form_inner(star_dPhi, dL)
    )
    return np.array([_l2(im, first), _l2(im, second), _l2(im, third)])


def orthogonality(im: Immersion, hp: HodgePotentials) -> np.ndarray:
    """L2 pairings ``<d potential, *d co-potential>`` of the three splits."""
    grid = im.grid
    pairs = [(hp.scrL, hp.L), (hp.scrR, hp.R), (hp.scrS, hp.S)]
    out = []
    for a, b in pairs:
        da = differential(grid, a)
        sb = star(differential(grid, b))
        out.append(abs(float(im.integrate(im.form_inner(da, sb)))))
    return np.array(out)


def mean_curvature_consistency(im: Immersion) -> float:
    """``|| Laplace_g Phi - 2 Hvec ||`` in L2."""
    return _l2(im, im.laplace_beltrami(im.phi) - 2 * im.mean_curvature_vector())
