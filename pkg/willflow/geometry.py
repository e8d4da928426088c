"""Induced geometry of an immersed sphere.

All first and second derivatives of the immersion are taken spectrally in the
round orthonormal frame ``(e_theta, e_phi)``, so for a band-limited immersion
the metric, normal and second fundamental form are exact at the nodes. The
normal ``N = Phi_theta x Phi_phi / |.|`` is outward for the standard embedding
and ``A(X, Y) = <dN(X), dPhi(Y)>``, so the unit sphere has ``H = K = 1``.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from scipy.spatial import cKDTree

from willflow.log import logger
from willflow.errors import DegenerateImmersionError
from willflow.sphere_spectral import (
    Grid,
    ScalarField,
    SpinField,
    chart_derivative,
    eval_coeffs_at_points,
    get_grid,
    lowering_eigenvalues,
    points_to_angles,
    raising_eigenvalues,
    resize_coeffs,
    w22_norm,
)

# rank test on |Phi_theta x Phi_phi|
DEGENERACY_THRESHOLD = 1e-10


def frame_gradient(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Spin-1 gradient ``f_theta + i f_phi / sin(theta)`` from spin-0 coefficients."""
    return grid.synthesis(-coeffs * raising_eigenvalues(grid, 0), 1)


def frame_hessian(grid: Grid, coeffs: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Covariant round Hessian ``(f_tt, f_tp, f_pp)`` in the orthonormal frame."""
    ev0 = raising_eigenvalues(grid, 0)
    mm = grid.synthesis(coeffs * ev0 * raising_eigenvalues(grid, 1), 2)
    l = grid.degrees[:, None].astype(float)
    lap = grid.synthesis(coeffs * (-l * (l + 1)), 0).real
    return (lap + mm.real) / 2.0, mm.imag / 2.0, (lap - mm.real) / 2.0


def round_divergence(grid: Grid, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Round divergence of the tangent field ``X e_theta + Y e_phi``."""
    u = grid.analysis(X + 1j * Y, 1)
    return (-grid.synthesis(u * lowering_eigenvalues(grid, 1), 0)).real


class Immersion:
    """Immersion ``Phi: S^2 -> R^3`` together with its induced geometry.

    Build instances with :func:`build_geometry`; every geometric quantity is
    computed once at construction and the object is treated as immutable.

    Attributes:
        grid (Grid): Collocation grid.
        coeffs (numpy.ndarray): Coefficients of the three components, (3, L+1, 2L+1).
        phi (numpy.ndarray): Node values of Phi, (3, nlat, nlon).
        d_theta, d_phi (numpy.ndarray): Frame derivatives of Phi.
        E, F, G (numpy.ndarray): Pullback metric in the round orthonormal frame.
        normal (numpy.ndarray): Gauss map N.
        A (tuple): Second fundamental form components ``(A_tt, A_tp, A_pp)``.
        H, K (numpy.ndarray): Scalar mean and Gauss curvature.
        lam (numpy.ndarray): Log conformal factor, ``exp(2 lam) = (E + G) / 2``.
        hopf (numpy.ndarray): Spin-2 Hopf differential ``(E - G + 2iF) / 4``.
        h0 (numpy.ndarray): Spin-2 field ``(A_tt - A_pp + 2i A_tp) / 4``.
    """

    def __init__(self, grid: Grid, coeffs: np.ndarray):
        self.grid = grid
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.phi = grid.synthesis(self.coeffs, 0).real

        grad = frame_gradient(grid, self.coeffs)
        self.d_theta = grad.real
        self.d_phi = grad.imag
        hess = frame_hessian(grid, self.coeffs)

        self.E = np.sum(self.d_theta ** 2, axis=0)
        self.F = np.sum(self.d_theta * self.d_phi, axis=0)
        self.G = np.sum(self.d_phi ** 2, axis=0)
        cross = np.cross(self.d_theta, self.d_phi, axis=0)
        norm = np.linalg.norm(cross, axis=0)
        if norm.min() <= DEGENERACY_THRESHOLD or (self.E + self.G).min() <= 0:
            node = np.unravel_index(np.argmin(norm), grid.shape)
            logger.error("Immersion is degenerate at node {}.".format(node))
            raise DegenerateImmersionError("dPhi has rank < 2", node=node)
        self.sqrt_det = norm
        self.det = norm ** 2
        self.normal = cross / norm

        self.A = tuple(-np.sum(self.normal * h, axis=0) for h in hess)
        A_tt, A_tp, A_pp = self.A
        self.g_inv = (self.G / self.det, -self.F / self.det, self.E / self.det)
        gi_tt, gi_tp, gi_pp = self.g_inv
        # shape operator S = G^{-1} A
        S_tt = gi_tt * A_tt + gi_tp * A_tp
        S_tp = gi_tt * A_tp + gi_tp * A_pp
        S_pt = gi_tp * A_tt + gi_pp * A_tp
        S_pp = gi_tp * A_tp + gi_pp * A_pp
        self.H = 0.5 * (S_tt + S_pp)
        self.K = (A_tt * A_pp - A_tp ** 2) / self.det
        self.A_norm2 = S_tt ** 2 + 2 * S_tp * S_pt + S_pp ** 2
        self.A0_norm2 = self.A_norm2 - 2 * self.H ** 2
        self.lam = 0.5 * np.log(0.5 * (self.E + self.G))
        self.hopf = 0.25 * (self.E - self.G + 2j * self.F)
        self.h0 = 0.25 * (A_tt - A_pp + 2j * A_tp)
        self.area_element = self.sqrt_det * grid.weights

    def __repr__(self):
        return "Immersion(L_max={:d}, area={:.6f}, hopf={:.3e})".format(
            self.grid.L_max, self.area(), hopf_residual(self)
        )

    @classmethod
    def from_values(cls, grid: Grid, values: np.ndarray) -> "Immersion":
        return cls(grid, grid.analysis(np.asarray(values, dtype=float), 0))

    @property
    def L_max(self) -> int:
        return self.grid.L_max

    @property
    def phi_fields(self) -> Tuple[ScalarField, ...]:
        return tuple(ScalarField(self.grid, coeffs=c) for c in self.coeffs)

    @property
    def lambda_field(self) -> ScalarField:
        return ScalarField(self.grid, values=self.lam)

    @property
    def forms(self) -> "FundamentalForms":
        A_tt, A_tp, A_pp = self.A
        return FundamentalForms(
            A=self.A,
            A0=(A_tt - self.H * self.E, A_tp - self.H * self.F, A_pp - self.H * self.G),
            h0=SpinField(self.grid, 2, values=self.h0),
            H_sc=ScalarField(self.grid, values=self.H),
            K=ScalarField(self.grid, values=self.K),
            hopf=SpinField(self.grid, 2, values=self.hopf),
        )

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integral against the induced area element."""
        return np.sum(values * self.area_element, axis=(-2, -1))

    def area(self) -> float:
        return float(np.sum(self.area_element))

    def barycenter(self) -> np.ndarray:
        return self.integrate(self.phi) / self.area()

    def mean_curvature_vector(self) -> np.ndarray:
        """``(1/2) Laplace_g Phi = -H N``."""
        return -self.H * self.normal

    def on_grid(self, grid: Grid) -> "Immersion":
        """Same band-limited immersion sampled on another grid."""
        return Immersion(grid, resize_coeffs(self.coeffs, grid.L_max))

    def laplace_beltrami(self, values: np.ndarray) -> np.ndarray:
        """``Laplace_g f = (1/sqrt det) div(sqrt det G^{-1} grad f)`` for any metric."""
        coeffs = self.grid.analysis(values, 0)
        grad = frame_gradient(self.grid, coeffs)
        return self.one_form_divergence(grad.real, grad.imag)

    def one_form_divergence(self, w_theta: np.ndarray, w_phi: np.ndarray) -> np.ndarray:
        """Metric divergence of a (possibly vector-valued) one-form.

        The form is given by its values on ``e_theta`` and ``e_phi`` with shape
        (..., nlat, nlon).
        """
        gi_tt, gi_tp, gi_pp = self.g_inv
        X = self.sqrt_det * (gi_tt * w_theta + gi_tp * w_phi)
        Y = self.sqrt_det * (gi_tp * w_theta + gi_pp * w_phi)
        return round_divergence(self.grid, X, Y) / self.sqrt_det

    def form_inner(self, a: Tuple[np.ndarray, np.ndarray], b: Tuple[np.ndarray, np.ndarray]):
        """Pointwise ``g^{ab} <alpha_a, beta_b>`` summing a leading vector axis if present."""
        gi_tt, gi_tp, gi_pp = self.g_inv
        dot = lambda x, y: np.sum(x * y, axis=0) if x.ndim == 3 else x * y
        return (
            gi_tt * dot(a[0], b[0])
            + gi_tp * (dot(a[0], b[1]) + dot(a[1], b[0]))
            + gi_pp * dot(a[1], b[1])
        )

    def normal_derivative(self) -> Tuple[np.ndarray, np.ndarray]:
        """Frame derivatives ``(N_theta, N_phi)``, written as ``dPhi(G^{-1} A)``."""
        A_tt, A_tp, A_pp = self.A
        gi_tt, gi_tp, gi_pp = self.g_inv
        N_t = (A_tt * gi_tt + A_tp * gi_tp) * self.d_theta + (
            A_tt * gi_tp + A_tp * gi_pp
        ) * self.d_phi
        N_p = (A_tp * gi_tt + A_pp * gi_tp) * self.d_theta + (
            A_tp * gi_tp + A_pp * gi_pp
        ) * self.d_phi
        return N_t, N_p

    def tangent_vector(self, u: np.ndarray) -> np.ndarray:
        """``dPhi(U)`` for the tangent field with spin-1 values ``u``."""
        return u.real * self.d_theta + u.imag * self.d_phi


@dataclass
class FundamentalForms:
    A: tuple
    A0: tuple
    h0: SpinField
    H_sc: ScalarField
    K: ScalarField
    hopf: SpinField


@dataclass
class EnergyReport:
    W0: float
    W1: float
    W2: float
    area: float
    barycenter: np.ndarray
    gauss_bonnet: float
    euler_char: float
    hopf_l2: float
    dlm_distance: float

    def __repr__(self):
        return (
            "EnergyReport(W0={:.6e}, W1={:.6f}, W2={:.6f}, area={:.6f}, "
            "euler_char={:.8f}, hopf={:.3e}, dlm={:.3e})"
        ).format(
            self.W0,
            self.W1,
            self.W2,
            self.area,
            self.euler_char,
            self.hopf_l2,
            self.dlm_distance,
        )


def build_geometry(
    phi: Union[Sequence[ScalarField], np.ndarray], grid: Grid = None
) -> Immersion:
    """Builds an :class:`Immersion` from its three components.

    Args:
        phi: Three :class:`ScalarField` objects, or an array of node values
            with shape (3, nlat, nlon), or coefficients (3, L+1, 2L+1).
        grid (Grid): Needed only if ``phi`` is a raw array of values.

    Returns:
        Immersion: The immersion with its geometry populated. The coefficients
        are canonical, so rebuilding from ``im.coeffs`` reproduces it bit by bit.

    Raises:
        DegenerateImmersionError: if dPhi drops rank at a node.
    """
    if isinstance(phi, np.ndarray):
        if grid is None:
            grid = get_grid(phi.shape[-2] - 1)
        if phi.shape[-2:] == grid.coeff_shape:
            return Immersion(grid, phi)
        return Immersion.from_values(grid, phi)
    fields = list(phi)
    assert len(fields) == 3, "An immersion needs three components."
    grid = fields[0].grid
    return Immersion(grid, np.stack([f.coeffs for f in fields]))


def standard_embedding(grid: Grid) -> Immersion:
    return Immersion.from_values(grid, grid.position)


def scale_translate(im: Immersion, a: float = 1.0, k: Sequence[float] = (0, 0, 0)) -> Immersion:
    """``a Phi + k`` with the constant added to the degree-0 mode."""
    coeffs = a * im.coeffs
    coeffs[:, 0, im.L_max] += np.asarray(k, dtype=float) * np.sqrt(4 * np.pi)
    return Immersion(im.grid, coeffs)


def hopf_residual(im: Immersion) -> float:
    """Round L2 norm of the Hopf differential; zero iff ``im`` is conformal."""
    return float(np.sqrt(im.grid.integrate(np.abs(im.hopf) ** 2)))


def chart_hopf(im: Immersion, chart: str = "north") -> np.ndarray:
    """``g_zz`` (north) or ``g_ww`` (south) at the nodes."""
    atlas = im.grid.chart_atlas
    if chart == "north":
        rho = 2.0 / (1.0 + np.abs(atlas.north) ** 2)
        return rho ** 2 * np.exp(-2j * im.grid.phi2d) * im.hopf
    rho = 2.0 / (1.0 + np.abs(atlas.south) ** 2)
    return rho ** 2 * np.exp(2j * im.grid.phi2d) * im.hopf


def balance_residual(im: Immersion) -> np.ndarray:
    """``(int I dsigma_g, int Phi x I dsigma)``, zero iff ``im`` is well-balanced."""
    I = im.grid.position
    first = im.integrate(I)
    second = im.grid.integrate(np.cross(im.phi, I, axis=0))
    return np.concatenate([first, second])


def dlm_distance(im: Immersion) -> float:
    """``||Phi - I - c||_{W^{2,2}} + ||exp(lam) - 1||_inf`` with c the degree-0 mode."""
    diff = im.coeffs - im.grid.analysis(im.grid.position, 0)
    diff[:, 0, :] = 0.0
    return w22_norm(diff) + float(np.max(np.abs(np.exp(im.lam) - 1.0)))


def energies(im: Immersion) -> EnergyReport:
    """Willmore energies and the companion monitors of an immersion."""
    W0 = 0.5 * float(im.integrate(im.A0_norm2))
    W1 = float(im.integrate(im.H ** 2))
    W2 = 0.25 * float(im.integrate(im.A_norm2))
    report = EnergyReport(
        W0=W0,
        W1=W1,
        W2=W2,
        area=im.area(),
        barycenter=im.barycenter(),
        gauss_bonnet=float(im.integrate(im.K)),
        euler_char=(W1 - W0) / (2 * np.pi),
        hopf_l2=hopf_residual(im),
        dlm_distance=dlm_distance(im),
    )
    logger.debug(repr(report))
    return report


def surface_samples(im: Immersion, L_sample: int) -> Tuple[np.ndarray, np.ndarray]:
    """Points of the image surface on a finer grid and their parameters on S^2."""
    fine_grid = get_grid(L_sample)
    points = im.on_grid(fine_grid).phi.reshape(3, -1).T
    params = fine_grid.position.reshape(3, -1).T
    return points, params


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def project_to_surface(
    points: np.ndarray, im: Immersion, start: np.ndarray, iterations: int = 4, h: float = 1e-6
) -> np.ndarray:
    """Feet of ``points`` on the image of ``im`` by Gauss-Newton in the parameter.

    Args:
        points (numpy.ndarray): (n, 3) points in space.
        im (Immersion): Target surface, evaluated through its expansion.
        start (numpy.ndarray): (n, 3) unit vectors, the initial parameters.

    Returns:
        numpy.ndarray: (n, 3) points on the surface.
    """

    def at(y):
        return eval_coeffs_at_points(im.coeffs, points_to_angles(y)).real.T

    y = _unit(np.asarray(start, dtype=float))
    for _ in range(iterations):
        axis = np.where(np.abs(y[:, 2:3]) > 0.9, [[1.0, 0.0, 0.0]], [[0.0, 0.0, 1.0]])
        e1 = _unit(np.cross(axis, y))
        e2 = np.cross(y, e1)
        J = np.stack(
            [(at(_unit(y + h * e)) - at(_unit(y - h * e))) / (2 * h) for e in (e1, e2)],
            axis=-1,
        )
        r = points - at(y)
        JtJ = np.einsum("nki,nkj->nij", J, J)
        Jtr = np.einsum("nki,nk->ni", J, r)
        s = np.linalg.solve(JtJ, Jtr[..., None])[..., 0]
        y = _unit(y + s[:, :1] * e1 + s[:, 1:] * e2)
    return at(y)


def sampled_hausdorff(a: Immersion, b: Immersion, L_sample: int = 64) -> float:
    """Symmetric Hausdorff distance between two image surfaces.

    Every sample of one surface is matched to its nearest sample on the other
    through a k-d tree and then projected onto the other surface with
    :func:`project_to_surface`. The larger of the two one-sided maxima of the
    point-to-surface distances is returned.
    """

    def one_sided(p, q, params, target):
        nearest, idx = cKDTree(q).query(p)
        feet = project_to_surface(p, target, params[idx])
        return np.max(np.minimum(nearest, np.linalg.norm(p - feet, axis=1)))

    pa, ya = surface_samples(a, L_sample)
    pb, yb = surface_samples(b, L_sample)
    return float(max(one_sided(pa, pb, yb, b), one_sided(pb, pa, ya, a)))


def chart_metric_consistency(im: Immersion) -> float:
    """Mismatch of ``g_ww`` and ``z^4 g_zz`` on the chart overlap band.

    Both are formed from the chart derivatives of the coordinates of ``Phi``
    and the mismatch is relative to the largest ``|Phi_w|^2`` in the band.
    """
    grid = im.grid
    atlas = grid.chart_atlas
    band = atlas.overlap
    parts = [ScalarField(grid, coeffs=im.coeffs[k]) for k in range(3)]
    dz = np.stack([chart_derivative(f, "north") for f in parts])
    dw = np.stack([chart_derivative(f, "south") for f in parts])
    g_zz = np.sum(dz ** 2, axis=0)[band]
    g_ww = np.sum(dw ** 2, axis=0)[band]
    scale = float(np.max(np.sum(np.abs(dw) ** 2, axis=0)[band]))
    return float(np.max(np.abs(g_ww - atlas.north[band] ** 4 * g_zz)) / scale)
