"""Conformal gauge on the sphere.

Mobius maps act on the sphere through unit spinors: the point with colatitude
theta and longitude phi is ``(cos(theta/2) e^{i phi}, sin(theta/2))``, whose
ratio is the north-chart coordinate ``z``. A matrix ``[[a, b], [c, d]]`` with
unit determinant therefore acts by ``z -> (a z + b) / (c z + d)``.
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from scipy.linalg import expm, solve

from willflow.log import logger
from willflow.errors import (
    AdmissibilityError,
    ChartError,
    ConformalizationError,
    GaugeConvergenceError,
    ResolutionError,
)
from willflow.geometry import (
    EnergyReport,
    Immersion,
    balance_residual,
    dlm_distance,
    energies,
    frame_gradient,
    hopf_residual,
    sampled_hausdorff,
    scale_translate,
)
from willflow.sphere_spectral import (
    Grid,
    SpinField,
    angles_to_points,
    eval_coeffs_at_points,
    get_grid,
    points_to_angles,
    raising_eigenvalues,
    resize_coeffs,
)
from willflow.willmore import CONFORMAL_TOLERANCE, WillmoreFields, check_conformal

# squared L2 norm of every Killing field
KILLING_NORM2 = 8 * np.pi / 3

# sl(2, C) generators of the rotations Z1..Z3 and dilations Z4..Z6
GENERATORS = np.array(
    [
        [[0, 0.5j], [0.5j, 0]],
        [[0, -0.5], [0.5, 0]],
        [[0.5j, 0], [0, -0.5j]],
        [[0, 0.5], [0.5, 0]],
        [[0, 0.5j], [-0.5j, 0]],
        [[0.5, 0], [0, -0.5]],
    ],
    dtype=complex,
)

# Jacobian of the balance functional at the standard embedding: dilations
# drive the first block, rotations the second
SEED_JACOBIAN = -KILLING_NORM2 * np.block(
    [[np.zeros((3, 3)), np.eye(3)], [np.eye(3), np.zeros((3, 3))]]
)


def _spinors(angles: np.ndarray) -> np.ndarray:
    half = angles[:, 0] / 2.0
    return np.stack([np.cos(half) * np.exp(1j * angles[:, 1]), np.sin(half) + 0j])


def _hopf_map(spinors: np.ndarray) -> np.ndarray:
    z1, z2 = spinors
    n = np.abs(z1) ** 2 + np.abs(z2) ** 2
    prod = z1 * np.conj(z2)
    return np.stack(
        [2 * prod.real / n, 2 * prod.imag / n, (np.abs(z1) ** 2 - np.abs(z2) ** 2) / n],
        axis=-1,
    )


@dataclass
class MobiusMap:
    """Element of Aut(S^2) as a unit-determinant 2x2 complex matrix."""

    m: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    params: np.ndarray = field(default_factory=lambda: np.zeros(6))
    newton_iterations: int = 0

    def __repr__(self):
        return "MobiusMap(params=[{}])".format(
            ", ".join("{:.3e}".format(s) for s in self.params)
        )

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls()

    def compose(self, other: "MobiusMap") -> "MobiusMap":
        """``self o other``: apply ``other`` first."""
        return MobiusMap(m=self.m @ other.m, params=np.full(6, np.nan))

    def inverse(self) -> "MobiusMap":
        a, b = self.m[0]
        c, d = self.m[1]
        return MobiusMap(m=np.array([[d, -b], [-c, a]]), params=-self.params)

    def apply_angles(self, angles: np.ndarray) -> np.ndarray:
        return points_to_angles(self.apply(angles_to_points(angles)))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Images of (n, 3) points on the unit sphere."""
        spinors = _spinors(points_to_angles(points))
        return _hopf_map(self.m @ spinors)

    def conformal_factor(self, points: np.ndarray) -> np.ndarray:
        """Linear scale factor ``|d psi|`` of the map at (n, 3) points."""
        spinors = _spinors(points_to_angles(points))
        image = self.m @ spinors
        return np.sum(np.abs(spinors) ** 2, axis=0) / np.sum(np.abs(image) ** 2, axis=0)


def mobius_exp(s, chart_radius: float = 1.0) -> MobiusMap:
    """Exponential of ``sum_a s_a X_a`` in the spinor representation.

    Raises:
        ChartError: if ``|s|`` exceeds the chart radius.
    """
    s = np.asarray(s, dtype=float)
    if np.linalg.norm(s) > chart_radius:
        logger.error("Mobius parameter {} leaves the chart ball.".format(s))
        raise ChartError(
            "|s| = {:.3f} exceeds the chart radius {:.3f}.".format(
                np.linalg.norm(s), chart_radius
            )
        )
    return MobiusMap(m=expm(np.tensordot(s, GENERATORS, axes=1)), params=s.copy())


@dataclass
class KillingBasis:
    """Conformal Killing fields Z1..Z6 of the round sphere.

    Attributes:
        immersed (numpy.ndarray): ``dI(Z_a)`` sampled on the grid, (6, 3, nlat, nlon).
        spin (numpy.ndarray): Spin-1 representations, (6, nlat, nlon).
    """

    grid: Grid
    immersed: np.ndarray
    spin: np.ndarray

    def fields(self) -> Tuple[SpinField, ...]:
        return tuple(SpinField(self.grid, 1, values=u) for u in self.spin)

    def project(self, u: np.ndarray) -> np.ndarray:
        """Coefficients of the L2 projection of a spin-1 field onto span(Z_a)."""
        pairings = self.grid.integrate((u[None] * np.conj(self.spin)).real)
        return pairings / KILLING_NORM2


def killing_fields(grid: Grid) -> KillingBasis:
    y = grid.position
    fields = []
    for a in range(3):
        e = np.zeros((3, 1, 1))
        e[a] = 1.0
        fields.append(np.cross(np.broadcast_to(e, y.shape), y, axis=0))
    for a in range(3):
        e = np.zeros((3, 1, 1))
        e[a] = 1.0
        fields.append(e - y[a] * y)
    immersed = np.stack(fields)
    spin = np.sum(immersed * grid.e_theta, axis=1) + 1j * np.sum(
        immersed * grid.e_phi, axis=1
    )
    return KillingBasis(grid=grid, immersed=immersed, spin=spin)


@dataclass
class TangentialVelocity:
    """Tangential velocity U of a flow step.

    Attributes:
        U (SpinField): Spin-1 representation ``U_theta + i U_phi``.
        immersed (numpy.ndarray): ``dPhi(U)``, (3, nlat, nlon), once an
            immersion is attached.
        killing_part (numpy.ndarray): Projection coefficients onto Z1..Z6.
    """

    U: SpinField
    immersed: np.ndarray = None
    killing_part: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def attach(self, im: Immersion) -> "TangentialVelocity":
        return TangentialVelocity(
            U=self.U,
            immersed=im.tangent_vector(self.U.values),
            killing_part=self.killing_part,
        )


def killing_part(u: np.ndarray, grid: Grid) -> np.ndarray:
    return killing_fields(grid).project(u)


def _exact_conformal_density(im: Immersion) -> np.ndarray:
    """Coefficients of ``exp(2 lam) = |dPhi|^2 / 2``, exact at degree 2L."""
    fine = im.on_grid(get_grid(2 * im.L_max))
    return fine.grid.analysis(0.5 * (fine.E + fine.G), 0)


def pulled_back_lambda(im: Immersion, psi: MobiusMap) -> np.ndarray:
    """``lam o psi + log |d psi|`` at the grid nodes."""
    nodes = im.grid.nodes
    density = eval_coeffs_at_points(_exact_conformal_density(im), psi.apply_angles(nodes))
    omega = psi.conformal_factor(angles_to_points(nodes))
    return (0.5 * np.log(density.real) + np.log(omega)).reshape(im.grid.shape)


def _spectral_tail(coeffs: np.ndarray, fraction: float = 0.9) -> float:
    L = coeffs.shape[-2] - 1
    energy = np.sum(np.abs(coeffs) ** 2, axis=(0, 2))
    total = energy[1:].sum()
    if total == 0:
        return 0.0
    return float(energy[int(np.ceil(fraction * L)) :].sum() / total)


def pullback(im: Immersion, psi: MobiusMap, max_tail: float = 0.01) -> Immersion:
    """Reparametrization ``Phi o psi`` resampled on the same grid.

    Raises:
        ResolutionError: if more than ``max_tail`` of the spectral energy
            (degree 0 excluded) lands in the top tenth of the spectrum.
    """
    grid = im.grid
    values = eval_coeffs_at_points(im.coeffs, psi.apply_angles(grid.nodes)).real
    coeffs = grid.analysis(values.reshape((3,) + grid.shape), 0)
    tail = _spectral_tail(coeffs)
    if tail > max_tail:
        logger.error("Resampled immersion has {:.2%} energy in the top band.".format(tail))
        raise ResolutionError(
            "Pullback is under-resolved at L_max = {:d} (tail {:.2%}).".format(
                grid.L_max, tail
            )
        )
    return Immersion(grid, coeffs)


class BalanceProblem:
    """Balance functional ``F(psi)`` of a fixed immersion.

    Holds the exactly band-limited conformal density so repeated evaluations
    during Newton iterations share it.
    """

    def __init__(self, im: Immersion, chart_radius: float = 1.0):
        self.im = im
        self.chart_radius = chart_radius
        self.density = _exact_conformal_density(im)
        self.points = im.grid.position.reshape(3, -1).T
        self.weights = im.grid.weights.ravel()

    def __call__(self, psi: MobiusMap) -> np.ndarray:
        image = psi.apply_angles(self.im.grid.nodes)
        density = eval_coeffs_at_points(self.density, image).real
        omega = psi.conformal_factor(self.points)
        phi = eval_coeffs_at_points(self.im.coeffs, image).real.T
        I = self.points
        first = np.sum(I * (density * omega ** 2 * self.weights)[:, None], axis=0)
        second = np.sum(np.cross(phi, I) * self.weights[:, None], axis=0)
        return np.concatenate([first, second])

    def at(self, s: np.ndarray) -> np.ndarray:
        return self(mobius_exp(s, self.chart_radius))

    def jacobian(self, s: np.ndarray, h: float = 1e-5) -> np.ndarray:
        """Central-difference Jacobian in the generator coordinates Z1..Z6."""
        J = np.zeros((6, 6))
        for k in range(6):
            e = np.zeros(6)
            e[k] = h
            J[:, k] = (self.at(s + e) - self.at(s - e)) / (2 * h)
        return J


def balance_F(im: Immersion, psi: MobiusMap) -> np.ndarray:
    """``(int I |d(Phi o psi)|^2 / 2 dsigma, int (Phi o psi) x I dsigma)``."""
    return BalanceProblem(im)(psi)


def balance_jacobian(im: Immersion, h: float = 1e-5) -> np.ndarray:
    """Jacobian of :func:`balance_F` at the identity.

    Columns are ordered ``(Z4, Z5, Z6, Z1, Z2, Z3)`` so that each generator
    sits in the column of the balance component it drives; for the standard
    embedding the result is ``-(8 pi / 3) Id``.
    """
    J = BalanceProblem(im).jacobian(np.zeros(6), h)
    return J[:, [3, 4, 5, 0, 1, 2]]


def rebalance(
    im: Immersion,
    tol: float = 1e-10,
    max_iter: int = 25,
    chart_radius: float = 1.0,
    delta_chart: float = 0.5,
    h: float = 1e-5,
) -> Tuple[Immersion, MobiusMap]:
    """Newton iteration for the Mobius map that makes ``im`` well-balanced.

    Returns:
        tuple: The pulled-back immersion and the map used.

    Raises:
        ChartError: if an iterate leaves the chart ball.
        GaugeConvergenceError: if Newton does not converge in ``max_iter`` steps.
    """
    if np.linalg.norm(balance_residual(im)) <= tol:
        return im, MobiusMap.identity()
    distance = dlm_distance(im)
    if distance > delta_chart:
        logger.warning(
            "Rebalancing far from the standard embedding (dlm distance {:.3f}).".format(
                distance
            )
        )
    problem = BalanceProblem(im, chart_radius)
    s = np.zeros(6)
    J = SEED_JACOBIAN
    for iteration in range(max_iter):
        F = problem.at(s)
        residual = np.linalg.norm(F)
        logger.debug("Rebalance iteration {:d}: |F| = {:.3e}".format(iteration, residual))
        if residual <= tol:
            break
        if iteration > 0:
            J = problem.jacobian(s, h)
        s = s - solve(J, F)
        if np.linalg.norm(s) > chart_radius:
            logger.error("Rebalance left the chart ball at iteration {:d}.".format(iteration))
            raise ChartError("Rebalance left the chart ball (|s| = {:.3f}).".format(np.linalg.norm(s)))
    else:
        raise GaugeConvergenceError(
            "Rebalance did not converge in {:d} iterations (|F| = {:.3e}).".format(
                max_iter, residual
            )
        )
    psi = mobius_exp(s, chart_radius)
    psi.newton_iterations = iteration
    logger.debug("Rebalanced in {:d} Newton iterations, {}.".format(iteration, psi))
    return pullback(im, psi), psi


def dbar_solve_normal(rhs: SpinField) -> TangentialVelocity:
    """Solution of ``eth_bar(U) = rhs`` orthogonal to the Killing fields.

    ``rhs`` has spin 2. Degree-1 modes of U, the kernel, are set to zero.
    """
    assert rhs.spin == 2, "The dbar source of a vector field has spin 2."
    ev = raising_eigenvalues(rhs.grid, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(ev > 0, 1.0 / ev, 0.0)
    U = SpinField(rhs.grid, 1, coeffs=rhs.coeffs * inv)
    return TangentialVelocity(U=U)


def conformal_tangential_velocity(
    im: Immersion,
    wf: WillmoreFields,
    relaxation: float = 0.0,
    conformal_tol: float = CONFORMAL_TOLERANCE,
) -> TangentialVelocity:
    """Tangential velocity that keeps the Willmore flow conformal.

    Solves ``eth_bar(U) = exp(-2 lam) (-4 <dW, N> h0 + 2 gamma hopf)``; with
    ``gamma = relaxation = 0`` the Hopf differential is transported exactly,
    a positive value additionally damps it.

    Raises:
        GaugeError: if ``im`` is not conformal to ``conformal_tol``.
    """
    check_conformal(im, conformal_tol)
    rhs = np.exp(-2 * im.lam) * (-4 * wf.dW_sc * im.h0 + 2 * relaxation * im.hopf)
    tv = dbar_solve_normal(SpinField(im.grid, 2, values=rhs)).attach(im)
    tv.killing_part = killing_part(tv.U.values, im.grid)
    return tv


def _ambient_velocity_coeffs(u: SpinField) -> np.ndarray:
    """Cartesian components of the tangent field ``u`` as exact coefficients."""
    fine = get_grid(u.grid.L_max + 1)
    values = fine.synthesis(resize_coeffs(u.coeffs, fine.L_max), 1)
    ambient = values.real * fine.e_theta + values.imag * fine.e_phi
    return fine.analysis(ambient, 0)


def advect(points: np.ndarray, velocity: np.ndarray, substeps: int = 4) -> np.ndarray:
    """Time-1 flow of a tangent field by midpoint steps projected to the sphere."""
    h = 1.0 / substeps

    def U(y):
        return eval_coeffs_at_points(velocity, points_to_angles(y)).real.T

    y = points
    for _ in range(substeps):
        mid = y + 0.5 * h * U(y)
        mid /= np.linalg.norm(mid, axis=1)[:, None]
        y = y + h * U(mid)
        y /= np.linalg.norm(y, axis=1)[:, None]
    return y


def conformalize(
    im: Immersion,
    tol: float = 1e-8,
    max_iter: int = 30,
    substeps: int = 4,
    min_reduction: float = 0.05,
    max_start: float = 0.3,
    image_tol: float = 1e-6,
) -> Immersion:
    """Reparametrizes ``im`` until its Hopf residual is below ``tol``.

    Each iteration solves ``eth_bar(U) = 2 exp(-2 lam) hopf`` and composes
    with the time-1 flow of U. The image surface is left unchanged: the
    Hausdorff distance between input and result is measured on a grid of
    twice the resolution and a warning is logged above ``image_tol``.

    Raises:
        ConformalizationError: if the start is too far from conformal, the
            residual stalls or the iteration budget runs out.
    """
    residual = hopf_residual(im)
    if residual <= tol:
        return im
    if residual > max_start:
        raise ConformalizationError(
            "Hopf residual {:.3e} is too large to conformalize.".format(residual)
        )
    grid = im.grid
    original = im
    nodes = grid.position.reshape(3, -1).T
    for iteration in range(1, max_iter + 1):
        rhs = 2 * np.exp(-2 * im.lam) * im.hopf
        tv = dbar_solve_normal(SpinField(grid, 2, values=rhs))
        moved = advect(nodes, _ambient_velocity_coeffs(tv.U), substeps)
        values = eval_coeffs_at_points(im.coeffs, points_to_angles(moved)).real
        candidate = Immersion(grid, grid.analysis(values.reshape((3,) + grid.shape), 0))
        new_residual = hopf_residual(candidate)
        logger.debug(
            "Conformalize iteration {:d}: hopf {:.3e} -> {:.3e}".format(
                iteration, residual, new_residual
            )
        )
        if new_residual <= tol:
            moved_by = sampled_hausdorff(original, candidate, L_sample=2 * grid.L_max)
            logger.debug(
                "Conformalized in {:d} iterations (hopf {:.3e}, image moved by {:.2e}).".format(
                    iteration, new_residual, moved_by
                )
            )
            if moved_by > image_tol:
                logger.warning(
                    "Conformalization moved the image by {:.2e} > {:.1e}.".format(
                        moved_by, image_tol
                    )
                )
            return candidate
        if new_residual > (1 - min_reduction) * residual:
            logger.error("Conformalization stalled at hopf {:.3e}.".format(residual))
            raise ConformalizationError(
                "Hopf residual stalled at {:.3e} after {:d} iterations.".format(
                    new_residual, iteration
                )
            )
        im, residual = candidate, new_residual
    raise ConformalizationError(
        "No conformal parametrization within {:d} iterations.".format(max_iter)
    )


@dataclass
class AdmissibilityTolerances:
    """Membership thresholds of a normalized datum."""

    epsilon: float = 0.1
    hopf: float = 1e-7
    area: float = 1e-8
    barycenter: float = 1e-8
    balance: float = 1e-8
    delta_chart: float = 0.5


def _normalize_size(im: Immersion) -> Immersion:
    im = scale_translate(im, a=np.sqrt(4 * np.pi / im.area()))
    return scale_translate(im, k=-im.barycenter())


def normalize_datum(
    im: Immersion, tolerances: AdmissibilityTolerances = None
) -> Immersion:
    """Conformalize, scale to area 4 pi, center and rebalance a datum.

    Raises:
        AdmissibilityError: if W0 exceeds epsilon or a membership check fails.
    """
    tolerances = tolerances or AdmissibilityTolerances()
    W0 = energies(im).W0
    if W0 > tolerances.epsilon:
        logger.error("W0 = {:.4f} exceeds epsilon = {:.4f}.".format(W0, tolerances.epsilon))
        raise AdmissibilityError(
            "Datum energy W0 = {:.4f} exceeds epsilon = {:.4f}.".format(
                W0, tolerances.epsilon
            )
        )
    im = conformalize(im, tol=tolerances.hopf / 10)
    im = _normalize_size(im)
    im, psi = rebalance(im, tol=tolerances.balance / 100, delta_chart=tolerances.delta_chart)
    # scaling and translation keep the balance conditions
    im = _normalize_size(im)
    report = check_admissible(im, tolerances)
    ratio = report.dlm_distance / np.sqrt(report.W0) if report.W0 > 0 else 0.0
    logger.info(
        "Normalized datum: W0 = {:.4e}, dlm distance = {:.4e}, dlm/sqrt(W0) = {:.3f}.".format(
            report.W0, report.dlm_distance, ratio
        )
    )
    return im


def check_admissible(im: Immersion, tolerances: AdmissibilityTolerances = None) -> EnergyReport:
    """Membership test of a normalized datum.

    Checks the energy bound, conformality, area 4 pi, the barycenter and the
    balance conditions.

    Raises:
        AdmissibilityError: naming every failed check.
    """
    tolerances = tolerances or AdmissibilityTolerances()
    report = energies(im)
    checks = {
        "W0": (report.W0, tolerances.epsilon),
        "hopf": (report.hopf_l2, tolerances.hopf),
        "area": (abs(report.area - 4 * np.pi), tolerances.area),
        "barycenter": (np.linalg.norm(report.barycenter), tolerances.barycenter),
        "balance": (np.linalg.norm(balance_residual(im)), tolerances.balance),
    }
    failed = [k for k, (value, bound) in checks.items() if not value <= bound]
    if failed or not np.isfinite(report.dlm_distance):
        details = ", ".join(
            "{} {:.3e} > {:.1e}".format(k, checks[k][0], checks[k][1]) for k in failed
        )
        logger.error("Datum fails membership checks: {}".format(details))
        raise AdmissibilityError("Membership checks failed: {}".format(details))
    return report
