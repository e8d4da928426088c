"""Spectral discretization of the round two-sphere.

Fields live on a Gauss-Legendre x uniform-longitude collocation grid and are
expanded in complex orthonormal (spin-weighted) spherical harmonics with
Condon-Shortley phase. Coefficient tables have shape ``(L+1, 2L+1)`` and are
indexed ``[l, m + L]``; entries with ``l < max(|m|, |s|)`` are always zero.

Spin convention: a field has spin ``s`` if a rotation of the orthonormal frame
``(e_theta, e_phi)`` by an angle chi multiplies it by ``exp(-i s chi)``. The
tangent vector ``v_theta e_theta + v_phi e_phi`` is represented by the spin-1
field ``v_theta + i v_phi``. :func:`eth_bar` raises the spin by one and is the
Cauchy-Riemann operator on such fields, :func:`eth` lowers it.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Tuple, Union

import numpy as np

from willflow.log import logger
from willflow.errors import ConfigurationError

SUPPORTED_SPINS = (-2, -1, 0, 1, 2)

# overlap band of the two stereographic charts
CHART_OVERLAP = (np.pi / 3, 2 * np.pi / 3)


def _legendre_columns(L: int, x: np.ndarray):
    """Yields ``(m, P[m:, m])`` for m = 0..L, one order at a time."""
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    pmm = np.full(x.shape, 1.0 / np.sqrt(4.0 * np.pi))
    for m in range(0, L + 1):
        if m > 0:
            pmm = -np.sqrt((2 * m + 1) / (2.0 * m)) * s * pmm
        col = np.empty((L + 1 - m,) + x.shape)
        col[0] = pmm
        if m < L:
            col[1] = np.sqrt(2 * m + 3.0) * x * pmm
        for l in range(m + 2, L + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            col[l - m] = a * (x * col[l - 1 - m] - b * col[l - 2 - m])
        yield m, col


def normalized_legendre(L: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal associated Legendre functions for m >= 0.

    Args:
        L (int): Maximal degree.
        x (numpy.ndarray): Cosines of the colatitudes, any shape.

    Returns:
        numpy.ndarray: Array of shape ``(L+1, L+1) + x.shape`` holding
        ``P[l, m]`` such that ``P[l, m](cos theta) exp(i m phi)`` is the
        orthonormal harmonic ``Y_lm`` including the Condon-Shortley phase.
    """
    x = np.asarray(x, dtype=float)
    P = np.zeros((L + 1, L + 1) + x.shape)
    for m, col in _legendre_columns(L, x):
        P[m:, m] = col
    return P


def _signed_orders(L: int, P: np.ndarray) -> np.ndarray:
    """Extends ``P[l, m]`` (m >= 0) to ``P[l, m + L]`` for -L <= m <= L."""
    out = np.zeros((L + 1, 2 * L + 1) + P.shape[2:])
    for m in range(-L, L + 1):
        sign = (-1.0) ** m if m < 0 else 1.0
        out[:, m + L] = sign * P[:, abs(m)]
    return out


def _spin_tables(L: int, theta: np.ndarray) -> dict:
    """Colatitude profiles of the spin-weighted harmonics for |s| <= 2.

    ``sY_lm(theta, phi) = T[s][l, m + L](theta) exp(i m phi)``. The nodes must
    stay away from the poles.
    """
    x = np.cos(theta)
    s = np.sin(theta)
    cot = x / s
    P = normalized_legendre(L, x)
    dP = np.zeros_like(P)
    for m in range(0, L + 1):
        for l in range(max(m, 1), L + 1):
            lower = P[l - 1, m] if l - 1 >= m else 0.0
            c = np.sqrt((2.0 * l + 1.0) / (2.0 * l - 1.0) * (l * l - m * m))
            dP[l, m] = (l * x * P[l, m] - c * lower) / s
    l = np.arange(L + 1, dtype=float)[:, None, None]
    mm = np.arange(L + 1, dtype=float)[None, :, None]
    d2P = -cot * dP + (mm ** 2 / s ** 2 - l * (l + 1)) * P

    P, dP, d2P = (_signed_orders(L, k) for k in (P, dP, d2P))
    m = np.arange(-L, L + 1, dtype=float)[None, :, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        n1 = np.where(l >= 1, 1.0 / np.sqrt(l * (l + 1)), 0.0)
        n2 = np.where(l >= 2, 1.0 / np.sqrt((l - 1) * (l + 2)), 0.0)
    T1 = -(dP - m * P / s) * n1
    Tm1 = (dP + m * P / s) * n1
    dT1 = -(d2P - m * dP / s + m * x * P / s ** 2) * n1
    dTm1 = (d2P + m * dP / s - m * x * P / s ** 2) * n1
    T2 = -(dT1 - cot * T1 - m * T1 / s) * n2
    Tm2 = (dTm1 - cot * Tm1 + m * Tm1 / s) * n2
    return {0: P, 1: T1, -1: Tm1, 2: T2, -2: Tm2}


@dataclass(frozen=True)
class ChartAtlas:
    """Two stereographic charts covering the grid.

    The north chart ``z = (y1 + i y2) / (1 - y3)`` projects from the north pole
    and is used for colatitudes ``theta >= pi/3``; the south chart
    ``w = (y1 - i y2) / (1 + y3)`` projects from the south pole and is used for
    ``theta <= 2 pi/3``. ``*_log_factor`` is ``log(2 / (1 + |z|^2))``, the log
    of the round conformal factor in the flat chart.
    """

    north: np.ndarray
    south: np.ndarray
    north_log_factor: np.ndarray
    south_log_factor: np.ndarray
    north_mask: np.ndarray
    south_mask: np.ndarray

    @property
    def overlap(self) -> np.ndarray:
        return self.north_mask & self.south_mask


class Grid:
    """Gauss-Legendre collocation grid with ``L+1`` rings and ``2L+2`` meridians.

    Quadrature is exact for band-limited integrands up to degree ``2L+1``.
    Use :func:`get_grid` to obtain cached instances.
    """

    def __init__(self, L_max: int):
        assert L_max >= 2, "The spectral truncation degree must be at least 2."
        self.L_max = int(L_max)
        self.nlat = self.L_max + 1
        self.nlon = 2 * self.L_max + 2
        x, w = np.polynomial.legendre.leggauss(self.nlat)
        # rings ordered north to south
        order = np.argsort(-x)
        self.cos_theta = x[order]
        self.gl_weights = w[order]
        self.theta = np.arccos(self.cos_theta)
        self.sin_theta = np.sin(self.theta)
        self.phi = 2.0 * np.pi * np.arange(self.nlon) / self.nlon
        self.theta2d, self.phi2d = np.meshgrid(self.theta, self.phi, indexing="ij")
        self.weights = np.outer(self.gl_weights, np.full(self.nlon, 2 * np.pi / self.nlon))
        m = np.arange(-self.L_max, self.L_max + 1)
        self.m_index = np.mod(m, self.nlon)
        self.degrees = np.arange(self.L_max + 1)
        self._tables = None
        self._atlas = None

    def __repr__(self):
        return "Grid(L_max={:d}, nlat={:d}, nlon={:d})".format(
            self.L_max, self.nlat, self.nlon
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nlat, self.nlon)

    @property
    def coeff_shape(self) -> Tuple[int, int]:
        return (self.L_max + 1, 2 * self.L_max + 1)

    @property
    def nodes(self) -> np.ndarray:
        """(theta, phi) pairs of all nodes, ring by ring."""
        return np.stack([self.theta2d.ravel(), self.phi2d.ravel()], axis=-1)

    def spin_table(self, spin: int) -> np.ndarray:
        check_spin(spin)
        if self._tables is None:
            self._tables = _spin_tables(self.L_max, self.theta)
        return self._tables[spin]

    @property
    def position(self) -> np.ndarray:
        """The standard embedding I sampled on the grid, shape (3, nlat, nlon)."""
        st, ct = np.sin(self.theta2d), np.cos(self.theta2d)
        return np.stack([st * np.cos(self.phi2d), st * np.sin(self.phi2d), ct])

    @property
    def e_theta(self) -> np.ndarray:
        ct = np.cos(self.theta2d)
        return np.stack(
            [ct * np.cos(self.phi2d), ct * np.sin(self.phi2d), -np.sin(self.theta2d)]
        )

    @property
    def e_phi(self) -> np.ndarray:
        return np.stack(
            [-np.sin(self.phi2d), np.cos(self.phi2d), np.zeros_like(self.phi2d)]
        )

    @property
    def chart_atlas(self) -> ChartAtlas:
        if self._atlas is None:
            half = self.theta2d / 2.0
            z = np.exp(1j * self.phi2d) / np.tan(half)
            w = np.tan(half) * np.exp(-1j * self.phi2d)
            self._atlas = ChartAtlas(
                north=z,
                south=w,
                north_log_factor=np.log(2.0 / (1.0 + np.abs(z) ** 2)),
                south_log_factor=np.log(2.0 / (1.0 + np.abs(w) ** 2)),
                north_mask=self.theta2d >= CHART_OVERLAP[0],
                south_mask=self.theta2d <= CHART_OVERLAP[1],
            )
        return self._atlas

    def analysis(self, values: np.ndarray, spin: int = 0) -> np.ndarray:
        """Grid values (..., nlat, nlon) to coefficients (..., L+1, 2L+1)."""
        values = np.asarray(values)
        if values.shape[-2:] != self.shape:
            raise ConfigurationError(
                "Values of shape {} do not live on {}.".format(values.shape, self)
            )
        F = np.fft.fft(values, axis=-1) * (2.0 * np.pi / self.nlon)
        Fm = F[..., self.m_index]
        return np.einsum(
            "lmj,j,...jm->...lm", self.spin_table(spin), self.gl_weights, Fm
        )

    def synthesis(self, coeffs: np.ndarray, spin: int = 0) -> np.ndarray:
        """Coefficients (..., L+1, 2L+1) to complex grid values (..., nlat, nlon)."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[-2:] != self.coeff_shape:
            raise ConfigurationError(
                "Coefficients of shape {} do not match {}.".format(coeffs.shape, self)
            )
        G = np.einsum("...lm,lmj->...jm", coeffs, self.spin_table(spin))
        full = np.zeros(coeffs.shape[:-2] + self.shape, dtype=complex)
        full[..., self.m_index] = G
        return np.fft.ifft(full, axis=-1) * self.nlon

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Round-measure integral of grid values over the trailing two axes."""
        return np.sum(self.weights * values, axis=(-2, -1))


@lru_cache(maxsize=16)
def get_grid(L_max: int) -> Grid:
    logger.debug("Building collocation grid for L_max = {:d}.".format(L_max))
    return Grid(L_max)


def padded_grid(grid: Grid) -> Grid:
    """Grid sized for cubic products of fields on ``grid``."""
    return get_grid(int(np.ceil(3 * grid.L_max / 2)))


def check_spin(spin: int):
    if spin not in SUPPORTED_SPINS:
        raise ConfigurationError(
            "Spin weight {} is outside the supported range -2..2.".format(spin)
        )


def resize_coeffs(coeffs: np.ndarray, L_new: int) -> np.ndarray:
    """Zero-pads or truncates coefficient tables to degree ``L_new``."""
    L_old = coeffs.shape[-2] - 1
    out = np.zeros(coeffs.shape[:-2] + (L_new + 1, 2 * L_new + 1), dtype=coeffs.dtype)
    L = min(L_old, L_new)
    out[..., : L + 1, L_new - L : L_new + L + 1] = coeffs[
        ..., : L + 1, L_old - L : L_old + L + 1
    ]
    return out


def _lm(grid: Grid):
    l = np.arange(grid.L_max + 1, dtype=float)[:, None]
    m = np.arange(-grid.L_max, grid.L_max + 1, dtype=float)[None, :]
    return l, m


def raising_eigenvalues(grid: Grid, spin: int) -> np.ndarray:
    """Eigenvalues of :func:`eth_bar` on spin-``spin`` harmonics."""
    l, _ = _lm(grid)
    prod = (l - spin) * (l + spin + 1)
    valid = l >= max(abs(spin), abs(spin + 1))
    ev = np.where(valid, np.sqrt(np.clip(prod, 0.0, None)), 0.0)
    return np.broadcast_to(ev, grid.coeff_shape)


def lowering_eigenvalues(grid: Grid, spin: int) -> np.ndarray:
    """Eigenvalues of :func:`eth` on spin-``spin`` harmonics."""
    l, _ = _lm(grid)
    prod = (l + spin) * (l - spin + 1)
    valid = l >= max(abs(spin), abs(spin - 1))
    ev = np.where(valid, -np.sqrt(np.clip(prod, 0.0, None)), 0.0)
    return np.broadcast_to(ev, grid.coeff_shape)


class SpinField:
    """Complex field of definite spin weight on a :class:`Grid`.

    Holds grid values, coefficients or both; whichever representation is
    missing is computed on first access and cached. Instances are treated as
    immutable.
    """

    def __init__(self, grid: Grid, spin: int, values=None, coeffs=None):
        check_spin(spin)
        assert (values is not None) or (coeffs is not None), "Field needs data."
        self.grid = grid
        self.spin = spin
        self._values = None if values is None else np.asarray(values)
        self._coeffs = None if coeffs is None else np.asarray(coeffs, dtype=complex)
        if self._values is not None and self._values.shape != grid.shape:
            raise ConfigurationError(
                "Values of shape {} do not live on {}.".format(self._values.shape, grid)
            )
        if self._coeffs is not None and self._coeffs.shape != grid.coeff_shape:
            raise ConfigurationError(
                "Coefficients of shape {} do not match {}.".format(
                    self._coeffs.shape, grid
                )
            )

    def __repr__(self):
        return "{}(spin={:d}, L_max={:d})".format(
            self.__class__.__name__, self.spin, self.grid.L_max
        )

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = self._from_coeffs(self._coeffs)
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = self.grid.analysis(self._values, self.spin)
        return self._coeffs

    def _from_coeffs(self, coeffs):
        return self.grid.synthesis(coeffs, self.spin)

    def _new(self, values):
        return self.__class__(self.grid, self.spin, values=values)

    def conj(self) -> "SpinField":
        return SpinField(self.grid, -self.spin, values=np.conj(self.values))

    def __add__(self, other):
        if isinstance(other, SpinField):
            assert other.spin == self.spin, "Cannot add fields of different spin."
            other = other.values
        return self._new(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SpinField):
            assert other.spin == self.spin, "Cannot subtract fields of different spin."
            other = other.values
        return self._new(self.values - other)

    def __neg__(self):
        return self._new(-self.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            other = other.values
        elif isinstance(other, SpinField):
            raise TypeError("Use pointwise products of values for spin fields.")
        return self._new(self.values * other)

    __rmul__ = __mul__

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2)))


class ScalarField(SpinField):
    """Real spin-0 field."""

    def __init__(self, grid: Grid, values=None, coeffs=None):
        if values is not None:
            values = np.asarray(values, dtype=float)
        super().__init__(grid, 0, values=values, coeffs=coeffs)

    def _from_coeffs(self, coeffs):
        return self.grid.synthesis(coeffs, 0).real

    def _new(self, values):
        return ScalarField(self.grid, values=values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            other = other.values
        return self._new(self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScalarField):
            other = other.values
        return self._new(self.values / other)


Field = Union[ScalarField, SpinField]


def analyze(f: Field) -> np.ndarray:
    """Coefficient table of a field."""
    return f.coeffs


def synthesize(coeffs: np.ndarray, grid: Grid = None, spin: int = 0) -> Field:
    """Field from a coefficient table; spin-0 tables give a :class:`ScalarField`.

    The grid is inferred from the table size when not given.
    """
    if grid is None:
        grid = get_grid(np.asarray(coeffs).shape[-2] - 1)
    if spin == 0:
        return ScalarField(grid, values=grid.synthesis(coeffs, 0).real)
    return SpinField(grid, spin, coeffs=coeffs)


def harmonic(grid: Grid, l: int, m: int, spin: int = 0) -> np.ndarray:
    """Complex samples of the spin-weighted harmonic ``sY_lm``."""
    coeffs = np.zeros(grid.coeff_shape, dtype=complex)
    coeffs[l, m + grid.L_max] = 1.0
    return grid.synthesis(coeffs, spin)


def real_harmonic(grid: Grid, l: int, m: int) -> ScalarField:
    """Real orthonormal harmonic: cosine type for m > 0, sine type for m < 0."""
    assert abs(m) <= l <= grid.L_max, "Need |m| <= l <= L_max."
    L = grid.L_max
    coeffs = np.zeros(grid.coeff_shape, dtype=complex)
    k = abs(m)
    if m == 0:
        coeffs[l, L] = 1.0
    elif m > 0:
        coeffs[l, k + L] = (-1) ** k / np.sqrt(2.0)
        coeffs[l, -k + L] = 1.0 / np.sqrt(2.0)
    else:
        coeffs[l, k + L] = (-1) ** k / (np.sqrt(2.0) * 1j)
        coeffs[l, -k + L] = -1.0 / (np.sqrt(2.0) * 1j)
    return ScalarField(grid, coeffs=coeffs)


def eth_bar(f: Field) -> SpinField:
    """Spin-raising Cauchy-Riemann operator.

    On ``G(theta) exp(i m phi)`` of spin s it acts as
    ``-(G' - s cot(theta) G - m G / sin(theta)) exp(i m phi)``; its kernel on
    spin-1 fields is spanned by the degree-1 modes, the conformal Killing
    fields.
    """
    spin = f.spin + 1
    check_spin(spin)
    coeffs = f.coeffs * raising_eigenvalues(f.grid, f.spin)
    return SpinField(f.grid, spin, coeffs=coeffs)


def eth(f: Field) -> SpinField:
    """Spin-lowering operator, minus the L2 adjoint of :func:`eth_bar`."""
    spin = f.spin - 1
    check_spin(spin)
    coeffs = f.coeffs * lowering_eigenvalues(f.grid, f.spin)
    return SpinField(f.grid, spin, coeffs=coeffs)


def grad_frame(f: ScalarField) -> SpinField:
    """``d_theta f + i (1/sin theta) d_phi f`` as a spin-1 field.

    Its complex conjugate is the spin -1 member of the pair.
    """
    return -eth_bar(f)


def laplace_s2(f: ScalarField) -> ScalarField:
    l, _ = _lm(f.grid)
    return ScalarField(f.grid, coeffs=f.coeffs * (-l * (l + 1)))


def poisson_solve(f: ScalarField) -> ScalarField:
    """Mean-zero solution u of ``laplace_s2(u) = f - mean(f)``."""
    l, _ = _lm(f.grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(l > 0, -1.0 / (l * (l + 1)), 0.0)
    return ScalarField(f.grid, coeffs=f.coeffs * inv)


def divergence(u: SpinField) -> ScalarField:
    """Round divergence of the tangent field with spin-1 representation ``u``."""
    assert u.spin == 1, "Divergence expects a spin-1 field."
    return ScalarField(u.grid, values=(-eth(u).values).real)


def curl(u: SpinField) -> ScalarField:
    """Round curl (divergence of the field rotated by -90 degrees)."""
    assert u.spin == 1, "Curl expects a spin-1 field."
    return ScalarField(u.grid, values=(-eth(u).values).imag)


def hodge_split(u: SpinField) -> Tuple[ScalarField, ScalarField]:
    """Splits a spin-1 field into ``grad_frame(a) + i grad_frame(b)``.

    On the sphere there are no harmonic one-forms, so the split is exact up to
    truncation. Returns the mean-zero potentials ``(a, b)``.
    """
    assert u.spin == 1, "Hodge split expects a spin-1 field."
    l, _ = _lm(u.grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(l > 0, -1.0 / np.sqrt(l * (l + 1)), 0.0)
    potentials = u.grid.synthesis(u.coeffs * inv, 0)
    return (
        ScalarField(u.grid, values=potentials.real),
        ScalarField(u.grid, values=potentials.imag),
    )


def integrate(f: Field) -> float:
    return f.grid.integrate(f.values)


def chart_derivative(f: ScalarField, chart: str = "north") -> np.ndarray:
    """Complex derivative of ``f`` in a stereographic chart at the grid nodes.

    ``north`` returns ``d f / d z``, ``south`` returns ``d f / d w``.
    """
    grid = f.grid
    u = grad_frame(f).values
    atlas = grid.chart_atlas
    if chart == "north":
        rho = 2.0 / (1.0 + np.abs(atlas.north) ** 2)
        return -(rho / 2.0) * np.exp(-1j * grid.phi2d) * u
    elif chart == "south":
        rho = 2.0 / (1.0 + np.abs(atlas.south) ** 2)
        return (rho / 2.0) * np.exp(1j * grid.phi2d) * u
    raise ConfigurationError("Unknown chart {}.".format(chart))


def eval_coeffs_at_points(coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Sums spin-0 expansions at arbitrary (theta, phi) points.

    Args:
        coeffs (numpy.ndarray): Coefficients of shape (..., L+1, 2L+1).
        pts (numpy.ndarray): Points of shape (n, 2); poles are allowed.

    Returns:
        numpy.ndarray: Complex values of shape (..., n).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    coeffs = np.asarray(coeffs)
    L = coeffs.shape[-2] - 1
    phase = np.exp(1j * pts[:, 1])
    out = np.zeros(coeffs.shape[:-2] + (pts.shape[0],), dtype=complex)
    for m, col in _legendre_columns(L, np.cos(pts[:, 0])):
        out += np.einsum("...l,ln->...n", coeffs[..., m:, L + m], col) * phase ** m
        if m > 0:
            negative = np.einsum("...l,ln->...n", coeffs[..., m:, L - m], col)
            out += (-1) ** m * negative * phase ** (-m)
    return out


def eval_at_points(f: ScalarField, pts: Sequence) -> np.ndarray:
    """Values of a real field at arbitrary (theta, phi) points."""
    return eval_coeffs_at_points(f.coeffs, pts).real


def points_to_angles(points: np.ndarray) -> np.ndarray:
    """(n, 3) unit vectors to (n, 2) colatitude-longitude pairs."""
    theta = np.arccos(np.clip(points[:, 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi)
    return np.stack([theta, phi], axis=-1)


def angles_to_points(angles: np.ndarray) -> np.ndarray:
    theta, phi = angles[:, 0], angles[:, 1]
    return np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)],
        axis=-1,
    )


def chart_overlap_residual(f: ScalarField) -> float:
    """Largest ``|df/dw + z^2 df/dz|`` on the overlap band, relative to ``|df/dw|``.

    Both chart derivatives come from the same frame gradient, so a nonzero
    value points at inconsistent chart coordinates or conformal factors.
    """
    atlas = f.grid.chart_atlas
    band = atlas.overlap
    dz = chart_derivative(f, "north")[band]
    dw = chart_derivative(f, "south")[band]
    scale = max(float(np.max(np.abs(dw))), np.finfo(float).tiny)
    return float(np.max(np.abs(dw + atlas.north[band] ** 2 * dz)) / scale)


def w22_norm(coeffs: np.ndarray) -> float:
    """Spectral W^{2,2} norm, summed over any leading component axes."""
    L = coeffs.shape[-2] - 1
    l = np.arange(L + 1, dtype=float)[:, None]
    return float(np.sqrt(np.sum((1.0 + l * (l + 1)) ** 2 * np.abs(coeffs) ** 2)))


def eth_bar_kernel_dimension(grid: Grid, spin: int = 1, tol: float = 1e-12) -> int:
    """Real dimension of the kernel of eth_bar on spin fields of degree <= L."""
    l, m = _lm(grid)
    admissible = (l >= abs(spin)) & (np.abs(m) <= l)
    ev = raising_eigenvalues(grid, spin)
    return int(2 * np.count_nonzero(admissible & (np.abs(ev) < tol)))
