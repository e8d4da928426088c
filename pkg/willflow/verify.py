"""Invariant suites run by ``willflow verify``.

Each suite returns :class:`CheckResult` rows comparing a measured residual
with its bound. Suites that cannot be evaluated on the given immersion (for
example the conformal-gauge suites on a non-conformal surface) report a
single failed row carrying the error message.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np
from rich.table import Table

from willflow.log import logger
from willflow.errors import ConfigurationError, WillflowError
from willflow.geometry import (
    Immersion,
    balance_residual,
    chart_metric_consistency,
    energies,
    hopf_residual,
)
from willflow.gauge import (
    KILLING_NORM2,
    balance_jacobian,
    dbar_solve_normal,
    killing_fields,
    killing_part,
)
from willflow.hodge import (
    mean_curvature_consistency,
    orthogonality,
    solve_potentials,
    system_residuals,
)
from willflow.sphere_spectral import (
    Grid,
    ScalarField,
    SpinField,
    chart_overlap_residual,
    eth_bar,
    eth_bar_kernel_dimension,
)
from willflow.willmore import (
    form_discrepancy,
    noether_residuals,
    tangency_residual,
    willmore_operator,
)


@dataclass
class CheckResult:
    suite: str
    name: str
    value: float
    tolerance: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)


def _random_spin2(grid: Grid, rng: np.random.Generator) -> SpinField:
    l = grid.degrees[:, None]
    m = np.arange(-grid.L_max, grid.L_max + 1)[None, :]
    mask = (l >= 2) & (np.abs(m) <= l)
    coeffs = (rng.standard_normal(grid.coeff_shape) + 1j * rng.standard_normal(grid.coeff_shape)) * mask
    return SpinField(grid, 2, coeffs=coeffs)


def spectral_suite(im: Immersion, seed: int = 0) -> List[CheckResult]:
    grid = im.grid
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(grid.shape)
    c1 = grid.analysis(values, 0)
    c2 = grid.analysis(grid.synthesis(c1, 0).real, 0)
    roundtrip = np.linalg.norm(c2 - c1) / np.linalg.norm(c1)

    rhs = _random_spin2(grid, rng)
    U = dbar_solve_normal(rhs).U
    dbar = np.linalg.norm(eth_bar(U).coeffs - rhs.coeffs) / np.linalg.norm(rhs.coeffs)
    kernel = np.max(np.abs(killing_part(U.values, grid)))
    overlap = chart_overlap_residual(ScalarField(grid, values=values))
    return [
        CheckResult("spectral", "transform projection", roundtrip, 1e-10),
        CheckResult("spectral", "dbar kernel dimension - 6", abs(eth_bar_kernel_dimension(grid) - 6), 0),
        CheckResult("spectral", "dbar roundtrip", dbar, 1e-8),
        CheckResult("spectral", "dbar Killing pairings", kernel, 1e-8),
        CheckResult("spectral", "chart overlap d/dw = -z^2 d/dz", overlap, 1e-10),
    ]


def geometry_suite(im: Immersion) -> List[CheckResult]:
    report = energies(im)
    return [
        CheckResult("geometry", "Euler characteristic", abs(report.euler_char - 2), 1e-6),
        CheckResult("geometry", "Gauss-Bonnet", abs(report.gauss_bonnet - 4 * np.pi), 1e-6),
        CheckResult("geometry", "W2 - (W0 + W1) / 2", abs(report.W2 - 0.5 * (report.W0 + report.W1)), 1e-6),
    ]


def willmore_suite(im: Immersion) -> List[CheckResult]:
    wf = willmore_operator(im, require_conformal=False)
    r = noether_residuals(im, wf)
    rows = [
        CheckResult("willmore", name, value, 1e-6)
        for name, value in zip(["translation", "rotation", "dilation", "inversion"], r)
    ]
    rows.append(CheckResult("willmore", "tangency <w, dPhi>", tangency_residual(im, wf), 1e-7))
    rows.append(CheckResult("willmore", "divergence form", form_discrepancy(im, wf), 1e-5))
    return rows


def gauge_suite(im: Immersion) -> List[CheckResult]:
    return [
        CheckResult("gauge", "hopf", hopf_residual(im), 1e-5),
        CheckResult("gauge", "balance", float(np.linalg.norm(balance_residual(im))), 1e-7),
        CheckResult("gauge", "chart overlap g_ww = z^4 g_zz", chart_metric_consistency(im), 1e-10),
    ]


def reference_suite(im: Immersion) -> List[CheckResult]:
    """Exact constants of the standard embedding; only meaningful for it."""
    grid = im.grid
    J = balance_jacobian(im)
    target = -KILLING_NORM2 * np.eye(6)
    offdiag = J - np.diag(np.diag(J))
    basis = killing_fields(grid)
    integrals = grid.integrate(np.cross(basis.immersed, grid.position[None], axis=1))
    expected = np.vstack([-KILLING_NORM2 * np.eye(3), np.zeros((3, 3))])
    return [
        CheckResult("reference", "balance Jacobian diagonal", float(np.max(np.abs(np.diag(J - target)))), 1e-4),
        CheckResult("reference", "balance Jacobian off-diagonal", float(np.max(np.abs(offdiag))), 1e-6),
        CheckResult("reference", "Killing integrals", float(np.max(np.abs(integrals - expected))), 1e-9),
        CheckResult("reference", "W0", energies(im).W0, 1e-12),
    ]


def hodge_suite(im: Immersion) -> List[CheckResult]:
    wf = willmore_operator(im)
    hp = solve_potentials(im, wf)
    lap_norm = float(np.sqrt(im.integrate(np.sum(im.laplace_beltrami(im.phi) ** 2, axis=0))))
    bound = 1e-4 * (1 + lap_norm)
    rows = [
        CheckResult("hodge", "system identity {:d}".format(k + 1), value, bound)
        for k, value in enumerate(system_residuals(im, wf, hp))
    ]
    rows += [
        CheckResult("hodge", "orthogonality {}".format(name), value, 1e-7)
        for name, value in zip(["L", "R", "S"], orthogonality(im, hp))
    ]
    rows.append(CheckResult("hodge", "reconstruction of w", hp.residuals["reconstruction_w"], 1e-6))
    rows.append(CheckResult("hodge", "Laplace Phi = 2 Hvec", mean_curvature_consistency(im), 1e-7))
    return rows


SUITES: Dict[str, Callable[[Immersion], List[CheckResult]]] = {
    "spectral": spectral_suite,
    "geometry": geometry_suite,
    "willmore": willmore_suite,
    "gauge": gauge_suite,
    "hodge": hodge_suite,
    "reference": reference_suite,
}


def run_suites(im: Immersion, names: Sequence[str] = None) -> List[CheckResult]:
    """Runs the named suites (all but ``reference`` by default)."""
    names = list(names) if names else [k for k in SUITES if k != "reference"]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigurationError(
            "unknown suite(s) {}; choose from {}".format(", ".join(unknown), ", ".join(SUITES))
        )
    results = []
    for name in names:
        logger.info("Running {} suite.".format(name))
        try:
            results += SUITES[name](im)
        except WillflowError as err:
            logger.warning("Suite {} could not run: {}".format(name, err))
            results.append(CheckResult(name, "evaluation", float("inf"), 0.0, note=str(err)))
    failed = sum(not r.passed for r in results)
    logger.info("{:d} of {:d} checks passed.".format(len(results) - failed, len(results)))
    return results


def results_table(results: List[CheckResult]) -> Table:
    table = Table(title="willflow verify")
    for column in ["suite", "check", "value", "bound", "status"]:
        table.add_column(column)
    for r in results:
        status = "[green]pass[/green]" if r.passed else "[red]FAIL[/red]"
        if r.note:
            status += " " + r.note
        table.add_row(r.suite, r.name, "{:.3e}".format(r.value), "{:.1e}".format(r.tolerance), status)
    return table
