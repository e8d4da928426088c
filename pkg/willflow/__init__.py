"""willflow"""

from pathlib import Path

__version__ = "0.1.0"

PROJECT_ROOT_DIR = Path(__file__).absolute().parent

from willflow.sphere_spectral import Grid, ScalarField, SpinField, get_grid
from willflow.geometry import Immersion, build_geometry, energies, standard_embedding
from willflow.willmore import WillmoreFields, willmore_operator
from willflow.gauge import MobiusMap, normalize_datum, rebalance
from willflow.flow import FlowConfig, FlowState, Trajectory, run_flow
from willflow.hodge import HodgePotentials, solve_potentials, system_residuals
from willflow.config import RunConfig, ShapeSpec, parse_config, serialize_config
from willflow.shapes import generate_shape

__all__ = [
    "__version__",
    "Grid",
    "ScalarField",
    "SpinField",
    "get_grid",
    "Immersion",
    "build_geometry",
    "energies",
    "standard_embedding",
    "WillmoreFields",
    "willmore_operator",
    "MobiusMap",
    "normalize_datum",
    "rebalance",
    "FlowConfig",
    "FlowState",
    "Trajectory",
    "run_flow",
    "HodgePotentials",
    "solve_potentials",
    "system_residuals",
    "RunConfig",
    "ShapeSpec",
    "parse_config",
    "serialize_config",
    "generate_shape",
]
