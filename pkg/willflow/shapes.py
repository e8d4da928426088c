"""Initial surfaces: normal graphs over the unit sphere and stretched spheres."""

from typing import List, Tuple

import numpy as np

from willflow.log import logger
from willflow.errors import ConfigurationError
from willflow.config import ShapeSpec
from willflow.geometry import Immersion, build_geometry, standard_embedding
from willflow.sphere_spectral import get_grid, real_harmonic


def bump_list(spec: ShapeSpec, L_max: int) -> List[Tuple[int, int, float]]:
    """The ``(l, m, amplitude)`` terms of a graph-type shape."""
    if spec.kind == "sh_bump":
        return [(spec.l, spec.m, spec.amplitude)]
    if spec.kind == "multi_bump":
        return list(spec.bumps)
    if spec.kind == "random_bumps":
        if not 2 <= spec.max_l < 0.9 * L_max:
            raise ConfigurationError(
                "max_l = {:d} must lie in [2, 0.9 L_max) for L_max = {:d}".format(
                    spec.max_l, L_max
                ),
                key="max_l",
            )
        rng = np.random.default_rng(spec.seed)
        bumps = []
        for _ in range(spec.count):
            l = int(rng.integers(2, spec.max_l + 1))
            m = int(rng.integers(-l, l + 1))
            bumps.append((l, m, float(rng.uniform(-spec.amplitude, spec.amplitude))))
        return bumps
    return []


def generate_shape(spec: ShapeSpec, L_max: int) -> Immersion:
    """Builds the immersion described by ``spec`` on the grid of degree ``L_max``.

    Graph shapes are ``Phi = I (1 + sum a Y_lm)``, the unit normal of the
    sphere being ``I`` itself; the real harmonic ``Y_lm`` is of cosine type for
    ``m > 0`` and sine type for ``m < 0``. ``ellipsoid_like`` is
    ``diag(axes) I``. The result is neither conformal nor normalized.

    Raises:
        ConfigurationError: if a degree does not fit on the grid.
        DegenerateImmersionError: if the graph folds over.
    """
    spec.validate()
    grid = get_grid(L_max)
    if spec.kind == "sphere":
        return standard_embedding(grid)
    if spec.kind == "ellipsoid_like":
        values = np.asarray(spec.axes, dtype=float)[:, None, None] * grid.position
        logger.info("Ellipsoid with axes {}.".format(spec.axes))
        return build_geometry(values, grid)

    bumps = bump_list(spec, L_max)
    height = np.ones(grid.shape)
    for l, m, a in bumps:
        if l + 1 > L_max:
            raise ConfigurationError(
                "degree {:d} does not fit below L_max = {:d}".format(l, L_max), key="l"
            )
        height += a * real_harmonic(grid, l, m).values
    logger.info(
        "Normal graph with {:d} term(s): {}.".format(
            len(bumps), ", ".join("{:d}:{:d}:{:.4g}".format(*b) for b in bumps)
        )
    )
    return build_geometry(height * grid.position, grid)
