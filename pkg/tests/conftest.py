import pytest

from willflow.config import ShapeSpec
from willflow.gauge import normalize_datum
from willflow.geometry import standard_embedding
from willflow.shapes import generate_shape
from willflow.sphere_spectral import get_grid


@pytest.fixture(scope="session")
def sphere():
    return standard_embedding(get_grid(12))


@pytest.fixture(scope="session")
def bumped():
    """Normal graph ``I (1 + 0.05 Y_22)``, not normalized."""
    return generate_shape(ShapeSpec(kind="sh_bump", l=2, m=2, amplitude=0.05), 24)


@pytest.fixture(scope="session")
def datum():
    """Conformal, balanced datum of small energy at L_max = 12."""
    shape = generate_shape(ShapeSpec(kind="sh_bump", l=2, m=2, amplitude=0.02), 12)
    return normalize_datum(shape)
