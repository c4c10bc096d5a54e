import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conefluct import MatrixLaw, SimplexVector
from conefluct.fixtures import reference_law, reference_manifest


@pytest.fixture(scope="session")
def ref_law() -> MatrixLaw:
    """The packaged centered two-atom law."""
    return reference_law()


@pytest.fixture(scope="session")
def ref_manifest() -> dict:
    """Pinned constants measured for the packaged law."""
    return reference_manifest()


@pytest.fixture(scope="session")
def barycenter() -> SimplexVector:
    return SimplexVector.barycenter(2)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240911)


def scalar_law(*pairs) -> MatrixLaw:
    """Law of multiples of the identity: each pair is (factor, weight); d = 2."""
    entries = [np.eye(2) * c for c, _ in pairs]
    weights = np.array([w for _, w in pairs])
    return MatrixLaw.from_entries(entries, weights)


@pytest.fixture(scope="session")
def centered_scalar_law() -> MatrixLaw:
    """Identity multiples exp(+-1/2), so increments are i.i.d. +-1/2."""
    return scalar_law((np.exp(0.5), 0.5), (np.exp(-0.5), 0.5))
