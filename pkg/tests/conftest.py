import os

# numba's OpenMP threading layer (the fallback when TBB is too old) deadlocks
# in forked Pool workers once the parent has run a parallel hafnian; the
# workqueue layer is fork-safe. Must be set before numba is imported.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numpy as np
import pytest

from antipt_spdc.enums import WAVEGUIDE_MODES
from antipt_spdc.fock import DensityMatrix, build_basis
from antipt_spdc.model import ModelParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_basis():
    # total_cap <= per_mode_cap keeps the bright/dark change closed
    return build_basis(WAVEGUIDE_MODES, 2, 2)


@pytest.fixture
def small_params():
    return ModelParams(per_mode_cap=2, total_cap=2, samples=5)


@pytest.fixture
def g4_params():
    return ModelParams(per_mode_cap=4, total_cap=4, samples=3)


@pytest.fixture
def random_density(rng):
    def make(basis):
        x = rng.normal(size=(basis.dim, basis.dim)) + 1j * rng.normal(size=(basis.dim, basis.dim))
        rho = x @ x.conj().T
        return DensityMatrix(basis, rho / np.trace(rho))
    return make
