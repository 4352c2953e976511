import numpy as np
import pytest

from spaox.chromophores import OpticalProperties, default_spectrum
from spaox.phantom import WAVELENGTHS, Cylinder, PhantomConfig, TissueVolume


def homogeneous_volume(mu_a, mu_s, g, dims=(32, 32, 32), size_mm=(32.0, 32.0, 32.0)):
    """A single-material box with the same optics at both wavelengths."""
    labels = np.ones(dims, dtype=np.uint8)
    props = {1: {wl: OpticalProperties(mu_a, mu_s, g) for wl in WAVELENGTHS}}
    voxel = tuple(size_mm[i] / dims[i] for i in range(3))
    return TissueVolume(labels=labels, props=props, voxel_size_mm=voxel, cylinders=())


@pytest.fixture(scope="session")
def spectrum():
    return default_spectrum()


@pytest.fixture(scope="session")
def small_phantom_config():
    """Coarse grid for fast phantom/simulation tests."""
    return PhantomConfig(grid_dims=(64, 64, 64), vessel_min_row=25, seed=123)
