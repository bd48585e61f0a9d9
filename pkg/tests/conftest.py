import numpy as np
import pytest

from nvoptics.types import Spectrum, SpectrumKind, WavelengthGrid


@pytest.fixture
def uv_grid():
    return WavelengthGrid.linspace(220.0, 800.0, 1.0)


@pytest.fixture
def band_grid():
    return WavelengthGrid.linspace(680.0, 760.0, 1.0)


def absorption(grid, values):
    return Spectrum(grid, np.broadcast_to(values, (len(grid),)), SpectrumKind.ABSORPTION)


def transmittance(grid, values):
    return Spectrum(grid, np.broadcast_to(values, (len(grid),)), SpectrumKind.TRANSMITTANCE)
