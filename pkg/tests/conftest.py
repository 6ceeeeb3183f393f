import numpy as np
import pytest
from g2lab_cli.config import config

from g2lab.calibration_planes import Frame, cayley_dickson_frame
from g2lab.settings import NumericsSettings
from g2lab.thin_dirac import (
    DiscreteOperator,
    ThinCylinderGrid,
    TwistedBundle,
    WarpProfile,
    assemble,
)


@pytest.fixture(scope="session", autouse=True)
def set_test_environment() -> None:
    config.configure(FORCE_ENV_FOR_DYNACONF="test")


@pytest.fixture
def settings() -> NumericsSettings:
    return NumericsSettings()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def grid() -> ThinCylinderGrid:
    return ThinCylinderGrid(epsilon=0.25, M=16, N2=8, N3=8)


@pytest.fixture
def small_grid() -> ThinCylinderGrid:
    return ThinCylinderGrid(epsilon=0.25, M=8, N2=4, N3=4)


@pytest.fixture
def half_twist() -> TwistedBundle:
    return TwistedBundle(0.5, 0.5)


@pytest.fixture
def zero_twist() -> TwistedBundle:
    return TwistedBundle(0.0, 0.0)


@pytest.fixture
def flat_warp(grid: ThinCylinderGrid) -> WarpProfile:
    return WarpProfile.constant(grid, 1.0)


@pytest.fixture
def cosine_warp(grid: ThinCylinderGrid) -> WarpProfile:
    return WarpProfile.cosine(grid, 1.0, 0.2, 2.0)


@pytest.fixture
def operator(
    grid: ThinCylinderGrid, half_twist: TwistedBundle, flat_warp: WarpProfile
) -> DiscreteOperator:
    return assemble(grid, half_twist, flat_warp)


@pytest.fixture
def warped_operator(
    grid: ThinCylinderGrid, half_twist: TwistedBundle, cosine_warp: WarpProfile
) -> DiscreteOperator:
    return assemble(grid, half_twist, cosine_warp)


@pytest.fixture
def standard_frame() -> Frame:
    return cayley_dickson_frame(np.eye(7)[0], np.eye(7)[1], np.eye(7)[3])


@pytest.fixture
def coassociative_plane() -> Frame:
    return Frame.standard(4, 5, 6, 7)
