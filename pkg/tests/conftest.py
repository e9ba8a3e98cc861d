import pytest

from harq_aoi import AckModel, SdoConfig, solve


@pytest.fixture(scope="session")
def model():
    return AckModel.gaussian_tbcc(64)


@pytest.fixture(scope="session")
def cfg10():
    return SdoConfig(beta=10)


@pytest.fixture(scope="session")
def sol10(model, cfg10):
    """Lambda-route optimum at beta = 10."""
    return solve(cfg10, model)


@pytest.fixture(scope="session")
def sol10_fixed_n1(model, cfg10):
    """Minimum of the rho_0*(N_1) curve at beta = 10, with the curve attached."""
    return solve(cfg10, model, fixed_n1_route=True)
