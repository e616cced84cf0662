import pytest

from levy_atm import presets


@pytest.fixture(scope="session")
def toy():
    return presets.toy_log(1.5)


@pytest.fixture(scope="session")
def stable_model():
    return presets.symmetric_stable(1.5)


@pytest.fixture(scope="session")
def bs():
    return presets.black_scholes(0.2)
