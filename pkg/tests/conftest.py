import warnings

import pytest


@pytest.fixture(autouse=True)
def _quiet_positivity_warnings():
    # tiny negative steady-state eigenvalues are expected and tested explicitly
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="steady state has a small negative")
        yield
