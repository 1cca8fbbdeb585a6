import pytest
from hypothesis import HealthCheck, settings

from qsdkit import catalog

settings.register_profile("qsdkit", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qsdkit")

PASSING = ("sis1d", "sis_hetero", "linear_birth_quadratic_death", "bc23_bd", "competition")


@pytest.fixture(scope="session")
def models():
    out = {name: catalog(name) for name in PASSING}
    out["competition_bd"] = catalog("competition", {"a5": 0, "a6": 0})
    out["nonrev2d"] = catalog("nonrev2d")
    return out
