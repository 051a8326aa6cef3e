from __future__ import annotations

import pytest

from cmc_shooter import MetricParams, OdeConfig, integrate
from cmc_shooter.shooting import find_critical_a

H_TRIPLE = (0.02, 0.01, 0.005)


@pytest.fixture(scope="session")
def params() -> MetricParams:
    return MetricParams(lam=0.1, p=20.0)


@pytest.fixture(scope="session")
def critical_by_h(params):
    """Critical shooting results for the desk-scale H triple (p=20)."""
    return {h: find_critical_a(h, params) for h in H_TRIPLE}


@pytest.fixture(scope="session")
def critical_001(critical_by_h):
    return critical_by_h[0.01]


@pytest.fixture(scope="session")
def reference_orbit(params):
    """Perturbed two-neck orbit away from criticality (H=0.01, a=0.96)."""
    return integrate(OdeConfig(H=0.01, a=0.96, y_max=5.0), params)


@pytest.fixture(scope="session")
def delaunay_orbit():
    return integrate(OdeConfig(H=0.01, a=0.96, y_max=5.0), perturbed=False)
