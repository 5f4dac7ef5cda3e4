from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pmcv.catalog import from_id
from pmcv.immersion import ImmersionSpec

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"

BIHARMONIC_FIXTURES = ("cyl:c=1:kappa=1", "sphere:c=1:cprime=2", "cylsphere:c=1")


@pytest.fixture(scope="session")
def helicoid():
    """Minimal surface of S^2(1) x R swept by rotating meridians; |T| is not constant."""
    return ImmersionSpec.from_dsl((DATA / "helicoid.dsl").read_text(), 1.0, {"a": 0.7}, name="helicoid")


@pytest.fixture(scope="session")
def cylinder():
    return from_id("cyl:c=1:kappa=1").spec


@pytest.fixture(scope="session")
def small_sphere():
    return from_id("sphere:c=1:cprime=2").spec


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def interior(imm, n=6, seed=0):
    rng = np.random.default_rng(seed)
    lo, hi = imm.lower, imm.upper
    return lo + (hi - lo) * (0.1 + 0.8 * rng.random((n, imm.m)))
