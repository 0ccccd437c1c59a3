import pathlib
import sys

import pytest
from hypothesis import HealthCheck, settings

ROOT = pathlib.Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "tests" / "fixtures"
CONFIGS = ROOT / "configs"
sys.path.insert(0, str(ROOT / "tests"))

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def case9():
    from klplf.plf_driver import resolve_case
    return resolve_case("case9")


@pytest.fixture(scope="session")
def case118():
    from klplf.plf_driver import resolve_case
    return resolve_case("case118")


@pytest.fixture(scope="session")
def synth9_dir():
    return CONFIGS / "synth9"


@pytest.fixture(scope="session")
def synth9_runs(synth9_dir):
    """Seeded synthetic 9-bus runs: the MC baseline and three grids."""
    from klplf import plf_driver as drv
    out = {}
    for name in ("mc", "aniso", "iso_w2", "iso_w3"):
        rc = drv.load_config(synth9_dir / f"{name}.json")
        out[name] = drv.run(rc.config)
    return out
