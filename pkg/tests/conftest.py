import logging
import math
import os

import pytest

from hardylab.config.schema import ClassificationThresholds, ResolutionPolicy, SolverConfig
from hardylab.geometry import Bulge, DomainSpec, PotentialSpec, generate_mesh


@pytest.fixture
def quarter_domain() -> DomainSpec:
    """Quarter plane truncated to one decade on either side of r = 1."""
    return DomainSpec(theta=math.pi / 2, r_min=0.1, r_max=10.0)


@pytest.fixture
def bulged_domain(quarter_domain) -> DomainSpec:
    return quarter_domain.model_copy(
        update={"theta_X": 3 * math.pi / 2, "bulges": [Bulge(r_a=0.5, r_b=2.0, extra_angle=math.pi / 2)]}
    )


@pytest.fixture
def small_mesh(quarter_domain):
    return generate_mesh(quarter_domain, 8, 4)


@pytest.fixture
def bulged_mesh(bulged_domain):
    return generate_mesh(bulged_domain, 8, 4)


@pytest.fixture
def hardy() -> PotentialSpec:
    return PotentialSpec()


@pytest.fixture
def solver() -> SolverConfig:
    return SolverConfig(tol=1e-10, block_size=4)


@pytest.fixture
def coarse_resolution() -> ResolutionPolicy:
    return ResolutionPolicy(layers_per_decade=4, n_angular=6)


@pytest.fixture
def thresholds() -> ClassificationThresholds:
    return ClassificationThresholds()


@pytest.fixture
def isolated_config(tmp_path, monkeypatch):
    """Run with an empty working directory and private XDG config dirs."""
    work = tmp_path / "work"
    work.mkdir()
    monkeypatch.chdir(work)
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))
    monkeypatch.setenv("XDG_CONFIG_DIRS", str(tmp_path / "xdg-sys"))
    for key in [k for k in os.environ if k.startswith("HARDYLAB_")]:
        monkeypatch.delenv(key)
    return work


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    logger = logging.getLogger("hardylab")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    logger.setLevel(logging.NOTSET)
