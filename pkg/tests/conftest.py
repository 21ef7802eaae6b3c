import numpy as np
import pytest
from hypothesis import settings

from buckygate.cli import run_config_from_mapping
from buckygate.explorer import load_calibration
from buckygate.quantities import PhysicalParams

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture(scope="session")
def calibration():
    return load_calibration()


def preset(name, calibration, **overrides):
    return run_config_from_mapping({"scenario": name, **overrides}, calibration).params


@pytest.fixture(scope="session")
def static_params(calibration):
    return preset("static", calibration)


@pytest.fixture(scope="session")
def gate_params(calibration):
    return preset("pi_gate", calibration)


@pytest.fixture(scope="session")
def free_params(calibration):
    return preset("free", calibration)


@pytest.fixture
def rng():
    return np.random.default_rng(20051807)


def random_state(rng, n=None):
    shape = (4,) if n is None else (n, 4)
    c = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return c / np.linalg.norm(c, axis=-1, keepdims=True)


def random_params(rng, drive=True, t_end=0.5e-9):
    """Parameter set with fields drawn around the experimental scale."""
    return PhysicalParams(
        r=rng.uniform(0.8e-9, 2.5e-9),
        B_z=rng.uniform(-1e-3, 1e-3),
        B_g1=rng.uniform(-1e-4, 1e-4),
        B_g2=rng.uniform(-1e-4, 1e-4),
        B_t=rng.uniform(0.0, 0.3) if drive else 0.0,
        omega=rng.uniform(5e9, 3e10),
        t_end=t_end,
    )
