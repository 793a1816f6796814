import dataclasses

import pytest

from satqkd.config import load_config

WAVELENGTH = 810e-9
APERTURE_TX = 0.15
APERTURE_RX = 0.60
JITTER = 0.47e-6


@pytest.fixture(scope="session")
def default_config():
    return load_config("default")


@pytest.fixture()
def fast_config(default_config):
    """Default scenario shrunk for quick campaign-level tests."""
    cfg = dataclasses.replace(default_config)
    cfg.beam = dataclasses.replace(cfg.beam, grid_size=1024, slant_grid_points=6)
    cfg.campaign = dataclasses.replace(cfg.campaign, span_days=1.0)
    return cfg
