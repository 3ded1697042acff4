import numpy as np
import pytest

from chemoslab.model import DEFAULT_SCENARIO, build_problem


def make_setup(n_x=32, **overrides):
    """Default scenario with selected keys replaced."""
    cfg = dict(DEFAULT_SCENARIO)
    cfg.update(overrides)
    return build_problem(cfg, n_x=n_x)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
