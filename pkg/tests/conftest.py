import numpy as np
import pytest

from patternfit.params import Control, ForceParams


@pytest.fixture
def default_params():
    return ForceParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_controls(gen, n, params: ForceParams, margin=0.01):
    """Interior controls: theta in [0, pi), eta strictly inside the box."""
    thetas = gen.random(n) * np.pi
    etas = params.eta_min + margin + (params.eta_max - params.eta_min - 2 * margin) * gen.random(n)
    return [Control(float(t), float(e)) for t, e in zip(thetas, etas)]


def random_displacements(gen, n, r_min=1e-3, r_max=0.49):
    """Wrapped displacements with norms in [r_min, r_max], any direction."""
    radii = r_min + (r_max - r_min) * gen.random(n)
    angles = 2.0 * np.pi * gen.random(n)
    return np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
