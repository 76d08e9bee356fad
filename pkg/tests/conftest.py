"""Shared fixtures: a small synthetic rig and deterministic RNG helpers."""

from __future__ import annotations

import numpy as np
import pytest

from annot3d.synth.scene import gen_rig


@pytest.fixture(scope="session")
def rig10():
    """8 exo + 2 ego hemisphere rig around the working volume origin."""
    return gen_rig(n_exo=8, n_ego=2, radius_m=0.9)


@pytest.fixture(scope="session")
def rig4():
    return gen_rig(n_exo=4, n_ego=0, radius_m=0.9)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
