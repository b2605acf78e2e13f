"""Shared fixtures: the default preset and small purpose-built cycles."""

import numpy as np
import pytest

from preheatsim import State, default_cycle, default_params
from preheatsim.model import DriveCycle


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def cycle():
    # The shipped one-hour demonstration cycle (deterministic).
    return default_cycle()


@pytest.fixture()
def initial():
    return State(soc=0.9, tb=-7.0)


def make_flat_cycle(n=10, dt=30.0, p_prop=20e3, p_aux=500.0, cabin=1978.0,
                    t_amb=-7.0, gamma=35.0):
    """A constant-demand cycle for hand-computable scenarios."""
    return DriveCycle(
        dt=dt,
        speed=np.zeros(n),
        p_prop=np.full(n, p_prop),
        p_aux=np.full(n, p_aux),
        p_hvch_cabin=np.full(n, cabin),
        t_amb=np.full(n, t_amb),
        gamma=np.full(n, gamma),
    )


@pytest.fixture()
def flat_cycle():
    return make_flat_cycle()
