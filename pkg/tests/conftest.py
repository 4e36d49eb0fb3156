import numpy as np
import pytest

from microclimb.model import RobotState, rest_state
from microclimb.robots import default_quadruped, planar_biped


@pytest.fixture(scope="session")
def quadruped():
    return default_quadruped()


@pytest.fixture(scope="session")
def planar():
    return planar_biped()


def posed_state(model, rng=None, base_pos=(0.0, 0.0, 0.12), with_rates=False) -> RobotState:
    """A state with joints placed safely inside their limits."""
    state = rest_state(
        model,
        base_pos,
        (1.0, 0.0, 0.0, 0.0),
        [0.5 * (l.lower + l.upper) for l in model.limbs],
    )
    if rng is not None:
        for i, limb in enumerate(model.limbs):
            span = limb.upper - limb.lower
            state.joint_angles[i] = limb.lower + rng.uniform(0.2, 0.8, limb.n_joints) * span
            if with_rates:
                state.joint_rates[i] = rng.normal(0.0, 0.4, limb.n_joints)
        if with_rates:
            state.base_lin_vel = rng.normal(0.0, 0.1, 3)
            state.base_ang_vel = rng.normal(0.0, 0.2, 3)
    return state
