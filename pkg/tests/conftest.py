import numpy as np
import pytest

from airways.dynamics import PlatformParams


@pytest.fixture
def params() -> PlatformParams:
    """A 500 g bench quad with consistent rotor coefficients."""
    return PlatformParams(
        mass=0.5,
        inertia_body=np.diag([2.3e-3, 2.3e-3, 4.0e-3]),
        rotor_thrust_coeff=1.5e-6,
        rotor_moment_coeff=3.75e-8,
        arm_length=0.17,
        rotor_force_max=3.0,
        rotor_moment_max=0.075,
    )
