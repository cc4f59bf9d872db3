"""F-18 case-study data: effectiveness matrix, limits and actuator parameters."""
from __future__ import annotations

import numpy as np

SURFACES = ("tail_l", "tail_r", "flap_l", "flap_r", "ail_l", "ail_r", "rudder")

# moment coefficients per degree; rows are c_l, c_m, c_n
B = 1e-5 * np.array([
    [23.8, -23.8, 123.0, -123.0, 41.8, -41.8, 3.6],
    [-698.0, -698.0, 99.4, 99.4, -55.2, -55.2, 0.0],
    [-30.9, 30.9, 0.0, 0.0, -17.4, 17.4, -56.2],
])

POSITION_UPPER = np.array([10.5, 10.5, 45.0, 45.0, 42.0, 42.0, 30.0])     # deg
POSITION_LOWER = np.array([-24.0, -24.0, -8.0, -8.0, -25.0, -25.0, -30.0])  # deg
RATE_UPPER = np.array([40.0, 40.0, 18.0, 18.0, 100.0, 100.0, 82.0])       # deg/s
RATE_LOWER = -RATE_UPPER

# One first-order filter per surface, so A is m x m.
A_DIAG = -2.0

# (omega0 [rad/s], zeta) per surface family
ACTUATOR_TABLE = {
    "tail": (30.74, 0.509),
    "rudder": (72.1, 0.69),
    "aileron": (75.0, 0.59),
    "flap": (35.0, 0.71),
}
SURFACE_FAMILY = ("tail", "tail", "flap", "flap", "aileron", "aileron", "rudder")

A_MATRIX_NOTE = "A = -2 I sized 7x7, one rate filter per surface"


def model(A=None):
    """The F-18 :class:`~amsalloc.allocator.AircraftModel` (A defaults to -2 I)."""
    from .allocator import AircraftModel
    from .polytope import BoxLimits

    if A is None:
        A = A_DIAG * np.eye(B.shape[1])
    return AircraftModel(
        B=B,
        position_limits=BoxLimits(POSITION_LOWER, POSITION_UPPER),
        rate_limits=BoxLimits(RATE_LOWER, RATE_UPPER),
        A=A,
        names=SURFACES,
    )


def actuators():
    """Second-order actuator parameters for the seven surfaces."""
    from .actuator_sim import ActuatorParams

    out = []
    for j, fam in enumerate(SURFACE_FAMILY):
        w, z = ACTUATOR_TABLE[fam]
        out.append(ActuatorParams(omega0=w, zeta=z,
                                  position_limits=(POSITION_LOWER[j], POSITION_UPPER[j]),
                                  rate_limit=RATE_UPPER[j]))
    return out
