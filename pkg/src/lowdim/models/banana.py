"""Two-dimensional banana-shaped target."""

import numpy as np

from ..transport.density import LogDensity

LOG_2PI = np.log(2.0 * np.pi)
# Standard deviation of the second coordinate around the parabola.
BANANA_SCALE = 0.5


def banana_logdensity(z: np.ndarray, curvature: float = 1.0) -> np.ndarray:
    """log N(z1; 0, 1) + log N(z2 - b z1^2; 0, 0.5^2) for one point or a batch."""
    z = np.asarray(z, dtype=float)
    z1, z2 = z[..., 0], z[..., 1]
    r = (z2 - curvature * z1**2) / BANANA_SCALE
    return -LOG_2PI - np.log(BANANA_SCALE) - 0.5 * z1**2 - 0.5 * r**2


def banana_gradient(z: np.ndarray, curvature: float = 1.0) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    z1, z2 = z[..., 0], z[..., 1]
    r = (z2 - curvature * z1**2) / BANANA_SCALE**2
    return np.stack([-z1 + 2.0 * curvature * z1 * r, -r], axis=-1)


def banana_target(curvature: float = 1.0) -> LogDensity:
    return LogDensity(
        2,
        lambda z: banana_logdensity(z, curvature),
        lambda z: banana_gradient(z, curvature),
        name=f"banana(b={curvature:g})",
    )
