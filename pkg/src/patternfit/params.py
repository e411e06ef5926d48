"""Parameter containers for the interaction force law and the control pair."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ForceParams:
    """Coefficients of the exponential repulsion/attraction force law.

    The repulsion coefficient is ``(alpha*s**2 + beta)*exp(-e_r*s)`` and the
    attraction coefficient ``-gamma*s*exp(-e_a*s)``, both evaluated at the
    scaled distance ``s = eta*|d|``.  ``chi`` scales the attraction transverse
    to the pattern direction (``chi=1`` is isotropic).  ``eta_min``/``eta_max``
    bound the admissible force scaling.
    """

    alpha: float = 270.0
    beta: float = 0.1
    gamma: float = 35.0
    e_r: float = 100.0
    e_a: float = 95.0
    chi: float = 0.2
    eta_min: float = 0.9
    eta_max: float = 1.1

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.alpha, self.beta, self.gamma,
                                              self.e_r, self.e_a, self.chi,
                                              self.eta_min, self.eta_max)):
            raise ValueError("force parameters must be finite")
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("alpha, beta, gamma must be >= 0")
        if self.e_r <= 0 or self.e_a <= 0:
            raise ValueError("e_r and e_a must be > 0")
        if not 0.0 <= self.chi <= 1.0:
            raise ValueError(f"chi must lie in [0, 1], got {self.chi}")
        if not 0.0 < self.eta_min < self.eta_max:
            raise ValueError("need 0 < eta_min < eta_max")


@dataclass(frozen=True)
class Control:
    """Homogeneous control pair: pattern angle ``theta`` (radians, any real)
    and force scaling ``eta``."""

    theta: float
    eta: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.eta)):
            raise ValueError("control values must be finite")

    def clipped(self, params: ForceParams) -> "Control":
        """Project onto the admissible box: eta clamped, theta unchanged."""
        eta = min(max(self.eta, params.eta_min), params.eta_max)
        return Control(self.theta, eta)
