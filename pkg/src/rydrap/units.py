"""Unit conventions.

All configuration, CSV output, and public function signatures use cyclic
frequencies in MHz and times in microseconds; distances are micrometers.
Equations of motion need angular frequencies (rad/us), so solvers convert
exactly once, at the point where matrix elements are assembled.
"""

import math

TWO_PI = 2.0 * math.pi


def angular(f_mhz: float) -> float:
    """Cyclic MHz -> angular rad/us."""
    return TWO_PI * f_mhz


def cyclic(w_rad_per_us: float) -> float:
    """Angular rad/us -> cyclic MHz."""
    return w_rad_per_us / TWO_PI
