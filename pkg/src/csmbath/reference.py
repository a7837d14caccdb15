"""Closed-form reference curves for cross-validation.

All formulas take the quadratic coupling scale as an explicit argument; the
engines use the normalization where it equals 1.
"""

from __future__ import annotations

import math

import numpy as np


def s_frozen(t, j_q: float = 1.0):
    """Static-bath autocorrelation: decays from 1/4 to the 1/12 plateau.

    S(t) = 1/12 * (1 + 2 [1 - (j_q^2/4) t^2] exp(-(j_q^2/8) t^2))
    """
    t = np.asarray(t, dtype=float)
    x = (j_q * t) ** 2
    out = (1.0 + 2.0 * (1.0 - x / 4.0) * np.exp(-x / 8.0)) / 12.0
    return out if out.ndim else float(out)


def envelope(t, j_q: float = 1.0):
    """Gaussian envelope of the field-driven oscillations: 1/4 exp(-j_q^2 t^2 / 8)."""
    t = np.asarray(t, dtype=float)
    out = 0.25 * np.exp(-((j_q * t) ** 2) / 8.0)
    return out if out.ndim else float(out)


def larmor_frequency(h: float, j_q: float = 1.0) -> float:
    """Bath-shifted precession frequency sqrt(h^2 + j_q^2 / 2)."""
    return math.sqrt(h * h + j_q * j_q / 2.0)


def merkulov_rotation(s0, b, t: float) -> np.ndarray:
    """Precession of a spin vector about a static field.

    s(t) = n (n.s0) + [s0 - (n.s0) n] cos(Bt) - (s0 x n) sin(Bt)
    with B = |b| and n = b/B; for b = 0 the spin does not move.
    """
    s0 = np.asarray(s0, dtype=float)
    b = np.asarray(b, dtype=float)
    mod = float(np.linalg.norm(b))
    if mod == 0.0:
        return s0.copy()
    n = b / mod
    par = n * np.dot(n, s0)
    return par + (s0 - par) * math.cos(mod * t) - np.cross(s0, n) * math.sin(mod * t)
