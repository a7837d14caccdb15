"""Central-spin model simulation suite.

Engines
-------
ieom        four-dimensional impurity coupled to a truncated bosonic chain
            (operator dynamics mapped to a Schroedinger problem)
classical   ensemble average over Gaussian bath configurations
exactqm     full Hilbert-space dynamics for small baths (stochastic trace)
reference   closed-form curves (frozen-field formula, field envelope, Larmor)

Energies are measured in units of the quadratic coupling scale (the root of
the summed squared hyperfine couplings), which equals 1 by construction;
times are measured in the inverse of that unit.
"""

__version__ = "0.1.0"

from . import classical, cli, couplings, exactqm, heff, opbasis, propagate, reference, series

__all__ = [
    "classical",
    "cli",
    "couplings",
    "exactqm",
    "heff",
    "opbasis",
    "propagate",
    "reference",
    "series",
]
