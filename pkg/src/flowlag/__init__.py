"""Velocity-deficit laboratory for flow-matching models.

Trains velocity fields with plain and magnitude-aware regression,
samples them with schedule-corrected ODE/SDE solvers, and measures the
kinetic-energy deficit and integration lag against exact Gaussian
oracles.
"""

__version__ = "0.1.0"
