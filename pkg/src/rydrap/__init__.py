"""Avalanche dynamics of facilitated Rydberg excitations.

Chains and square lattices of two-level atoms under alternating-group drive
schedules, with an exact (state-vector / density-matrix) solver, a mean-field
quantum-jump solver for large systems, and gain / dark-count / pattern
analysis on top.
"""

__version__ = "0.1.0"
