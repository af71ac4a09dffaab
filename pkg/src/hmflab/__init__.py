"""Numerical laboratory for the attractive Hamiltonian mean-field model.

Builds magnetized stationary states, the pendulum action-angle atlas in
explicit Jacobi-elliptic form, and the Volterra integral equations that
govern the linearized dynamics; checks Penrose-type stability and
measures the algebraic decay rates of the magnetization response.
"""

__version__ = "0.1.0"
