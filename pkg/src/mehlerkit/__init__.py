"""Evolution operators of time-dependent dissipative quadratic Hamiltonians."""

__version__ = "0.1.0"
