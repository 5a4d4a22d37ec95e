"""Open-qubit dynamics under a thermal bath: exact, stochastic and variational engines."""

__version__ = "0.1.0"
