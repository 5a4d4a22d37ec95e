"""Circuit execution: ideal statevector, noisy density matrix, Hadamard tests."""

from .circuit import (
    BASIS_GATES,
    Circuit,
    CircuitError,
    GateOp,
    apply_circuit_ideal,
    circuit_unitary,
    equal_up_to_phase,
    transpile_to_basis,
)
from .hadamard import HadamardEstimate, ancilla_expectation, hadamard_test, overlap_circuit
from .noise import NoiseModel, apply_circuit_noisy, thermal_relaxation_kraus

__all__ = [
    "BASIS_GATES", "Circuit", "CircuitError", "GateOp", "HadamardEstimate",
    "NoiseModel", "ancilla_expectation", "apply_circuit_ideal", "apply_circuit_noisy",
    "circuit_unitary", "equal_up_to_phase", "hadamard_test", "overlap_circuit",
    "thermal_relaxation_kraus", "transpile_to_basis",
]
