"""Hadamard-test estimation of overlaps between two circuit branches.

The ancilla is qubit 0 and the system qubit 1. After an ancilla ``h`` the
system runs a common gate sequence in which some controlled Paulis fire only
when the ancilla is |0> (branch 0) and others only when it is |1> (branch 1).
A final ancilla ``h`` (preceded by ``sdg`` for the imaginary part) gives

    <Z_ancilla> = Re <b0|b1>   or   Im <b0|b1>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, CircuitError, GateOp, apply_circuit_ideal, transpile_to_basis
from .noise import NoiseModel, evolve_noisy, readout_p_one

ANCILLA, SYSTEM = 0, 1
COMPONENTS = ("real", "imag")


@dataclass(frozen=True)
class HadamardEstimate:
    value: float
    stderr: float
    exact: float          # expectation the estimator samples from (noise included)
    shots: int | None

    def __float__(self):
        return self.value


def _check_shots(shots):
    if shots is not None and (int(shots) != shots or shots < 1):
        raise ValueError(f"shots must be a positive integer or None, got {shots!r}")


def _controlled(pauli: str, on_zero: bool) -> list[GateOp]:
    if pauli == "I":
        return []
    op = GateOp("cpauli", (ANCILLA, SYSTEM), pauli=pauli)
    if not on_zero:
        return [op]
    flip = GateOp("x", (ANCILLA,))
    return [flip, op, flip]


def overlap_circuit(system_ops: Sequence[GateOp], branch0: Mapping[int, str],
                    branch1: Mapping[int, str], component: str) -> Circuit:
    """Ancilla circuit estimating ``<b0|b1>``.

    Args:
        system_ops: single-qubit gates on the system (any qubit index; they
            are relocated to the system line).
        branch0, branch1: ``{position: pauli}``; a Pauli at position ``p`` is
            applied after the first ``p`` system gates. Gates after the last
            insertion act identically on both branches and are dropped.
        component: ``"real"`` or ``"imag"``.
    """
    if component not in COMPONENTS:
        raise ValueError(f"component must be one of {COMPONENTS}")
    positions = list(branch0) + list(branch1)
    last = max(positions, default=0)
    if last < 0 or last > len(system_ops):
        raise CircuitError("insertion position outside the gate sequence")
    circ = Circuit(2)
    circ.add("h", ANCILLA)
    for p in range(last + 1):
        if p in branch0:
            circ.extend(_controlled(branch0[p], on_zero=True))
        if p in branch1:
            circ.extend(_controlled(branch1[p], on_zero=False))
        if p < last:
            op = system_ops[p]
            circ.extend([GateOp(op.kind, (SYSTEM,), op.angle, op.duration, op.pauli)])
    if component == "imag":
        circ.add("sdg", ANCILLA)
    circ.add("h", ANCILLA)
    return circ


def ancilla_expectation(circuit: Circuit, shots: int | None = None,
                        noise: NoiseModel | None = None,
                        rng: np.random.Generator | None = None) -> HadamardEstimate:
    """Transpile, execute from |00> and estimate ``<Z>`` on the ancilla.

    Noise (if any) acts during the gates and on the readout. Shots are drawn
    as one binomial sample of the per-shot outcome distribution, which is
    the same law as repeating single-shot measurement.
    """
    _check_shots(shots)
    basis = transpile_to_basis(circuit)
    if noise is None:
        psi = np.zeros(4, dtype=complex)
        psi[0] = 1.0
        psi = apply_circuit_ideal(basis, psi)
        p1 = float(np.sum(np.abs(psi[2:]) ** 2))
    else:
        rho = np.zeros((4, 4), dtype=complex)
        rho[0, 0] = 1.0
        rho = evolve_noisy(basis, rho, noise)
        p1 = float(np.clip(rho[2, 2].real + rho[3, 3].real, 0.0, 1.0))
        p1 = readout_p_one(p1, noise, ANCILLA)
    exact = 1.0 - 2.0 * p1
    if shots is None:
        return HadamardEstimate(exact, 0.0, exact, None)
    if rng is None:
        raise ValueError("finite shots need an rng")
    n1 = int(rng.binomial(int(shots), min(max(p1, 0.0), 1.0)))
    q = n1 / shots
    return HadamardEstimate(1.0 - 2.0 * q, 2.0 * math.sqrt(q * (1.0 - q) / shots), exact, int(shots))


def hadamard_test(circuit_body: Circuit, insert: str, component: str = "real",
                  shots: int | None = None, noise: NoiseModel | None = None,
                  rng: np.random.Generator | None = None) -> HadamardEstimate:
    """Estimate ``Re`` or ``Im`` of ``<psi|P|psi>`` with ``psi`` prepared by
    the single-qubit ``circuit_body`` and ``P`` a Pauli label."""
    _check_shots(shots)
    if circuit_body.n_qubits != 1:
        raise CircuitError("circuit_body must act on one qubit")
    if insert not in ("I", "X", "Y", "Z"):
        raise CircuitError(f"insertion must be a Pauli label, got {insert!r}")
    n = len(circuit_body.ops)
    circ = overlap_circuit(circuit_body.ops, {}, {n: insert}, component)
    return ancilla_expectation(circ, shots, noise, rng)
