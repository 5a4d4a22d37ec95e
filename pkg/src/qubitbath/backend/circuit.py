"""Small circuit IR, ideal statevector execution and transpilation.

Register convention: qubit 0 is the most significant bit of the basis index,
so a two-qubit operator is ``kron(op_on_q0, op_on_q1)``. In Hadamard tests
qubit 0 is the ancilla and qubit 1 the system.

Gate kinds:

* basis: ``cx delay id measure reset rz sx x``
* abstractions removed by :func:`transpile_to_basis`: ``h s sdg prot cpauli``
  where ``prot`` is ``exp(i angle P)`` and ``cpauli`` a controlled Pauli
  (qubits = ``(control, target)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from ..linalg import I2, PAULI, SIGMA_X

BASIS_GATES = ("cx", "delay", "id", "measure", "reset", "rz", "sx", "x")
ABSTRACT_GATES = ("h", "s", "sdg", "prot", "cpauli")
NON_UNITARY = ("measure", "reset")
TWO_QUBIT = ("cx", "cpauli")
UNITARY_TOL = 1e-10

SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
S = np.diag([1, 1j])
SDG = np.diag([1, -1j])
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class GateOp:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    duration: float | None = None
    pauli: str | None = None

    def __post_init__(self):
        if self.kind not in BASIS_GATES + ABSTRACT_GATES:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind in TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise CircuitError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise CircuitError("control and target must differ")
        if self.kind in ("rz", "prot"):
            if self.angle is None or not math.isfinite(self.angle):
                raise CircuitError(f"{self.kind} needs a finite angle")
        if self.kind in ("prot", "cpauli") and self.pauli not in ("X", "Y", "Z", "I"):
            raise CircuitError(f"{self.kind} needs a Pauli label, got {self.pauli!r}")

    def dump(self) -> str:
        parts = [self.kind if self.pauli is None else f"{self.kind}({self.pauli})",
                 ",".join(str(q) for q in self.qubits)]
        if self.angle is not None:
            parts.append(repr(float(self.angle)))
        if self.duration is not None:
            parts.append(repr(float(self.duration)))
        return " ".join(parts)


@dataclass
class Circuit:
    n_qubits: int
    ops: list[GateOp] = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits not in (1, 2):
            raise CircuitError("only 1- and 2-qubit circuits are supported")
        for op in self.ops:
            self._check(op)

    def _check(self, op: GateOp):
        if any(q < 0 or q >= self.n_qubits for q in op.qubits):
            raise CircuitError(f"{op.kind} on qubits {op.qubits} outside a "
                               f"{self.n_qubits}-qubit register")

    def add(self, kind: str, *qubits: int, angle=None, duration=None, pauli=None) -> "Circuit":
        op = GateOp(kind, tuple(qubits), angle, duration, pauli)
        self._check(op)
        self.ops.append(op)
        return self

    def extend(self, ops: Iterable[GateOp]) -> "Circuit":
        for op in ops:
            self._check(op)
            self.ops.append(op)
        return self

    def dump(self) -> str:
        """One op per line: ``kind q0[,q1] [angle] [duration]``."""
        return "\n".join(op.dump() for op in self.ops) + ("\n" if self.ops else "")

    def is_basis(self) -> bool:
        return all(op.kind in BASIS_GATES for op in self.ops)


def rz_matrix(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def pauli_rotation(pauli: str, angle) -> np.ndarray:
    """``exp(i angle P) = cos(angle) I + i sin(angle) P``; broadcasts over angles."""
    a = np.asarray(angle, dtype=float)[..., None, None]
    return np.cos(a) * I2 + 1j * np.sin(a) * PAULI[pauli]


def single_qubit_matrix(op: GateOp) -> np.ndarray:
    k = op.kind
    if k in ("id", "delay"):
        return I2
    if k == "x":
        return SIGMA_X
    if k == "sx":
        return SX
    if k == "rz":
        return rz_matrix(op.angle)
    if k == "h":
        return H
    if k == "s":
        return S
    if k == "sdg":
        return SDG
    if k == "prot":
        return pauli_rotation(op.pauli, op.angle)
    raise CircuitError(f"{k} is not a single-qubit unitary")


def embed(matrix: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    if n_qubits == 1:
        return matrix
    return np.kron(matrix, I2) if qubit == 0 else np.kron(I2, matrix)


def controlled(target_matrix: np.ndarray, control: int, target: int) -> np.ndarray:
    """Two-qubit operator applying ``target_matrix`` when ``control`` is |1>."""
    if control == 0:
        return np.kron(P0, I2) + np.kron(P1, target_matrix)
    return np.kron(I2, P0) + np.kron(target_matrix, P1)


def op_matrix(op: GateOp, n_qubits: int) -> np.ndarray:
    if op.kind in NON_UNITARY:
        raise CircuitError(f"{op.kind} is not unitary")
    if op.kind == "cx":
        return controlled(SIGMA_X, *op.qubits)
    if op.kind == "cpauli":
        return controlled(PAULI[op.pauli], *op.qubits)
    return embed(single_qubit_matrix(op), op.qubits[0], n_qubits)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    U = np.eye(2 ** circuit.n_qubits, dtype=complex)
    for op in circuit.ops:
        U = op_matrix(op, circuit.n_qubits) @ U
    return U


def apply_circuit_ideal(circuit: Circuit, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (2 ** circuit.n_qubits,):
        raise CircuitError(f"state of shape {psi.shape} does not fit "
                           f"{circuit.n_qubits} qubit(s)")
    for op in circuit.ops:
        psi = op_matrix(op, circuit.n_qubits) @ psi
    return psi


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    overlap = np.vdot(b.ravel(), a.ravel())
    if abs(overlap) < 1e-12:
        return False
    phase = overlap / abs(overlap)
    return bool(np.max(np.abs(a - phase * b)) <= tol)


# -- transpilation ----------------------------------------------------------

def _rz(q, angle):
    return GateOp("rz", (q,), angle=angle)


def _h(q):
    # H = e^{i pi/2} rz(pi/2) sx rz(pi/2)
    return [_rz(q, math.pi / 2), GateOp("sx", (q,)), _rz(q, math.pi / 2)]


def _lower(op: GateOp) -> list[GateOp]:
    k, qs = op.kind, op.qubits
    if k in BASIS_GATES:
        return [op]
    if k == "h":
        return _h(qs[0])
    if k == "s":
        return [_rz(qs[0], math.pi / 2)]
    if k == "sdg":
        return [_rz(qs[0], -math.pi / 2)]
    if k == "prot":
        q, a, p = qs[0], op.angle, op.pauli
        if p == "I":
            return []
        if p == "Z":
            return [_rz(q, -2.0 * a)]
        if p == "X":
            return _h(q) + [_rz(q, -2.0 * a)] + _h(q)
        # exp(i a Y) = S exp(i a X) S^dag
        return [_rz(q, -math.pi / 2)] + _h(q) + [_rz(q, -2.0 * a)] + _h(q) + [_rz(q, math.pi / 2)]
    if k == "cpauli":
        c, t = qs
        p = op.pauli
        if p == "I":
            return []
        if p == "X":
            return [GateOp("cx", (c, t))]
        if p == "Z":
            # CZ = e^{i pi/4} (rz(pi/2) x rz(pi/2)) . CX . (1 x rz(-pi/2)) . CX
            return [GateOp("cx", (c, t)), _rz(t, -math.pi / 2), GateOp("cx", (c, t)),
                    _rz(c, math.pi / 2), _rz(t, math.pi / 2)]
        # CY = (1 x S) CX (1 x S^dag)
        return [_rz(t, -math.pi / 2), GateOp("cx", (c, t)), _rz(t, math.pi / 2)]
    raise CircuitError(f"cannot transpile gate kind {k!r}")


def _merge_rz(ops: list[GateOp]) -> list[GateOp]:
    out: list[GateOp] = []
    pending: dict[int, float] = {}

    def flush(qubits):
        for q in qubits:
            a = pending.pop(q, None)
            if a is not None:
                a = math.remainder(a, 4.0 * math.pi)
                if abs(a) > 1e-15:
                    out.append(_rz(q, a))

    for op in ops:
        if op.kind == "rz":
            q = op.qubits[0]
            pending[q] = pending.get(q, 0.0) + op.angle
            continue
        flush(op.qubits)
        out.append(op)
    flush(sorted(pending))
    return out


def transpile_to_basis(circuit: Circuit) -> Circuit:
    """Rewrite abstractions into ``{cx, delay, id, rz, sx, x, measure, reset}``.

    The result equals the input unitary up to a global phase. Adjacent ``rz``
    gates on the same qubit are merged (modulo 4 pi, which keeps the phase
    convention exact).
    """
    lowered: list[GateOp] = []
    for op in circuit.ops:
        lowered.extend(_lower(op))
    return Circuit(circuit.n_qubits, _merge_rz(lowered))


def with_qubits(ops: Iterable[GateOp], mapping: dict[int, int]) -> list[GateOp]:
    return [replace(op, qubits=tuple(mapping[q] for q in op.qubits)) for op in ops]
