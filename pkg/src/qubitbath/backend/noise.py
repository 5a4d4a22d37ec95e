"""Device noise model and density-matrix execution of basis circuits.

Noise is thermal relaxation after every noisy instruction (for the
instruction's duration, on every qubit it touches), idle relaxation during
``delay``, and a classical confusion matrix on measurement outcomes.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np

from ..linalg import I2, SIGMA_Z, adjoint, check_kraus
from .circuit import BASIS_GATES, Circuit, CircuitError, embed, op_matrix

# Device figures of the reference noise model.
DEVICE_T1 = 0.00015774397097652505
DEVICE_T2 = 0.00010861203881817735
DEVICE_FREQUENCY = 5227644738.696302
DEVICE_NOISY_OPS = ("sx", "id", "x", "cx", "measure")

# Not listed with the device figures; typical transmon values.
DEFAULT_DURATIONS = {
    "sx": 35.5e-9,
    "x": 35.5e-9,
    "id": 35.5e-9,
    "cx": 300e-9,
    "measure": 1000e-9,
    "rz": 0.0,
    "reset": 0.0,
}
DEFAULT_READOUT = 0.02


@dataclass(frozen=True)
class NoiseModel:
    T1: float = DEVICE_T1
    T2: float = DEVICE_T2
    qubit_frequency: float = DEVICE_FREQUENCY
    gate_durations: dict = field(default_factory=lambda: dict(DEFAULT_DURATIONS))
    noisy_ops: tuple = DEVICE_NOISY_OPS
    # per-qubit (p(1|0), p(0|1))
    readout: tuple = ((DEFAULT_READOUT, DEFAULT_READOUT), (DEFAULT_READOUT, DEFAULT_READOUT))

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not (self.T1 > 0 and self.T2 > 0):
            out.append("T1, T2 must be > 0")
        elif self.T2 > 2 * self.T1:
            out.append("T2 <= 2*T1 violated")
        for q, pair in enumerate(self.readout):
            if any(not 0.0 <= p <= 1.0 for p in pair):
                out.append(f"readout probabilities of qubit {q} outside [0, 1]")
        unknown = set(self.noisy_ops) - set(BASIS_GATES)
        if unknown:
            out.append(f"noisy_ops contains non-basis gates {sorted(unknown)}")
        return out

    def duration(self, kind: str) -> float:
        return float(self.gate_durations.get(kind, 0.0))


def thermal_relaxation_kraus(T1: float, T2: float, duration: float) -> list[np.ndarray]:
    """Kraus operators of relaxation toward |0> for ``duration`` seconds.

    Excited population decays by ``exp(-d/T1)``; coherences by
    ``exp(-d/T2)``. Built as amplitude damping followed by the extra pure
    dephasing needed to reach the T2 envelope.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if T2 > 2 * T1:
        raise ValueError("thermal relaxation requires T2 <= 2*T1")
    gamma = -math.expm1(-duration / T1)
    amp = [np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
           np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)]
    lam = math.exp(-duration * (1.0 / T2 - 0.5 / T1))
    phase = [math.sqrt(0.5 * (1 + lam)) * I2, math.sqrt(0.5 * (1 - lam)) * SIGMA_Z]
    kraus = [p @ a for p in phase for a in amp]
    kraus = [k for k in kraus if np.any(k != 0)]
    check_kraus(kraus)
    return kraus


def _apply_channel(rho, kraus, qubit, n_qubits):
    out = np.zeros_like(rho)
    for k in kraus:
        K = embed(k, qubit, n_qubits)
        out += K @ rho @ adjoint(K)
    return out


@lru_cache(maxsize=256)
def _relax_superop(T1, T2, duration, qubit, n_qubits):
    # row-major vec: vec(K rho K^dag) = (K kron K*) vec(rho)
    sup = 0
    for k in thermal_relaxation_kraus(T1, T2, duration):
        K = embed(k, qubit, n_qubits)
        sup = sup + np.kron(K, K.conj())
    return sup


def _relax(rho, noise: NoiseModel, qubits, duration, n_qubits):
    if duration <= 0:
        return rho
    dim = rho.shape[0]
    for q in qubits:
        sup = _relax_superop(noise.T1, noise.T2, float(duration), q, n_qubits)
        rho = (sup @ rho.reshape(-1)).reshape(dim, dim)
    return rho


def _reset(rho, qubit, n_qubits):
    k0 = np.array([[1, 0], [0, 0]], dtype=complex)
    k1 = np.array([[0, 1], [0, 0]], dtype=complex)
    return _apply_channel(rho, [k0, k1], qubit, n_qubits)


def _p_one(rho, qubit, n_qubits) -> float:
    proj = embed(np.diag([0, 1]).astype(complex), qubit, n_qubits)
    return float(np.clip(np.trace(proj @ rho).real, 0.0, 1.0))


def readout_p_one(p_one: float, noise: NoiseModel | None, qubit: int) -> float:
    """Probability of reading '1' given the true excited probability."""
    if noise is None:
        return p_one
    p10, p01 = noise.readout[qubit]
    return p_one * (1.0 - p01) + (1.0 - p_one) * p10


def evolve_noisy(circuit: Circuit, rho, noise: NoiseModel | None):
    """Run a measurement-free prefix of a basis circuit on ``rho``."""
    n = circuit.n_qubits
    rho = np.asarray(rho, dtype=complex)
    for op in circuit.ops:
        if op.kind not in BASIS_GATES:
            raise CircuitError(f"untranspiled op {op.kind!r}; call transpile_to_basis first")
        if op.kind == "measure":
            raise CircuitError("evolve_noisy does not handle measurement")
        rho = _step(rho, op, noise, n)
    return rho


def _step(rho, op, noise, n):
    if op.kind == "reset":
        rho = _reset(rho, op.qubits[0], n)
    elif op.kind == "delay":
        if noise is not None:
            d = op.duration if op.duration is not None else 0.0
            rho = _relax(rho, noise, op.qubits, d, n)
        return rho
    else:
        U = op_matrix(op, n)
        rho = U @ rho @ adjoint(U)
    if noise is not None and op.kind in noise.noisy_ops:
        d = op.duration if op.duration is not None else noise.duration(op.kind)
        rho = _relax(rho, noise, op.qubits, d, n)
    return rho


def apply_circuit_noisy(circuit: Circuit, rho, noise: NoiseModel | None,
                        rng: np.random.Generator) -> tuple[np.ndarray, list[int]]:
    """Single-shot density-matrix execution.

    Measurements sample a projective outcome from ``rng``, collapse the state
    and then flip the recorded bit with the readout confusion probabilities.

    Returns:
        The final state and the list of recorded bits in measurement order.
    """
    n = circuit.n_qubits
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2 ** n, 2 ** n):
        raise CircuitError("density matrix does not fit the register")
    bits: list[int] = []
    for op in circuit.ops:
        if op.kind not in BASIS_GATES:
            raise CircuitError(f"untranspiled op {op.kind!r}; call transpile_to_basis first")
        if op.kind != "measure":
            rho = _step(rho, op, noise, n)
            continue
        q = op.qubits[0]
        p1 = _p_one(rho, q, n)
        outcome = int(rng.random() < p1)
        proj = embed(np.diag([1 - outcome, outcome]).astype(complex), q, n)
        rho = proj @ rho @ proj
        rho = rho / np.trace(rho).real
        if noise is not None:
            p10, p01 = noise.readout[q]
            flip = p10 if outcome == 0 else p01
            outcome ^= int(rng.random() < flip)
            d = op.duration if op.duration is not None else noise.duration("measure")
            if "measure" in noise.noisy_ops:
                rho = _relax(rho, noise, op.qubits, d, n)
        bits.append(outcome)
    return rho, bits
