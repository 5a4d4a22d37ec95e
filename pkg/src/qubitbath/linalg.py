"""Dense complex linear algebra for one qubit (2x2) and qubit+ancilla (4x4).

States and operators are plain ``numpy`` arrays of dtype ``complex128``.
Every routine accepts only the two dimensions used by the toolkit and raises
:class:`DimensionError` otherwise.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
COMPLETENESS_TOL = 1e-12
TRACE_TOL = 1e-9

SUPPORTED_DIMS = (2, 4)

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma_minus lowers |1> -> |0>; |0> is the ground state.
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)

PAULI = {
    "I": I2,
    "X": SIGMA_X,
    "Y": SIGMA_Y,
    "Z": SIGMA_Z,
    "+": SIGMA_PLUS,
    "-": SIGMA_MINUS,
}


class DimensionError(ValueError):
    """Raised when an operand has a shape outside the supported set."""


class NotHermitianError(ValueError):
    pass


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] not in SUPPORTED_DIMS:
        raise DimensionError(f"expected a 2x2 or 4x4 matrix, got shape {a.shape}")
    return a


def mat_mul(a, b) -> np.ndarray:
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def adjoint(a) -> np.ndarray:
    """Conjugate transpose; works on any trailing 2-D block."""
    return np.swapaxes(np.conj(a), -1, -2)


def kron(a, b) -> np.ndarray:
    """Tensor product of two single-qubit operators, ``a`` on qubit 0."""
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise DimensionError("kron is defined for two 2x2 operands only")
    return np.kron(a, b)


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - adjoint(a))) <= tol)


def herm_eigvals(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian 2x2 or 4x4 matrix.

    The 2x2 case uses the closed form ``m +- sqrt(d^2 + |b|^2)``; the 4x4
    case defers to LAPACK's Hermitian solver.
    """
    h = _as_matrix(h)
    if not is_hermitian(h, tol):
        raise NotHermitianError("herm_eigvals requires a Hermitian matrix")
    if h.shape == (2, 2):
        a, d = h[0, 0].real, h[1, 1].real
        mean, half = 0.5 * (a + d), 0.5 * (a - d)
        r = np.hypot(half, abs(h[0, 1]))
        return np.array([mean - r, mean + r])
    return np.linalg.eigvalsh(0.5 * (h + adjoint(h)))


def partial_trace(rho4, keep: int) -> np.ndarray:
    """Reduce a two-qubit density matrix to qubit ``keep`` (0 or 1)."""
    rho4 = _as_matrix(rho4)
    if rho4.shape != (4, 4):
        raise DimensionError("partial_trace expects a 4x4 density matrix")
    if abs(np.trace(rho4) - 1.0) > TRACE_TOL:
        raise ValueError(f"partial_trace expects unit trace, got {np.trace(rho4)}")
    t = rho4.reshape(2, 2, 2, 2)
    if keep == 0:
        return np.einsum("ajbj->ab", t)
    if keep == 1:
        return np.einsum("jajb->ab", t)
    raise DimensionError(f"subsystem index must be 0 or 1, got {keep}")


def check_kraus(kraus: Sequence[np.ndarray], tol: float = COMPLETENESS_TOL) -> None:
    """Raise ``ValueError`` unless ``sum K^dag K`` equals the identity."""
    if not kraus:
        raise ValueError("empty Kraus set")
    dim = kraus[0].shape[0]
    if any(k.shape != (dim, dim) for k in kraus):
        raise DimensionError("Kraus operators must share one square shape")
    total = sum(adjoint(k) @ k for k in kraus)
    err = np.max(np.abs(total - np.eye(dim)))
    if err > tol:
        raise ValueError(f"Kraus set incomplete: deviation {err:.3e}")


def apply_kraus(kraus: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ adjoint(k) for k in kraus)


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def validate_density(rho, tol: float = TRACE_TOL) -> np.ndarray:
    """Return ``rho`` as a complex array, raising if it is not a density matrix."""
    rho = _as_matrix(rho)
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    if not is_hermitian(rho, max(tol, HERMITIAN_TOL)):
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix trace {tr!r} differs from 1")
    return rho
