"""Distance and coherence measures for single-qubit density matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import herm_eigvals, validate_density

VALIDITY_TOL = 1e-9


@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule for ``int_0^{2pi} int_0^pi g(theta, phi) sin(theta) dtheta dphi``.

    Gauss-Legendre in ``theta`` (the ``sin`` factor is folded into the
    weights) times the periodic trapezoid rule in ``phi``.
    """

    n_theta: int = 32
    n_phi: int = 64
    theta: np.ndarray = field(init=False, repr=False, compare=False)
    phi: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 1:
            raise ValueError("node counts must be positive")
        x, w = np.polynomial.legendre.leggauss(self.n_theta)
        theta = 0.5 * math.pi * (x + 1.0)
        w_theta = 0.5 * math.pi * w * np.sin(theta)
        phi = 2.0 * math.pi * np.arange(self.n_phi) / self.n_phi
        w_phi = np.full(self.n_phi, 2.0 * math.pi / self.n_phi)
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        object.__setattr__(self, "theta", th.ravel())
        object.__setattr__(self, "phi", ph.ravel())
        object.__setattr__(self, "weights", np.outer(w_theta, w_phi).ravel())


def trace_distance(rho, sigma) -> float:
    """``0.5 * sum |eig(rho - sigma)|``."""
    rho = validate_density(rho, VALIDITY_TOL)
    sigma = validate_density(sigma, VALIDITY_TOL)
    diff = rho - sigma
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(herm_eigvals(diff))))


def trace_distance_series(rho, sigma) -> np.ndarray:
    """Vectorized trace distance over leading axes (2x2 only).

    For a traceless Hermitian 2x2 difference the eigenvalues are
    ``+-sqrt(d^2 + |b|^2)``; a residual trace is handled exactly.
    """
    diff = np.asarray(rho) - np.asarray(sigma)
    a, d, b = diff[..., 0, 0].real, diff[..., 1, 1].real, diff[..., 0, 1]
    mean, r = 0.5 * (a + d), np.hypot(0.5 * (a - d), np.abs(b))
    return 0.5 * (np.abs(mean - r) + np.abs(mean + r))


def coherence(rho) -> float:
    """l1 coherence: sum of the moduli of the off-diagonal entries."""
    rho = np.asarray(rho)
    return float(np.sum(np.abs(rho)) - np.sum(np.abs(np.diag(rho))))


def basis_rotation(theta, phi) -> np.ndarray:
    c, s = np.cos(0.5 * np.asarray(theta)), np.sin(0.5 * np.asarray(theta))
    e = np.exp(1j * np.asarray(phi))
    U = np.empty(np.shape(c) + (2, 2), dtype=complex)
    U[..., 0, 0] = c
    U[..., 0, 1] = -e * s
    U[..., 1, 0] = np.conj(e) * s
    U[..., 1, 1] = c
    return U


def rotated_coherence(rho, theta, phi):
    """Coherence of ``U(theta, phi) rho U^dag``; broadcasts over angle arrays."""
    U = basis_rotation(theta, phi)
    r = U @ np.asarray(rho, dtype=complex) @ np.conj(np.swapaxes(U, -1, -2))
    out = np.abs(r[..., 0, 1]) + np.abs(r[..., 1, 0])
    return float(out) if np.ndim(out) == 0 else out


_DEFAULT_QUAD = None


def default_quadrature() -> SphereQuadrature:
    global _DEFAULT_QUAD
    if _DEFAULT_QUAD is None:
        _DEFAULT_QUAD = SphereQuadrature()
    return _DEFAULT_QUAD


def _eigenframe(rhos) -> np.ndarray:
    # The rotated axis sweeps the sphere with the uniform measure, so the
    # average is unchanged if rho is first rotated to diagonal form. That
    # moves the integrand's kink (axis parallel to the Bloch vector) onto
    # the poles, where the sin(theta) weight removes it.
    w = np.linalg.eigvalsh(np.asarray(rhos, dtype=complex))
    out = np.zeros(w.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0], out[..., 1, 1] = w[..., 1], w[..., 0]
    return out


def average_coherence(rho, quad: SphereQuadrature | None = None) -> float:
    """Sphere average ``(1/4pi) int C(theta, phi) sin(theta) dtheta dphi``."""
    return float(average_coherence_series(np.asarray(rho)[None], quad)[0])


def average_coherence_series(rhos, quad: SphereQuadrature | None = None) -> np.ndarray:
    quad = quad or default_quadrature()
    U = basis_rotation(quad.theta, quad.phi)          # (Q, 2, 2)
    Ud = np.conj(np.swapaxes(U, -1, -2))
    rot = np.einsum("qij,tjk,qkl->tqil", U, _eigenframe(rhos), Ud)
    vals = np.abs(rot[..., 0, 1]) + np.abs(rot[..., 1, 0])
    return vals @ quad.weights / (4.0 * math.pi)


def bloch_length(rho) -> np.ndarray:
    rho = np.asarray(rho)
    r01 = rho[..., 0, 1]
    rz = (rho[..., 0, 0] - rho[..., 1, 1]).real
    return np.sqrt(4.0 * np.abs(r01) ** 2 + rz ** 2)


def average_coherence_stderr(rho, bloch_cov, n_traj: int) -> np.ndarray:
    """Delta-method standard error of the sphere-averaged coherence.

    For a qubit the average equals ``(pi/4) |r|``, so its fluctuation is the
    Bloch-vector covariance projected on ``r / |r|``.
    """
    rho = np.asarray(rho)
    r01 = rho[..., 0, 1]
    r = np.stack([2 * r01.real, -2 * r01.imag, (rho[..., 0, 0] - rho[..., 1, 1]).real], -1)
    length = np.linalg.norm(r, axis=-1, keepdims=True)
    rhat = np.divide(r, length, out=np.zeros_like(r), where=length > 0)
    var = np.einsum("...i,...ij,...j->...", rhat, np.asarray(bloch_cov), rhat)
    return 0.25 * math.pi * np.sqrt(np.maximum(var, 0.0) / n_traj)
