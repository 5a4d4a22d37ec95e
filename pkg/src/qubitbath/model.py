"""Physical model of the driven qubit coupled to a finite-temperature bath.

Units: hbar = k_B = g*mu_B = 1. Field amplitudes quoted in mT or K are used as
dimensionless coefficients.

The dissipator is generalized amplitude damping (GAD) with jump operators
``sqrt(J1 (1-f)) sigma_-`` (emission into the bath) and ``sqrt(J2 f)
sigma_+`` (absorption), where ``f`` is the bath occupation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .linalg import (
    I2,
    PAULI,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Z,
    adjoint,
    validate_density,
)

log = logging.getLogger(__name__)

PAULI_LABELS = tuple(PAULI)


@dataclass(frozen=True)
class PauliTerm:
    coefficient: complex
    pauli: str

    def __post_init__(self):
        if self.pauli not in PAULI_LABELS:
            raise ValueError(f"unknown Pauli label {self.pauli!r}")
        if not np.isfinite(complex(self.coefficient)):
            raise ValueError("Pauli coefficient must be finite")


@dataclass(frozen=True)
class DissipatorSpec:
    """GAD rates. ``literal_noise_coupling`` swaps the ``sqrt(J)`` noise
    prefactor for ``J/2``. Only ``sqrt(J)`` unravels the master equation;
    the alternative is kept for comparison runs."""

    J1: float = 1.0
    J2: float = 1.0
    f: float = 0.0
    literal_noise_coupling: bool = False

    def __post_init__(self):
        if self.J1 < 0 or self.J2 < 0:
            raise ValueError("coupling rates J1, J2 must be >= 0")
        if not 0.0 <= self.f <= 0.5:
            raise ValueError(f"bath occupation f must lie in [0, 0.5], got {self.f}")

    @classmethod
    def uniform(cls, J: float, f: float, **kw) -> "DissipatorSpec":
        return cls(J1=J, J2=J, f=f, **kw)

    @property
    def decay_rates(self) -> tuple[float, float]:
        """Rates of the sigma_- and sigma_+ channels."""
        return self.J1 * (1.0 - self.f), self.J2 * self.f

    def noise_amplitudes(self) -> tuple[float, float]:
        if self.literal_noise_coupling:
            return (0.5 * self.J1 * math.sqrt(1.0 - self.f),
                    0.5 * self.J2 * math.sqrt(self.f))
        g_minus, g_plus = self.decay_rates
        return math.sqrt(g_minus), math.sqrt(g_plus)


@dataclass(frozen=True)
class DriveSpec:
    """Transverse drive.

    ``oscillatory``: x-field ``B_AC cos(omega t)``.
    ``composite``: x-field ``sqrt(h2^2 s + h1^2 (1 - s))`` with
    ``s = clamp(omega t, 0, 1)``, or a 0 -> 1 -> 0 triangle wave when
    ``triangular`` is set.
    """

    protocol: str = "oscillatory"
    B_DC: float = 2.0
    B_AC: float = 0.5
    h1: float = 1.0
    h2: float = 3.0
    omega: float = 1.0
    triangular: bool = False

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.protocol not in ("oscillatory", "composite"):
            out.append(f"protocol must be 'oscillatory' or 'composite', got {self.protocol!r}")
        if not self.omega > 0:
            out.append("omega > 0 violated")
        if self.protocol == "oscillatory" and not self.B_DC >= self.B_AC:
            out.append(f"B_DC >= B_AC violated ({self.B_DC} < {self.B_AC})")
        if self.protocol == "composite":
            if self.h1 < 0 or self.h2 < 0:
                out.append("h1, h2 must be >= 0")
            if not self.B_DC >= max(self.h1, self.h2):
                out.append(f"B_DC >= max(h1, h2) violated ({self.B_DC} < {max(self.h1, self.h2)})")
        return out


@dataclass(frozen=True)
class BathSpec:
    """Environment temperature and the energy argument of the Fermi factor.

    ``delta_eps`` defaults to the Zeeman gap ``2 B_DC`` and ``E_offset`` to
    ``delta_eps`` when built through :func:`BathSpec.for_drive`.
    """

    T_env: float = 10.0
    delta_eps: float = 4.0
    E_offset: float = 4.0

    def __post_init__(self):
        if not self.T_env > 0:
            raise ValueError("T_env must be > 0")
        if not self.delta_eps > 0:
            raise ValueError("delta_eps must be > 0")

    @property
    def beta(self) -> float:
        return 1.0 / self.T_env

    @classmethod
    def for_drive(cls, drive: DriveSpec, T_env: float, E_offset: float | None = None):
        gap = 2.0 * drive.B_DC
        return cls(T_env=T_env, delta_eps=gap, E_offset=gap if E_offset is None else E_offset)


def fermi_factor(bath: BathSpec) -> float:
    """Fermi-Dirac occupation ``1 / (1 + exp(E_offset / T_env))``."""
    if not bath.T_env > 0:
        raise ValueError("temperature must be positive")
    x = bath.E_offset / bath.T_env
    # logistic form that cannot overflow for large |x|
    f = math.exp(-x) / (1.0 + math.exp(-x)) if x >= 0 else 1.0 / (1.0 + math.exp(x))
    if f > 0.5:
        log.warning("bath occupation f=%.4f exceeds 0.5 (E_offset < 0)", f)
    return f


def composite_progress(drive: DriveSpec, t):
    wt = drive.omega * np.asarray(t, dtype=float)
    if drive.triangular:
        phase = np.mod(wt, 2.0)
        return np.where(phase > 1.0, 2.0 - phase, phase)
    return np.clip(wt, 0.0, 1.0)


def drive_field(drive: DriveSpec, t):
    """Amplitude of the sigma_x term at time ``t`` (scalar or array)."""
    if drive.protocol == "oscillatory":
        out = drive.B_AC * np.cos(drive.omega * np.asarray(t, dtype=float))
    else:
        s = composite_progress(drive, t)
        out = np.sqrt(drive.h2 ** 2 * s + drive.h1 ** 2 * (1.0 - s))
    return float(out) if np.ndim(out) == 0 else out


def hamiltonian_at(drive: DriveSpec, t: float) -> list[PauliTerm]:
    return [PauliTerm(drive.B_DC, "Z"), PauliTerm(drive_field(drive, t), "X")]


def hamiltonian_matrix(drive: DriveSpec, t: float) -> np.ndarray:
    return drive.B_DC * SIGMA_Z + drive_field(drive, t) * SIGMA_X


def terms_to_matrix(terms: Iterable[PauliTerm]) -> np.ndarray:
    out = np.zeros((2, 2), dtype=complex)
    for term in terms:
        out = out + complex(term.coefficient) * PAULI[term.pauli]
    return out


def effective_hamiltonian(drive: DriveSpec, diss: DissipatorSpec,
                          z1: complex, z2: complex, t: float) -> list[PauliTerm]:
    """Non-Hermitian generator of the linear state-diffusion trajectory.

    H_eff = H(t) - (i/2) [J1 (1-f) |1><1| + J2 f |0><0|]
            - i [a1 z1* sigma_- + a2 z2* sigma_+]

    with ``|1><1| = (I - Z)/2`` and ``|0><0| = (I + Z)/2``. The noise
    amplitudes ``a1, a2`` come from :meth:`DissipatorSpec.noise_amplitudes`.
    """
    g_minus, g_plus = diss.decay_rates
    a1, a2 = diss.noise_amplitudes()
    terms = hamiltonian_at(drive, t)
    if g_minus == 0 and g_plus == 0:
        return terms
    # -(i/2)[g_minus (I - Z)/2 + g_plus (I + Z)/2]
    terms.append(PauliTerm(-0.25j * (g_minus + g_plus), "I"))
    terms.append(PauliTerm(-0.25j * (g_plus - g_minus), "Z"))
    terms.append(PauliTerm(-1j * a1 * np.conj(z1), "-"))
    terms.append(PauliTerm(-1j * a2 * np.conj(z2), "+"))
    return terms


def effective_matrix(drive: DriveSpec, diss: DissipatorSpec, z1, z2, t) -> np.ndarray:
    """Matrix form of :func:`effective_hamiltonian`, broadcast over arrays of
    noise samples ``z1, z2`` (shape ``(n,)`` gives ``(n, 2, 2)``)."""
    g_minus, g_plus = diss.decay_rates
    a1, a2 = diss.noise_amplitudes()
    base = hamiltonian_matrix(drive, t) - 0.5j * np.diag([g_plus, g_minus])
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    noise = (-1j * a1 * np.conj(z1))[..., None, None] * SIGMA_MINUS \
        + (-1j * a2 * np.conj(z2))[..., None, None] * SIGMA_PLUS
    return base + noise


def jump_operators(diss: DissipatorSpec) -> list[np.ndarray]:
    g_minus, g_plus = diss.decay_rates
    return [math.sqrt(g_minus) * SIGMA_MINUS, math.sqrt(g_plus) * SIGMA_PLUS]


def dissipator(rho: np.ndarray, diss: DissipatorSpec) -> np.ndarray:
    out = np.zeros((2, 2), dtype=complex)
    for L in jump_operators(diss):
        LdL = adjoint(L) @ L
        out += L @ rho @ adjoint(L) - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def lindblad_rhs(rho, drive: DriveSpec, diss: DissipatorSpec, t: float) -> np.ndarray:
    """``d rho / dt = -i [H(t), rho] + L(rho)``."""
    rho = validate_density(rho)
    H = hamiltonian_matrix(drive, t)
    return -1j * (H @ rho - rho @ H) + dissipator(rho, diss)


def liouvillian_parts(drive: DriveSpec, diss: DissipatorSpec) -> tuple[np.ndarray, np.ndarray]:
    """Superoperators ``(L0, Lx)`` with ``vec(d rho/dt) = (L0 + x(t) Lx) vec(rho)``,
    where ``x(t)`` is :func:`drive_field` and ``vec`` is row-major."""

    def comm(H):
        return -1j * (np.kron(H, I2) - np.kron(I2, H.T))

    L0 = comm(drive.B_DC * SIGMA_Z)
    for L in jump_operators(diss):
        LdL = adjoint(L) @ L
        L0 = L0 + np.kron(L, L.conj()) - 0.5 * (np.kron(LdL, I2) + np.kron(I2, LdL.T))
    return L0, comm(SIGMA_X)


def split_hermitian(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A, B)`` Hermitian with ``matrix = A + i B``."""
    A = 0.5 * (matrix + adjoint(matrix))
    B = -0.5j * (matrix - adjoint(matrix))
    return A, B


def pauli_decompose(terms: Sequence[PauliTerm]) -> dict[str, complex]:
    """Rewrite a term list over {I, X, Y, Z}; ladder operators are expanded
    as ``sigma_+ = (X - iY)/2`` and ``sigma_- = (X + iY)/2``."""
    out = {"I": 0j, "X": 0j, "Y": 0j, "Z": 0j}
    for term in terms:
        c = complex(term.coefficient)
        if term.pauli == "+":
            out["X"] += 0.5 * c
            out["Y"] += -0.5j * c
        elif term.pauli == "-":
            out["X"] += 0.5 * c
            out["Y"] += 0.5j * c
        else:
            out[term.pauli] += c
    return out
