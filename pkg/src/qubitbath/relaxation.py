"""Relaxation-time laws and drive-regime classification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Q_ONE_TOL = 1e-9
DC_LIMIT_THRESHOLD = 10.0
FAST_FIELD_THRESHOLD = 0.1


class TauDomainError(ValueError):
    """The q-exponential base ``1 + (q-1) E_A beta`` is not positive."""

    def __init__(self, q: float, beta: float, beta_critical: float):
        self.q, self.beta, self.beta_critical = q, beta, beta_critical
        super().__init__(
            f"tau_q diverges for q={q}: beta={beta} is beyond the critical "
            f"inverse temperature beta_c={beta_critical:.6g}"
        )


class UndefinedTemperatureError(ValueError):
    pass


@dataclass(frozen=True)
class RelaxationSpec:
    tau0: float = 1.0
    E_A: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ValueError("tau0 must be > 0")
        if not self.E_A > 0:
            raise ValueError("E_A must be > 0")

    def with_q(self, q: float) -> "RelaxationSpec":
        return RelaxationSpec(self.tau0, self.E_A, q)

    def critical_beta(self) -> float:
        """Inverse temperature where tau_q diverges (``inf`` unless q < 1)."""
        if self.q < 1.0 - Q_ONE_TOL:
            return 1.0 / ((1.0 - self.q) * self.E_A)
        return math.inf


def tau_arrhenius(spec: RelaxationSpec, beta: float) -> float:
    if beta < 0:
        raise ValueError("beta must be >= 0")
    return spec.tau0 * math.exp(spec.E_A * beta)


def tau_q(spec: RelaxationSpec, beta: float) -> float:
    """Nonadditive relaxation time ``tau0 [1 + (q-1) E_A beta]^(1/(q-1))``.

    Falls back to the Arrhenius form when ``|q - 1| < 1e-9``.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    dq = spec.q - 1.0
    if abs(dq) < Q_ONE_TOL:
        return tau_arrhenius(spec, beta)
    base = 1.0 + dq * spec.E_A * beta
    if base <= 0.0:
        raise TauDomainError(spec.q, beta, spec.critical_beta())
    # exp/log1p form keeps precision for small (q-1) E_A beta
    return spec.tau0 * math.exp(math.log1p(dq * spec.E_A * beta) / dq)


def tau_q_curve(spec: RelaxationSpec, betas) -> np.ndarray:
    return np.array([tau_q(spec, float(b)) for b in np.asarray(betas, dtype=float)])


def beta_from_populations(rho, delta_eps: float) -> float:
    """Population-ratio inverse temperature ``ln(rho00 / rho11) / delta_eps``."""
    rho = np.asarray(rho)
    p0, p1 = float(rho[0, 0].real), float(rho[1, 1].real)
    if p0 <= 0 or p1 <= 0:
        raise UndefinedTemperatureError(
            f"temperature undefined for populations rho00={p0}, rho11={p1}")
    return math.log(p0 / p1) / delta_eps


def classify_regime(tau: float, omega: float,
                    dc_threshold: float = DC_LIMIT_THRESHOLD,
                    fast_threshold: float = FAST_FIELD_THRESHOLD) -> str:
    """Return ``dc_limit`` (omega tau >= 10), ``fast_field`` (omega tau <= 0.1)
    or ``intermediate``."""
    x = omega * tau
    if x >= dc_threshold:
        return "dc_limit"
    if x <= fast_threshold:
        return "fast_field"
    return "intermediate"


def omega_from_tau(tau: float) -> float:
    if not tau > 0:
        raise ValueError("tau must be > 0")
    return 1.0 / tau
