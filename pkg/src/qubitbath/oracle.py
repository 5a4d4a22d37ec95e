"""Reference evolution of the master equation.

:func:`integrate_lme` runs classical RK4 on the vectorized density matrix;
:func:`analytic_gad` is the closed-form solution of the drive-free problem
and serves as the ground truth for the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import adjoint, validate_density
from .model import DissipatorSpec, DriveSpec, drive_field, liouvillian_parts

RENORMALIZE_TOL = 1e-9
INSTABILITY_TOL = 1e-6


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t0: float = 0.0
    t1: float = 15.0
    dt: float = 0.15

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ValueError("t1 must exceed t0")
        if not 0 < self.dt <= self.t1 - self.t0:
            raise ValueError("dt must satisfy 0 < dt <= t1 - t0")

    @property
    def n_steps(self) -> int:
        return int(round((self.t1 - self.t0) / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def __len__(self) -> int:
        return self.n_steps + 1


def _rk4_linear(y, h, L0, Lx, xa, xm, xb):
    k1 = (L0 + xa * Lx) @ y
    Lm = L0 + xm * Lx
    k2 = Lm @ (y + 0.5 * h * k1)
    k3 = Lm @ (y + 0.5 * h * k2)
    k4 = (L0 + xb * Lx) @ (y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_lme(rho0, drive: DriveSpec, diss: DissipatorSpec, grid: TimeGrid,
                  refine: int = 1) -> np.ndarray:
    """Integrate the master equation and return ``rho`` on the grid.

    Args:
        rho0: initial density matrix.
        drive, diss: model specification.
        grid: output grid; the first entry is ``rho0``.
        refine: number of RK4 substeps per grid interval.

    Returns:
        Array of shape ``(len(grid), 2, 2)``.

    Raises:
        IntegrationError: if the trace drifts by more than 1e-6 within one
            grid interval or the state becomes non-finite.
    """
    rho = validate_density(rho0).copy()
    if refine < 1:
        raise ValueError("refine must be >= 1")
    L0, Lx = liouvillian_parts(drive, diss)
    h = grid.dt / refine
    n_sub = grid.n_steps * refine
    t_nodes = grid.t0 + h * np.arange(n_sub + 1)
    x_nodes = np.asarray(drive_field(drive, t_nodes), dtype=float)
    x_mid = np.asarray(drive_field(drive, t_nodes[:-1] + 0.5 * h), dtype=float)

    out = np.empty((len(grid), 2, 2), dtype=complex)
    out[0] = rho
    y = rho.reshape(4)
    k = 0
    for n in range(1, len(grid)):
        for _ in range(refine):
            y = _rk4_linear(y, h, L0, Lx, x_nodes[k], x_mid[k], x_nodes[k + 1])
            k += 1
        rho = y.reshape(2, 2)
        if not np.all(np.isfinite(rho)):
            raise IntegrationError(f"non-finite state at t={grid.times[n]:.6g}; reduce dt")
        rho = 0.5 * (rho + adjoint(rho))
        drift = abs(np.trace(rho).real - 1.0)
        if drift > INSTABILITY_TOL:
            raise IntegrationError(
                f"trace drift {drift:.2e} at t={grid.times[n]:.6g}; reduce dt")
        if drift > RENORMALIZE_TOL:
            rho = rho / np.trace(rho).real
        out[n] = rho
        y = rho.reshape(4).copy()
    return out


def analytic_gad(rho0, J: float, f: float, t) -> np.ndarray:
    """Closed-form drive-free GAD evolution.

    With ``p = 1 - exp(-J t)``: ``rho11(t) = rho11(0)(1-p) + p f`` and
    ``rho01(t) = rho01(0) sqrt(1-p)``. Vectorized over ``t``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    t = np.asarray(t, dtype=float)
    keep = np.exp(-J * t)  # 1 - p
    p11 = rho0[1, 1].real * keep + (1.0 - keep) * f
    c01 = rho0[0, 1] * np.sqrt(keep)
    out = np.empty(t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = 1.0 - p11
    out[..., 1, 1] = p11
    out[..., 0, 1] = c01
    out[..., 1, 0] = np.conj(c01)
    return out


def steady_state(diss: DissipatorSpec) -> np.ndarray:
    if not math.isclose(diss.J1, diss.J2):
        raise ValueError("steady_state requires J1 == J2")
    if diss.J1 == 0:
        raise ValueError("no unique steady state without dissipation (J = 0)")
    return np.diag([1.0 - diss.f, diss.f]).astype(complex)
