"""Linear quantum-state-diffusion (QSD) trajectories.

Each trajectory carries an unnormalized state driven by the non-Hermitian
generator of :func:`qubitbath.model.effective_matrix`. The two complex noise
channels (``z1`` for sigma_-, ``z2`` for sigma_+) are Ornstein-Uhlenbeck
processes sampled on the time grid and held constant across each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from .ensemble import (
    DEFAULT_CHUNK,
    Accumulator,
    EnsembleAverage,
    finalize,
    reduce_chunks,
)
from .model import DissipatorSpec, DriveSpec, effective_matrix
from .oracle import TimeGrid
from .rng import complex_normal, substream

NORM_OVERFLOW = 1e6
N_CHANNELS = 2


class UnstableTrajectoryError(RuntimeError):
    def __init__(self, trajectory: int, t: float, squared_norm: float):
        self.trajectory = trajectory
        super().__init__(
            f"trajectory {trajectory}: squared norm {squared_norm:.3g} exceeds "
            f"{NORM_OVERFLOW:g} at t={t:.6g}")


def ou_step(z, gamma: float, dt: float, u):
    """Exact Ornstein-Uhlenbeck update with stationary variance ``gamma / 2``."""
    decay = math.exp(-gamma * dt)
    return z * decay + math.sqrt(0.5 * gamma * (1.0 - decay * decay)) * u


def ou_path(u: np.ndarray, gamma: float, dt: float) -> np.ndarray:
    """OU samples on a grid from standard complex normals ``u`` (last axis = time).

    ``z[..., 0] = sqrt(gamma/2) u[..., 0]`` so the path starts stationary.
    """
    z = np.empty_like(u)
    z[..., 0] = math.sqrt(0.5 * gamma) * u[..., 0]
    for k in range(1, u.shape[-1]):
        z[..., k] = ou_step(z[..., k - 1], gamma, dt, u[..., k])
    return z


@dataclass(frozen=True)
class NoiseStream:
    """Noise of one trajectory, reproducible from its substream key."""

    master_seed: int
    trajectory: int
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("OU rate gamma must be > 0")

    def draws(self, n_points: int) -> np.ndarray:
        """Standard complex normals, shape ``(N_CHANNELS, n_points)``."""
        return np.stack([
            complex_normal(substream(self.master_seed, self.trajectory, ch, "ou"), n_points)
            for ch in range(N_CHANNELS)
        ])

    def path(self, grid: TimeGrid) -> np.ndarray:
        return ou_path(self.draws(len(grid)), self.gamma, grid.dt)


def noise_paths(master_seed: int, trajectories, gamma: float, grid: TimeGrid) -> np.ndarray:
    """Noise for many trajectories, shape ``(n, N_CHANNELS, len(grid))``."""
    u = np.stack([NoiseStream(master_seed, j, gamma).draws(len(grid)) for j in trajectories])
    return ou_path(u, gamma, grid.dt)


@dataclass
class TrajectoryBatch:
    """Unnormalized states of several trajectories on a common grid."""

    times: np.ndarray
    psi: np.ndarray            # (n_traj, T, 2)
    trajectory_ids: np.ndarray

    @property
    def squared_norm(self) -> np.ndarray:
        return np.sum(np.abs(self.psi) ** 2, axis=-1)

    def outer_products(self) -> np.ndarray:
        return np.einsum("nti,ntj->ntij", self.psi, self.psi.conj())


def _apply(H, psi):
    return -1j * np.einsum("nij,nj->ni", H, psi)


def evolve_batch(psi0, drive: DriveSpec, diss: DissipatorSpec, noise: np.ndarray,
                 grid: TimeGrid, trajectory_ids=None, refine: int = 1) -> TrajectoryBatch:
    """RK4 integration of ``d psi/dt = -i H_eff psi`` for a batch.

    Args:
        psi0: initial state, shape ``(2,)``; normalized.
        noise: OU samples, shape ``(n, 2, len(grid))``; sample ``k`` is used
            on the interval ``[t_k, t_{k+1})``.
        refine: RK4 substeps per grid interval (noise still held fixed).

    The norm is never renormalized.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.vdot(psi0, psi0).real - 1.0) > 1e-9:
        raise ValueError("psi0 must be normalized")
    n = noise.shape[0]
    ids = np.arange(n) if trajectory_ids is None else np.asarray(trajectory_ids)
    times = grid.times
    h = grid.dt / refine
    out = np.empty((n, len(times), 2), dtype=complex)
    psi = np.broadcast_to(psi0, (n, 2)).copy()
    out[:, 0] = psi
    for k in range(grid.n_steps):
        z1, z2 = noise[:, 0, k], noise[:, 1, k]
        for r in range(refine):
            t = times[k] + r * h
            Ha = effective_matrix(drive, diss, z1, z2, t)
            Hm = effective_matrix(drive, diss, z1, z2, t + 0.5 * h)
            Hb = effective_matrix(drive, diss, z1, z2, t + h)
            k1 = _apply(Ha, psi)
            k2 = _apply(Hm, psi + 0.5 * h * k1)
            k3 = _apply(Hm, psi + 0.5 * h * k2)
            k4 = _apply(Hb, psi + h * k3)
            psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        nrm = np.sum(np.abs(psi) ** 2, axis=-1)
        bad = ~(nrm <= NORM_OVERFLOW)
        if np.any(bad):
            j = int(np.argmax(bad))
            raise UnstableTrajectoryError(int(ids[j]), float(times[k + 1]), float(nrm[j]))
        out[:, k + 1] = psi
    return TrajectoryBatch(times, out, ids)


def evolve_trajectory_exact(psi0, drive: DriveSpec, diss: DissipatorSpec,
                            noise: NoiseStream | np.ndarray, grid: TimeGrid,
                            refine: int = 1) -> TrajectoryBatch:
    """Single trajectory; ``noise`` is a :class:`NoiseStream` or a
    ``(2, len(grid))`` array of samples."""
    if isinstance(noise, NoiseStream):
        samples, ids = noise.path(grid), [noise.trajectory]
    else:
        samples, ids = np.asarray(noise, dtype=complex), [0]
    return evolve_batch(psi0, drive, diss, samples[None], grid, ids, refine)


def ensemble_average(trajectories: list[TrajectoryBatch] | TrajectoryBatch,
                     normalize: bool = True) -> EnsembleAverage:
    """Mean of ``|psi><psi|`` over trajectories, in trajectory-index order."""
    if isinstance(trajectories, TrajectoryBatch):
        trajectories = [trajectories]
    times = trajectories[0].times
    acc = None
    for batch in trajectories:
        if batch.times.shape != times.shape or not np.array_equal(batch.times, times):
            raise ValueError("trajectories do not share a common time grid")
        part = Accumulator.from_samples(batch.outer_products())
        acc = part if acc is None else acc.merge(part)
    return finalize(acc, normalize)


def _qsd_chunk(chunk: range, psi0, drive, diss, grid, gamma, master_seed, refine) -> Accumulator:
    noise = noise_paths(master_seed, chunk, gamma, grid)
    batch = evolve_batch(psi0, drive, diss, noise, grid, np.array(chunk), refine)
    return Accumulator.from_samples(batch.outer_products())


def run_qsd_ensemble(psi0, drive: DriveSpec, diss: DissipatorSpec, grid: TimeGrid,
                     n_traj: int, gamma: float, master_seed: int, normalize: bool = True,
                     refine: int = 1, chunk_size: int = DEFAULT_CHUNK,
                     workers: int = 1) -> EnsembleAverage:
    work = partial(_qsd_chunk, psi0=np.asarray(psi0, dtype=complex), drive=drive,
                   diss=diss, grid=grid, gamma=gamma, master_seed=master_seed,
                   refine=refine)
    acc = reduce_chunks(work, n_traj, chunk_size, workers)
    return finalize(acc, normalize)
