"""Deterministic ensemble reduction shared by the stochastic engines.

Trajectories are processed in fixed-size chunks; each chunk yields an
:class:`Accumulator` of raw sums and chunks are merged in index order. The
chunk layout depends only on ``chunk_size``, never on the worker count, so
averages are bit-identical however the chunks are scheduled.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_CHUNK = 500


def bloch_vectors(rho: np.ndarray) -> np.ndarray:
    """Bloch components ``(x, y, z)`` of (possibly unnormalized) 2x2 blocks."""
    r01 = rho[..., 0, 1]
    return np.stack([2.0 * r01.real, -2.0 * r01.imag,
                     (rho[..., 0, 0] - rho[..., 1, 1]).real], axis=-1)


@dataclass
class Accumulator:
    n: int
    s1: np.ndarray        # sum of rho, (T, 2, 2) complex
    s2_re: np.ndarray     # sum of Re(rho)^2
    s2_im: np.ndarray     # sum of Im(rho)^2
    bloch_s1: np.ndarray  # (T, 3)
    bloch_s2: np.ndarray  # (T, 3, 3)
    events: int = 0       # engine-specific counter, e.g. clamp events

    @classmethod
    def from_samples(cls, rho: np.ndarray, events: int = 0) -> "Accumulator":
        """``rho`` has shape ``(n_traj, T, 2, 2)``."""
        r = bloch_vectors(rho)
        return cls(
            n=rho.shape[0],
            s1=rho.sum(axis=0),
            s2_re=(rho.real ** 2).sum(axis=0),
            s2_im=(rho.imag ** 2).sum(axis=0),
            bloch_s1=r.sum(axis=0),
            bloch_s2=np.einsum("nti,ntj->tij", r, r),
            events=int(events),
        )

    def merge(self, other: "Accumulator") -> "Accumulator":
        return Accumulator(
            self.n + other.n,
            self.s1 + other.s1,
            self.s2_re + other.s2_re,
            self.s2_im + other.s2_im,
            self.bloch_s1 + other.bloch_s1,
            self.bloch_s2 + other.bloch_s2,
            self.events + other.events,
        )


@dataclass
class EnsembleAverage:
    """Per-time ensemble mean.

    ``stderr`` packs the standard error of the real parts in ``.real`` and of
    the imaginary parts in ``.imag``. ``trace`` is the raw mean trace before
    optional normalization. ``bloch_cov`` is the per-trajectory covariance
    of the (normalized) Bloch vector.
    """

    rho: np.ndarray
    stderr: np.ndarray
    trace: np.ndarray
    bloch_cov: np.ndarray
    n_traj: int
    events: int = 0


def finalize(acc: Accumulator, normalize: bool = True) -> EnsembleAverage:
    n = acc.n
    mean = acc.s1 / n
    var_re = np.maximum(acc.s2_re / n - mean.real ** 2, 0.0)
    var_im = np.maximum(acc.s2_im / n - mean.imag ** 2, 0.0)
    denom = max(n - 1, 1)
    scale = 1.0 / np.sqrt(denom)
    stderr = np.sqrt(var_re) * scale + 1j * np.sqrt(var_im) * scale
    rmean = acc.bloch_s1 / n
    cov = acc.bloch_s2 / n - np.einsum("ti,tj->tij", rmean, rmean)
    cov = cov * (n / denom)
    trace = np.trace(mean, axis1=-2, axis2=-1).real
    if normalize:
        mean = mean / trace[:, None, None]
        stderr = stderr / trace[:, None, None]
        cov = cov / (trace ** 2)[:, None, None]
        log.info("ensemble trace normalization factors: min %.6g max %.6g",
                 trace.min(), trace.max())
    mean = 0.5 * (mean + np.conj(np.swapaxes(mean, -1, -2)))
    return EnsembleAverage(mean, stderr, trace, cov, n, acc.events)


def chunk_ranges(n_traj: int, chunk_size: int = DEFAULT_CHUNK) -> list[range]:
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    return [range(a, min(a + chunk_size, n_traj)) for a in range(0, n_traj, chunk_size)]


def reduce_chunks(work: Callable[[range], Accumulator], n_traj: int,
                  chunk_size: int = DEFAULT_CHUNK, workers: int = 1) -> Accumulator:
    """Run ``work`` on each chunk and merge the results in chunk order.

    ``work`` must be picklable when ``workers > 1``.
    """
    chunks = chunk_ranges(n_traj, chunk_size)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    total = parts[0]
    for part in parts[1:]:
        total = total.merge(part)
    return total
