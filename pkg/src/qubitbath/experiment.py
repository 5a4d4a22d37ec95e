"""Experiment runner: engine dispatch, q-sweeps and CSV/JSON emission."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .linalg import KET0
from .metrics import (
    average_coherence_series,
    average_coherence_stderr,
    trace_distance_series,
)
from .oracle import integrate_lme
from .qsd import noise_paths, run_qsd_ensemble
from .relaxation import TauDomainError, tau_q
from .vqs import evolve_vqs_batch, run_vqs_ensemble, write_parameter_trace

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "rho00", "rho11", "re_rho01", "im_rho01", "coherence",
               "avg_coherence", "trace_dist", "stderr_rho11")
TAU_BETA_POINTS = 91
# reversals smaller than this fraction of the series range are ignored
TURN_REL_TOL = 1e-4


@dataclass
class RunResult:
    times: np.ndarray
    rho: np.ndarray
    stderr: np.ndarray            # packed: .real = SE of real parts, .imag = SE of imag parts
    oracle: np.ndarray
    avg_coherence_stderr: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def populations(self) -> np.ndarray:
        return np.stack([self.rho[:, 0, 0].real, self.rho[:, 1, 1].real], axis=-1)

    @property
    def coherence(self) -> np.ndarray:
        return 2.0 * np.abs(self.rho[:, 0, 1])

    @property
    def avg_coherence(self) -> np.ndarray:
        return average_coherence_series(self.rho)

    @property
    def trace_distance(self) -> np.ndarray:
        return trace_distance_series(self.rho, self.oracle)

    def table(self) -> np.ndarray:
        r = self.rho
        return np.column_stack([
            self.times, r[:, 0, 0].real, r[:, 1, 1].real, r[:, 0, 1].real, r[:, 0, 1].imag,
            self.coherence, self.avg_coherence, self.trace_distance, self.stderr[:, 1, 1].real,
        ])


def initial_density() -> np.ndarray:
    return np.outer(KET0, KET0.conj())


def run_oracle(config: ExperimentConfig) -> np.ndarray:
    return integrate_lme(initial_density(), config.drive, config.diss, config.grid,
                         refine=config.oracle_refine)


def run_experiment(config: ExperimentConfig, workers: int | None = None,
                   out_dir: str | None = None) -> RunResult:
    """Run the configured engine and the exact oracle on the same grid.

    With ``config.parameter_trace`` and an ``out_dir``, the VQS parameters of
    trajectory 0 are written to ``params_traj0.csv``.
    """
    workers = config.workers if workers is None else workers
    start = time.perf_counter()
    oracle = run_oracle(config)
    T = len(config.grid)
    meta = {"engine": config.engine, "seed": config.master_seed,
            "config_hash": config.config_hash(), "n_traj": config.n_traj,
            "backend_mode": config.backend_mode, "omega": config.drive.omega,
            "f": config.diss.f, "q": config.relaxation.q, "clamp_events": 0}
    if config.engine == "oracle":
        rho, stderr = oracle.copy(), np.zeros((T, 2, 2), dtype=complex)
        ac_se = np.zeros(T)
        meta["n_traj"] = 0
    else:
        if config.engine == "qsd":
            ens = run_qsd_ensemble(KET0, config.drive, config.diss, config.grid, config.n_traj,
                                   config.gamma, config.master_seed,
                                   chunk_size=config.chunk_size, workers=workers)
        else:
            ens = run_vqs_ensemble(config.ansatz, config.drive, config.diss, config.grid,
                                   config.n_traj, config.gamma, config.master_seed,
                                   config.backend_mode, config.solver, config.shots_or_none,
                                   config.noise_model, config.chunk_size, workers)
            meta["clamp_events"] = ens.events
            if config.parameter_trace and out_dir is not None:
                noise = noise_paths(config.master_seed, range(1), config.gamma, config.grid)
                traj = evolve_vqs_batch(config.ansatz, config.drive, config.diss, noise,
                                        config.grid, [0], config.backend_mode, config.solver,
                                        config.shots_or_none, config.noise_model,
                                        config.master_seed)
                write_parameter_trace(os.path.join(out_dir, "params_traj0.csv"), traj)
        rho, stderr = ens.rho, ens.stderr
        ac_se = average_coherence_stderr(rho, ens.bloch_cov, ens.n_traj)
    meta["wall_time_s"] = time.perf_counter() - start
    return RunResult(config.grid.times, rho, stderr, oracle, ac_se, meta)


# -- q sweeps -----------------------------------------------------------------

@dataclass
class SweepResult:
    runs: dict                      # q -> RunResult
    tau_table: np.ndarray           # columns: beta, tau_q for each q (nan outside domain)
    q_list: tuple
    errors: dict                    # q -> message


def tau_table(config: ExperimentConfig, q_list, n_points: int = TAU_BETA_POINTS) -> np.ndarray:
    """``tau_q(beta)`` on ``beta in [0, 0.9 / E_A]``; entries outside the domain are nan."""
    betas = np.linspace(0.0, 0.9 / config.relaxation.E_A, n_points)
    cols = [betas]
    for q in q_list:
        spec = config.relaxation.with_q(q)
        col = []
        for b in betas:
            try:
                col.append(tau_q(spec, float(b)))
            except TauDomainError:
                col.append(math.nan)
        cols.append(np.array(col))
    return np.column_stack(cols)


def sweep_q(config: ExperimentConfig, q_list=None, workers: int | None = None) -> SweepResult:
    """One run per ``q`` with the preset omega re-derived from ``tau_q(beta_E)``."""
    q_list = tuple(config.q_list if q_list is None else q_list)
    if not q_list:
        raise ValueError("q_list must be nonempty")
    runs, errors = {}, {}
    for q in q_list:
        try:
            cfg = config.with_q(q)
        except ValueError as exc:
            errors[q] = str(exc)
            log.error("q=%g skipped: %s", q, exc)
            continue
        runs[q] = run_experiment(cfg, workers)
    return SweepResult(runs, tau_table(config, q_list), q_list, errors)


# -- shape diagnostics ----------------------------------------------------------

def count_turning_points(series, rel_tol: float = TURN_REL_TOL) -> int:
    """Sign changes of the discrete derivative, with hysteresis.

    A reversal counts only once the series has moved back by more than
    ``rel_tol * (max - min)`` from its running extreme, so sub-threshold
    ripple on a sampled grid is not counted.
    """
    x = np.asarray(series, dtype=float)
    span = float(x.max() - x.min()) if x.size else 0.0
    if span == 0.0:
        return 0
    tol = rel_tol * span
    direction, hi, lo, turns = 0, x[0], x[0], 0
    for v in x[1:]:
        if direction == 0:
            hi, lo = max(hi, v), min(lo, v)
            if hi - x[0] > tol:
                direction = 1
            elif x[0] - lo > tol:
                direction = -1
        elif direction == 1:
            if v > hi:
                hi = v
            elif hi - v > tol:
                turns += 1
                direction, lo = -1, v
        else:
            if v < lo:
                lo = v
            elif v - lo > tol:
                turns += 1
                direction, hi = 1, v
    return turns


def raw_sign_changes(series) -> int:
    d = np.sign(np.diff(np.asarray(series, dtype=float)))
    d = d[d != 0]
    return int(np.count_nonzero(d[1:] != d[:-1]))


# -- files -------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.17g" % x


def write_table(path, header, rows: np.ndarray) -> None:
    """Comma-separated, ``%.17g`` numbers, LF line endings; overwrites."""
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in np.asarray(rows, dtype=float))
    data = ("\n".join(lines) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split(",")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:] if ln]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def emit_csv(result: RunResult, path) -> None:
    write_table(path, CSV_COLUMNS, result.table())


def emit_metadata(result: RunResult, path, extra: dict | None = None) -> None:
    meta = dict(result.metadata)
    if extra:
        meta.update(extra)
    meta["columns"] = list(CSV_COLUMNS)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=repr)
        fh.write("\n")


def emit_tau_table(sweep: SweepResult, path) -> None:
    header = ["beta"] + [f"tau_q={q:g}" for q in sweep.q_list]
    write_table(path, header, sweep.tau_table)
