"""Variational simulation of linear state-diffusion trajectories.

The unnormalized trajectory state is represented as ``Psi = alpha U(theta)|0>``
with a layered ansatz ``U = prod_k exp(i theta_k P_k)`` (first gate applied
first). Parameters follow McLachlan's rule ``M dTheta/dt = V`` with

    M_ij = Re <d_i Psi | d_j Psi>,    V_i = Im <d_i Psi | H_eff | Psi>,

which is the stationarity condition of ``|| d Psi/dt + i H_eff Psi ||^2``.
``Theta = (alpha, theta_1, ..., theta_K)`` is integrated with RK4, the noise
samples being held fixed across each step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import partial

import numpy as np

from .backend.circuit import Circuit, GateOp, pauli_rotation
from .backend.hadamard import ancilla_expectation, overlap_circuit
from .backend.noise import NoiseModel
from .ensemble import DEFAULT_CHUNK, Accumulator, EnsembleAverage, finalize, reduce_chunks
from .linalg import I2, KET0, PAULI
from .model import DissipatorSpec, DriveSpec, effective_hamiltonian, effective_matrix, pauli_decompose
from .oracle import TimeGrid
from .qsd import NoiseStream, noise_paths
from .rng import substream

MODES = ("analytic", "hadamard-ideal", "hadamard-noisy")
PAULI_BASIS = ("I", "X", "Y", "Z")


class VQSSolverError(RuntimeError):
    def __init__(self, t: float, condition: float, trajectory: int | None = None):
        self.t, self.condition, self.trajectory = t, condition, trajectory
        where = "" if trajectory is None else f"trajectory {trajectory}, "
        super().__init__(f"{where}t={t:.6g}: McLachlan system unsolvable "
                         f"(condition estimate {condition:.3g})")


@dataclass(frozen=True)
class AnsatzSpec:
    layers: int = 3
    generators_per_layer: tuple[str, ...] = ("Z", "X", "Z")

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if not self.generators_per_layer:
            raise ValueError("generators_per_layer must be nonempty")
        bad = [g for g in self.generators_per_layer if g not in ("X", "Y", "Z")]
        if bad:
            raise ValueError(f"generators must be X, Y or Z, got {bad}")

    @property
    def generators(self) -> tuple[str, ...]:
        return tuple(self.generators_per_layer) * self.layers

    @property
    def n_params(self) -> int:
        return self.layers * len(self.generators_per_layer)

    def circuit(self, thetas) -> Circuit:
        """Single-qubit circuit of ``prot`` gates preparing ``U(theta)|0>``."""
        thetas = self._check(thetas)
        return Circuit(1, [GateOp("prot", (0,), angle=float(a), pauli=p)
                           for a, p in zip(thetas, self.generators)])

    def _check(self, thetas) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float)
        if thetas.shape[-1] != self.n_params:
            raise ValueError(f"expected {self.n_params} angles, got {thetas.shape[-1]}")
        return thetas


@dataclass(frozen=True)
class VariationalState:
    alpha: float
    thetas: tuple[float, ...]
    t: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        object.__setattr__(self, "thetas", tuple(float(x) for x in self.thetas))

    @classmethod
    def initial(cls, ansatz: AnsatzSpec, t: float = 0.0) -> "VariationalState":
        return cls(1.0, (0.0,) * ansatz.n_params, t)

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([[self.alpha], self.thetas])


@dataclass(frozen=True)
class SolverConfig:
    regularization: float = 1e-6
    substeps: int = 4
    lstsq_fallback: bool = True

    def __post_init__(self):
        if self.regularization < 0:
            raise ValueError("regularization must be >= 0")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


# -- statevectors and tangents (batched over leading axes) ----------------

def _gates(ansatz: AnsatzSpec, thetas: np.ndarray) -> np.ndarray:
    gens = ansatz.generators
    return np.stack([pauli_rotation(g, thetas[..., k]) for k, g in enumerate(gens)], axis=-3)


def _prefix_states(gates: np.ndarray) -> np.ndarray:
    """States after 0..K gates, shape ``(..., K+1, 2)``."""
    K = gates.shape[-3]
    psi = np.broadcast_to(KET0, gates.shape[:-3] + (2,)).astype(complex)
    out = [psi]
    for k in range(K):
        psi = np.einsum("...ij,...j->...i", gates[..., k, :, :], psi)
        out.append(psi)
    return np.stack(out, axis=-2)


def prepare_state(ansatz: AnsatzSpec, thetas) -> np.ndarray:
    """``U(theta)|0>``; broadcasts over leading axes of ``thetas``."""
    thetas = ansatz._check(thetas)
    return _prefix_states(_gates(ansatz, thetas))[..., -1, :]


def _tangents(ansatz: AnsatzSpec, alpha, thetas) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(psi, T)`` with ``T[..., 0] = psi`` and
    ``T[..., 1+k] = i alpha U_{>k} P_k U_{<=k}|0>``; ``T`` has shape ``(..., K+1, 2)``."""
    gates = _gates(ansatz, thetas)
    prefix = _prefix_states(gates)
    K = ansatz.n_params
    alpha = np.asarray(alpha, dtype=float)
    cols = [None] * (K + 1)
    suffix = np.broadcast_to(I2, gates.shape[:-3] + (2, 2)).astype(complex)
    for k in range(K - 1, -1, -1):
        v = PAULI[ansatz.generators[k]] @ prefix[..., k + 1, :, None]
        cols[k + 1] = 1j * alpha[..., None] * (suffix @ v)[..., 0]
        suffix = suffix @ gates[..., k, :, :]
    psi = prefix[..., -1, :]
    cols[0] = psi
    return psi, np.stack(cols, axis=-2)


def tangent_vectors(ansatz: AnsatzSpec, state: VariationalState) -> list[np.ndarray]:
    """``[d Psi/d alpha, d Psi/d theta_1, ...]`` from exact statevectors."""
    _, T = _tangents(ansatz, state.alpha, np.asarray(state.thetas))
    return list(T)


def _mv_analytic(ansatz, alpha, thetas, H):
    """Batched M (real, ``(..., K+1, K+1)``) and V (``(..., K+1)``)."""
    psi, T = _tangents(ansatz, alpha, thetas)
    M = np.einsum("...ia,...ja->...ij", T.conj(), T).real
    HPsi = np.asarray(alpha)[..., None] * np.einsum("...ab,...b->...a", H, psi)
    V = np.einsum("...ia,...a->...i", T.conj(), HPsi).imag
    return M, V


# -- Hadamard-test assembly --------------------------------------------------

def _branch(k: int | None, ansatz: AnsatzSpec) -> dict[int, str]:
    """Insertion map for parameter ``k`` (``None`` = alpha)."""
    return {} if k is None else {k + 1: ansatz.generators[k]}


def _coeff(k: int | None, alpha: float) -> complex:
    return 1.0 if k is None else 1j * alpha


def _overlap(ops, b0, b1, need: tuple[str, ...], shots, noise, rng) -> complex:
    out = 0j
    if "real" in need:
        out += ancilla_expectation(overlap_circuit(ops, b0, b1, "real"), shots, noise, rng).value
    if "imag" in need:
        out += 1j * ancilla_expectation(overlap_circuit(ops, b0, b1, "imag"), shots, noise, rng).value
    return out


def _backend_args(mode, noise_model):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "hadamard-noisy":
        return noise_model if noise_model is not None else NoiseModel()
    return None


def _shot_rng(rng, shots):
    if shots is not None and rng is None:
        raise ValueError("finite shots need an rng")
    return rng


def assemble_m(ansatz: AnsatzSpec, state: VariationalState, mode: str = "analytic",
               shots: int | None = None, noise_model: NoiseModel | None = None,
               rng: np.random.Generator | None = None) -> np.ndarray:
    """McLachlan metric over ``(alpha, theta_1, ..., theta_K)``.

    Hadamard modes estimate one overlap per upper-triangle entry. Only the
    component that survives the coefficient product is measured: ``Re`` for
    theta-theta entries and ``Im`` for alpha-theta entries.
    """
    noise = _backend_args(mode, noise_model)
    thetas = np.asarray(state.thetas)
    if mode == "analytic":
        H0 = np.zeros((2, 2), dtype=complex)
        return _mv_analytic(ansatz, state.alpha, thetas, H0)[0]
    rng = _shot_rng(rng, shots)
    ops = ansatz.circuit(thetas).ops
    idx = [None] + list(range(ansatz.n_params))
    n = len(idx)
    M = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            i, j = idx[a], idx[b]
            c = np.conj(_coeff(i, state.alpha)) * _coeff(j, state.alpha)
            need = ("real",) if c.imag == 0 else ("imag",)
            ov = _overlap(ops, _branch(i, ansatz), _branch(j, ansatz), need, shots, noise, rng)
            M[a, b] = M[b, a] = (c * ov).real
    return M


def assemble_v(ansatz: AnsatzSpec, state: VariationalState, h_eff, mode: str = "analytic",
               shots: int | None = None, noise_model: NoiseModel | None = None,
               rng: np.random.Generator | None = None) -> np.ndarray:
    """McLachlan force vector for ``h_eff`` (a PauliTerm list).

    In Hadamard modes ``h_eff`` is expanded over ``{I, X, Y, Z}`` with complex
    coefficients; both overlap components are measured per term and the
    coefficients are applied classically.
    """
    noise = _backend_args(mode, noise_model)
    thetas = np.asarray(state.thetas)
    coeffs = pauli_decompose(h_eff)
    if mode == "analytic":
        H = sum(c * PAULI[p] for p, c in coeffs.items())
        return _mv_analytic(ansatz, state.alpha, thetas, np.asarray(H, dtype=complex))[1]
    rng = _shot_rng(rng, shots)
    ops = ansatz.circuit(thetas).ops
    end = ansatz.n_params
    idx = [None] + list(range(ansatz.n_params))
    V = np.zeros(len(idx))
    for a, i in enumerate(idx):
        total = 0j
        for p in PAULI_BASIS:
            h = coeffs.get(p, 0j)
            if h == 0:
                continue
            ov = _overlap(ops, _branch(i, ansatz), {end: p}, ("real", "imag"), shots, noise, rng)
            total += h * ov
        V[a] = (np.conj(_coeff(i, state.alpha)) * state.alpha * total).imag
    return V


# -- linear solve and time stepping -------------------------------------------

def solve_mclachlan(M: np.ndarray, V: np.ndarray, solver: SolverConfig, t: float = 0.0,
                    trajectory_ids=None) -> np.ndarray:
    """Batched ``(M + lambda I) x = V`` with optional least-squares fallback."""
    M = np.asarray(M)
    A = M + solver.regularization * np.eye(M.shape[-1])
    try:
        x = np.linalg.solve(A, V[..., None])[..., 0]
        bad = ~np.all(np.isfinite(x), axis=-1)
    except np.linalg.LinAlgError:
        x = np.full(V.shape, np.nan)
        bad = np.ones(V.shape[:-1], dtype=bool)
    if np.any(bad):
        if solver.lstsq_fallback:
            for pos in zip(*np.nonzero(np.atleast_1d(bad))):
                key = pos if x.ndim > 1 else ()
                x[key] = np.linalg.lstsq(A[key], V[key], rcond=None)[0]
        bad = ~np.all(np.isfinite(x), axis=-1)
        if np.any(bad):
            pos = tuple(np.argwhere(np.atleast_1d(bad))[0]) if x.ndim > 1 else ()
            traj = None
            if trajectory_ids is not None and pos:
                traj = int(np.asarray(trajectory_ids)[pos[0]])
            cond = float(np.linalg.cond(A[pos])) if np.all(np.isfinite(A[pos])) else np.inf
            raise VQSSolverError(t, cond, traj)
    return x


def _derivative_analytic(ansatz, params, H, solver, t, ids):
    M, V = _mv_analytic(ansatz, params[..., 0], params[..., 1:], H)
    return solve_mclachlan(M, V, solver, t, ids)


def _rk4(f, y, t, h):
    k1 = f(y, t)
    k2 = f(y + 0.5 * h * k1, t + 0.5 * h)
    k3 = f(y + 0.5 * h * k2, t + 0.5 * h)
    k4 = f(y + h * k3, t + h)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def mclachlan_step(state: VariationalState, drive: DriveSpec, diss: DissipatorSpec,
                   noise_samples, dt: float, solver: SolverConfig = SolverConfig(),
                   ansatz: AnsatzSpec = AnsatzSpec(), mode: str = "analytic",
                   shots: int | None = None, noise_model: NoiseModel | None = None,
                   rng: np.random.Generator | None = None) -> VariationalState:
    """Advance one step of length ``dt`` with ``solver.substeps`` RK4 stages.

    ``noise_samples = (z1, z2)`` stay fixed during the step; the drive is
    re-evaluated at every stage time.
    """
    z1, z2 = noise_samples
    if mode == "analytic":
        def f(y, t):
            H = effective_matrix(drive, diss, np.asarray([z1]), np.asarray([z2]), t)[0]
            return _derivative_analytic(ansatz, y, H, solver, t, None)
    else:
        def f(y, t):
            st = VariationalState(y[0], y[1:], t)
            terms = effective_hamiltonian(drive, diss, z1, z2, t)
            M = assemble_m(ansatz, st, mode, shots, noise_model, rng)
            V = assemble_v(ansatz, st, terms, mode, shots, noise_model, rng)
            return solve_mclachlan(M, V, solver, t)
    y, t = state.params, state.t
    h = dt / solver.substeps
    for _ in range(solver.substeps):
        y = _rk4(f, y, t, h)
        t = t + h
    return VariationalState(float(y[0]), y[1:], state.t + dt)


# -- density reconstruction ---------------------------------------------------

def clamp_mask(alpha) -> np.ndarray:
    """True where ``alpha^4`` falls outside ``[0, 1]`` and gets clamped."""
    a4 = np.asarray(alpha, dtype=float) ** 4
    return (a4 > 1.0) | (a4 < 0.0)


def reconstruct_density(rho_theta, alpha, f: float) -> np.ndarray:
    """Thermal density matrix from the prepared state and the norm parameter.

    With ``a = clamp(alpha^4, 0, 1)`` the decay probability is ``1 - a`` and

        rho11 = rho11(theta) a + (1 - a) f,   rho00 = 1 - rho11,
        rho01 = rho01(theta) sqrt(a).

    Broadcasts over leading axes of ``rho_theta`` and ``alpha``.
    """
    rho_theta = np.asarray(rho_theta, dtype=complex)
    a = np.clip(np.asarray(alpha, dtype=float) ** 4, 0.0, 1.0)
    out = np.empty(np.broadcast_shapes(rho_theta.shape, np.shape(a) + (2, 2)), dtype=complex)
    r11 = rho_theta[..., 1, 1].real * a + (1.0 - a) * f
    r01 = rho_theta[..., 0, 1] * np.sqrt(a)
    out[..., 1, 1] = r11
    out[..., 0, 0] = 1.0 - r11
    out[..., 0, 1] = r01
    out[..., 1, 0] = np.conj(r01)
    return out


# -- trajectories ---------------------------------------------------------------

@dataclass
class VQSTrajectories:
    """Parameter and density series for a batch of trajectories."""

    times: np.ndarray
    alpha: np.ndarray          # (n, T)
    thetas: np.ndarray         # (n, T, K)
    rho: np.ndarray            # (n, T, 2, 2) reconstructed
    trajectory_ids: np.ndarray
    clamp_events: int = 0

    def states(self, j: int = 0) -> list[VariationalState]:
        return [VariationalState(a, th, t)
                for a, th, t in zip(self.alpha[j], self.thetas[j], self.times)]


def evolve_vqs_batch(ansatz: AnsatzSpec, drive: DriveSpec, diss: DissipatorSpec,
                     noise: np.ndarray, grid: TimeGrid, trajectory_ids=None,
                     mode: str = "analytic", solver: SolverConfig = SolverConfig(),
                     shots: int | None = None, noise_model: NoiseModel | None = None,
                     master_seed: int = 0) -> VQSTrajectories:
    """Integrate many trajectories from ``alpha = 1, theta = 0``.

    Args:
        noise: OU samples, shape ``(n, 2, len(grid))``; sample ``k`` drives the
            step ``[t_k, t_{k+1})``.
        master_seed: seeds the shot substreams of the Hadamard modes.
    """
    n = noise.shape[0]
    ids = np.arange(n) if trajectory_ids is None else np.asarray(trajectory_ids)
    times = grid.times
    K = ansatz.n_params
    params = np.zeros((n, K + 1))
    params[:, 0] = 1.0
    out = np.empty((n, len(times), K + 1))
    out[:, 0] = params
    if mode == "analytic":
        h = grid.dt / solver.substeps
        for k in range(grid.n_steps):
            z1, z2 = noise[:, 0, k], noise[:, 1, k]

            def f(y, t):
                H = effective_matrix(drive, diss, z1, z2, t)
                return _derivative_analytic(ansatz, y, H, solver, t, ids)

            t = times[k]
            for r in range(solver.substeps):
                params = _rk4(f, params, t + r * h, h)
            if not np.all(np.isfinite(params)):
                j = int(np.argmax(~np.all(np.isfinite(params), axis=-1)))
                raise VQSSolverError(float(times[k + 1]), np.inf, int(ids[j]))
            out[:, k + 1] = params
    else:
        for j in range(n):
            rng = substream(master_seed, int(ids[j]), 0, "shots") if shots is not None else None
            st = VariationalState.initial(ansatz, float(times[0]))
            for k in range(grid.n_steps):
                st = mclachlan_step(st, drive, diss, (noise[j, 0, k], noise[j, 1, k]),
                                    grid.dt, solver, ansatz, mode, shots, noise_model, rng)
                out[j, k + 1] = st.params
    alpha, thetas = out[..., 0], out[..., 1:]
    psi = prepare_state(ansatz, thetas)
    rho_theta = np.einsum("...i,...j->...ij", psi, psi.conj())
    rho = reconstruct_density(rho_theta, alpha, diss.f)
    clamps = int(np.count_nonzero(clamp_mask(alpha)))
    return VQSTrajectories(times, alpha, thetas, rho, ids, clamps)


def run_vqs_trajectory(ansatz: AnsatzSpec, drive: DriveSpec, diss: DissipatorSpec,
                       noise: NoiseStream | np.ndarray, grid: TimeGrid,
                       mode: str = "analytic", solver: SolverConfig = SolverConfig(),
                       shots: int | None = None,
                       noise_model: NoiseModel | None = None) -> VQSTrajectories:
    """One trajectory; ``noise`` is a :class:`NoiseStream` or a ``(2, T)`` sample array."""
    if isinstance(noise, NoiseStream):
        samples, ids, seed = noise.path(grid), [noise.trajectory], noise.master_seed
    else:
        samples, ids, seed = np.asarray(noise, dtype=complex), [0], 0
    return evolve_vqs_batch(ansatz, drive, diss, samples[None], grid, ids, mode, solver,
                            shots, noise_model, seed)


def _vqs_chunk(chunk: range, ansatz, drive, diss, grid, gamma, master_seed, mode,
               solver, shots, noise_model) -> Accumulator:
    noise = noise_paths(master_seed, chunk, gamma, grid)
    batch = evolve_vqs_batch(ansatz, drive, diss, noise, grid, np.array(chunk), mode,
                             solver, shots, noise_model, master_seed)
    return Accumulator.from_samples(batch.rho, batch.clamp_events)


def run_vqs_ensemble(ansatz: AnsatzSpec, drive: DriveSpec, diss: DissipatorSpec,
                     grid: TimeGrid, n_traj: int, gamma: float, master_seed: int,
                     mode: str = "analytic", solver: SolverConfig = SolverConfig(),
                     shots: int | None = None, noise_model: NoiseModel | None = None,
                     chunk_size: int = DEFAULT_CHUNK, workers: int = 1) -> EnsembleAverage:
    """Average of reconstructed densities; ``events`` holds the clamp count.

    Trajectory ``j`` uses exactly the noise that :func:`qubitbath.qsd.run_qsd_ensemble`
    gives trajectory ``j`` for the same seed.
    """
    work = partial(_vqs_chunk, ansatz=ansatz, drive=drive, diss=diss, grid=grid,
                   gamma=gamma, master_seed=master_seed, mode=mode, solver=solver,
                   shots=shots, noise_model=noise_model)
    acc = reduce_chunks(work, n_traj, chunk_size, workers)
    return finalize(acc, normalize=False)


def write_parameter_trace(path, traj: VQSTrajectories, j: int = 0) -> None:
    """CSV ``t,alpha,theta_1..theta_K`` for trajectory ``j``."""
    K = traj.thetas.shape[-1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "alpha"] + [f"theta_{k + 1}" for k in range(K)])
        for t, a, th in zip(traj.times, traj.alpha[j], traj.thetas[j]):
            w.writerow(["%.17g" % t, "%.17g" % a] + ["%.17g" % x for x in th])
