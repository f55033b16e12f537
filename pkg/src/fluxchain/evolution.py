"""Schrodinger-equation integration and per-site excitation probabilities.

States evolve under ``d psi / dt = -2 pi i H psi`` with H in GHz and t in ns
(the explicit 2 pi converts linear frequency to angular).  The integrator is
Lanczos (Krylov) matrix-exponential stepping: one Krylov space per recording
interval, grown until the projected exponential stops changing, with
recursive interval halving if the space hits its size cap.  The projected
exponential is exactly unitary on the Krylov space, so the state norm is
preserved to rounding regardless of the convergence tolerance; norm drift is
recorded and never silently repaired.

``dense_oracle_evolve`` provides the independent cross-check: full
eigendecomposition, exact to numerical precision, capped at small chains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from . import _kernels
from .chain import ManyBodyOperator
from .errors import CapacityError, IntegrationError, ParameterError

TWO_PI = 2.0 * np.pi

DEFAULT_TOL = 1e-10
DEFAULT_KRYLOV_MAX = 48
NORM_TOLERANCE = 1e-8

DEFAULT_DT = 0.05   # ns
DEFAULT_T_MAX = 30.0  # ns


def time_grid(t_max: float = DEFAULT_T_MAX, dt: float = DEFAULT_DT) -> np.ndarray:
    """Uniform recording grid [0, t_max] with spacing dt (ns)."""
    if t_max <= 0.0 or dt <= 0.0:
        raise ParameterError(f"t_max and dt must be positive, got {t_max}, {dt}")
    n = int(round(t_max / dt))
    return np.linspace(0.0, n * dt, n + 1)


@dataclass(frozen=True)
class EvolutionRecord:
    """Recorded trajectory: per-site probabilities on the time grid."""

    times: np.ndarray     # (T,) ns
    probs: np.ndarray     # (L, T) p_l(t_k)
    norms: np.ndarray     # (T,) ||psi(t_k)||
    energies: np.ndarray | None = None  # (T,) <H>, only when requested

    @property
    def n_sites(self) -> int:
        return self.probs.shape[0]


def _site_probs(psi: np.ndarray, n_sites: int, out: np.ndarray) -> None:
    """out[l] = sum of |psi_i|^2 over indices with bit l set."""
    pr = np.abs(psi) ** 2
    for l in range(n_sites):
        out[l] = pr.reshape(-1, 2, 1 << l)[:, 1, :].sum()


class _KrylovWorkspace:
    """Reusable Lanczos buffers; allocating per step would dominate runtime."""

    def __init__(self, dim: int, m_max: int):
        self.m_max = m_max
        self.v = np.empty((m_max + 1, dim), dtype=np.complex128)
        self.w = np.empty(dim, dtype=np.complex128)
        self.alphas = np.zeros(m_max)
        self.betas = np.zeros(m_max + 1)


def _lanczos_step(h: ManyBodyOperator, psi: np.ndarray, tau: float, tol: float,
                  ws: _KrylovWorkspace, depth: int = 0,
                  t_base: float = 0.0) -> np.ndarray:
    """exp(-2 pi i H tau) psi via a Lanczos subspace, splitting tau on demand.

    Convergence: the first column of expm of the projected tridiagonal is
    re-evaluated as the space grows; the step is accepted when it moves by
    less than tol (extended entries counted in full).
    """
    if depth > 40 or tau <= 0.0:
        raise IntegrationError(
            f"step-size underflow at t = {t_base:.6f} ns", achieved_time=t_base)
    m_max = ws.m_max
    v, w, alphas, betas = ws.v, ws.w, ws.alphas, ws.betas
    beta0 = np.linalg.norm(psi)
    v[0] = psi / beta0
    u_prev = None
    for j in range(m_max):
        alphas[j] = _kernels.lanczos_first_pass(
            h.diag, h.pair_masks, h.pair_coefs, h.flip_masks, h.flip_tables,
            h.flip_nb_lo, h.flip_nb_hi, v[j], v[j - 1] if j > 0 else v[0],
            betas[j], w)
        b = _kernels.lanczos_second_pass(w, v[j], alphas[j])
        betas[j + 1] = b
        m = j + 1
        breakdown = b < 1e-13
        if breakdown or m >= 8 and m % 3 == 2 or m == m_max:
            d, q = eigh_tridiagonal(alphas[:m], betas[1:m])
            u = q @ (np.exp(-1j * TWO_PI * tau * d) * q[0])
            if u_prev is not None:
                delta = np.linalg.norm(u[: len(u_prev)] - u_prev)
                delta += np.linalg.norm(u[len(u_prev):])
                if delta < tol or breakdown:
                    return beta0 * (u @ v[:m])
            elif breakdown:
                return beta0 * (u @ v[:m])
            u_prev = u
        if not breakdown:
            v[j + 1] = w / b
    half = _lanczos_step(h, psi, 0.5 * tau, 0.5 * tol, ws, depth + 1, t_base)
    return _lanczos_step(h, half, 0.5 * tau, 0.5 * tol, ws, depth + 1,
                         t_base + 0.5 * tau)


def evolve(h: ManyBodyOperator, psi0: np.ndarray, t_grid, tol: float = DEFAULT_TOL,
           m_max: int = DEFAULT_KRYLOV_MAX, record_energy: bool = False) -> EvolutionRecord:
    """Integrate the chain state over ``t_grid`` and record p_l(t).

    The grid must be ascending and start at 0; psi0 must be normalized.  The
    norm is checked against ``NORM_TOLERANCE`` at every grid point and a
    violation aborts the run.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1 or t_grid[0] != 0.0:
        raise ParameterError("time grid must be one-dimensional and start at 0")
    if len(t_grid) > 1 and np.any(np.diff(t_grid) <= 0.0):
        raise ParameterError("time grid must be strictly ascending")
    if tol <= 0.0:
        raise ParameterError(f"tol must be positive, got {tol}")
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if psi0.shape != (h.dimension,):
        raise ParameterError(
            f"state dimension {psi0.shape} does not match operator dimension {h.dimension}")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ParameterError("initial state must have unit norm")

    n_t = len(t_grid)
    probs = np.empty((h.n_sites, n_t))
    norms = np.empty(n_t)
    energies = np.empty(n_t) if record_energy else None

    psi = psi0.copy()
    col = np.empty(h.n_sites)
    ws = _KrylovWorkspace(h.dimension, m_max)
    for k in range(n_t):
        if k > 0:
            psi = _lanczos_step(h, psi, t_grid[k] - t_grid[k - 1], tol, ws,
                                t_base=t_grid[k - 1])
        norms[k] = np.linalg.norm(psi)
        if abs(norms[k] - 1.0) > NORM_TOLERANCE:
            raise IntegrationError(
                f"norm drifted to {norms[k]:.12f} at t = {t_grid[k]:.4f} ns",
                achieved_time=float(t_grid[k]))
        _site_probs(psi, h.n_sites, col)
        probs[:, k] = col
        if record_energy:
            energies[k] = h.expectation(psi)
    return EvolutionRecord(times=t_grid.copy(), probs=probs, norms=norms,
                           energies=energies)


def peak_stats(record: EvolutionRecord, t_star: float) -> list[tuple[float, float]]:
    """Per-site (max of p_l over t < t_star, earliest arg-max time)."""
    if t_star > record.times[-1] + 1e-12:
        raise ParameterError(
            f"t_star = {t_star} ns exceeds the recorded window {record.times[-1]} ns")
    window = record.times < t_star
    if not np.any(window):
        raise ParameterError(f"no recorded samples before t_star = {t_star} ns")
    sub = record.probs[:, window]
    times = record.times[window]
    out = []
    for l in range(record.n_sites):
        k = int(np.argmax(sub[l]))
        out.append((float(sub[l, k]), float(times[k])))
    return out


def dense_oracle_evolve(h: ManyBodyOperator, psi0: np.ndarray, t: float,
                        max_sites: int = 8) -> np.ndarray:
    """psi(t) by full eigendecomposition; independent of the Krylov path."""
    if h.n_sites > max_sites:
        raise CapacityError(
            f"dense oracle limited to {max_sites} sites, got {h.n_sites}")
    vals, vecs = eigh(h.dense())
    psi0 = np.asarray(psi0, dtype=np.complex128)
    return vecs @ (np.exp(-1j * TWO_PI * vals * t) * (vecs.T @ psi0))
