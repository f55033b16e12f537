"""Single-fluxonium eigenproblem and the per-site quantities the chain uses.

The circuit Hamiltonian is

    H = 4 E_C n^2 + (E_L / 2) theta^2 - E_J cos(theta - phi),

with ``[theta, n] = i`` and all energies given as linear frequencies E/h in
GHz.  It is represented in the eigenbasis of the harmonic part
``4 E_C n^2 + (E_L/2) theta^2``, where ``theta = theta_zpf (a + a^dag)`` with
``theta_zpf = (2 E_C / E_L)^{1/4}`` and the level spacing is
``sqrt(8 E_C E_L)``.  ``cos theta`` and ``sin theta`` are evaluated exactly in
that basis through the eigendecomposition of the tridiagonal ``theta``; the
external flux is absorbed via ``cos(theta - phi) = cos(phi) cos(theta) +
sin(phi) sin(theta)``, so the Hamiltonian matrix stays real symmetric and the
eigenvectors can be kept real.

Convergence in this basis is exponential for the parameter regimes treated
here, so a small starting size with doubling suffices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.constants import e as _ELEMENTARY_CHARGE, hbar as _HBAR
from scipy.linalg import eigh, eigh_tridiagonal

from .errors import ConvergenceError, ParameterError

# Circuit energies (GHz) of the high-frequency fluxonium used throughout:
# splitting 2.0 GHz at the half-flux sweet spot, 10.2 GHz to the second
# level, phase matrix element 2.36, E_J susceptibility 0.31.
REFERENCE_E_C = 4.0
REFERENCE_E_L = 1.45
REFERENCE_E_J = 9.0

DEFAULT_BASIS_START = 60
DEFAULT_BASIS_MAX = 480
DEFAULT_TOL = 1e-9

# (Phi_0 / 2 pi)^2 / h in GHz * henry: converts m / (l_a * l_b) to GHz.
_FLUX_QUANTUM_GHZ_HENRY = _HBAR / (2.0 * _ELEMENTARY_CHARGE) ** 2 / (2.0 * np.pi) * 1e-9


@dataclass(frozen=True)
class FluxoniumParams:
    """Circuit energies (GHz as E/h) and external flux offset (radians)."""

    e_c: float
    e_l: float
    e_j: float
    phi: float

    def __post_init__(self):
        if not (self.e_c > 0.0 and self.e_l > 0.0):
            raise ParameterError(
                f"charging and inductive energies must be positive, got "
                f"e_c={self.e_c}, e_l={self.e_l}"
            )
        if self.e_j < 0.0:
            raise ParameterError(f"Josephson energy must be >= 0, got {self.e_j}")
        if not math.isfinite(self.phi):
            raise ParameterError(f"flux offset must be finite, got {self.phi}")

    def replace(self, **kwargs) -> "FluxoniumParams":
        fields = {"e_c": self.e_c, "e_l": self.e_l, "e_j": self.e_j, "phi": self.phi}
        fields.update(kwargs)
        return FluxoniumParams(**fields)


def reference_params(phi: float = np.pi) -> FluxoniumParams:
    """The canonical circuit at flux offset ``phi`` (sweet spot by default)."""
    return FluxoniumParams(e_c=REFERENCE_E_C, e_l=REFERENCE_E_L, e_j=REFERENCE_E_J, phi=phi)


@dataclass(frozen=True)
class SpectralData:
    """Lowest eigenvalues and phase-operator matrix elements of one circuit.

    Real eigenvector gauge, fixed so that every eigenvector's largest
    component is positive and additionally ``theta_elems[0, 1] >= 0``.
    """

    energies: np.ndarray      # (k,) ascending, GHz
    theta_elems: np.ndarray   # (k, k) <i|theta|j>
    cos_elems: np.ndarray     # (k, k) <i|cos theta|j>
    sin_elems: np.ndarray     # (k, k) <i|sin theta|j>
    basis_size: int
    converged: bool
    residual: float           # last eigenvalue change under basis doubling (GHz)


@dataclass(frozen=True)
class QubitSite:
    """Two-level projection of one circuit: splitting and 2x2 phase matrix."""

    epsilon: float        # E_1 - E_0, GHz
    theta: np.ndarray     # (2, 2) real symmetric
    eta: float            # |<e|cos theta|e> - <g|cos theta|g>|
    phi: float            # flux offset used, radians

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ParameterError(f"qubit splitting must be positive, got {self.epsilon}")


def theta_zpf(params: FluxoniumParams) -> float:
    """Zero-point phase spread of the harmonic part, (2 E_C / E_L)^(1/4)."""
    return (2.0 * params.e_c / params.e_l) ** 0.25


@lru_cache(maxsize=64)
def _phase_operators(tz: float, n: int):
    """theta, cos(theta), sin(theta) in the n-dim oscillator basis (read-only)."""
    off = tz * np.sqrt(np.arange(1, n))
    theta = np.zeros((n, n))
    idx = np.arange(n - 1)
    theta[idx, idx + 1] = off
    theta[idx + 1, idx] = off
    vals, vecs = eigh_tridiagonal(np.zeros(n), off)
    cos_t = (vecs * np.cos(vals)) @ vecs.T
    sin_t = (vecs * np.sin(vals)) @ vecs.T
    for arr in (theta, cos_t, sin_t):
        arr.flags.writeable = False
    return theta, cos_t, sin_t


def build_flux_hamiltonian(params: FluxoniumParams, basis_size: int) -> np.ndarray:
    """Circuit Hamiltonian (GHz) in the oscillator basis, real symmetric.

    ``basis_size`` oscillator levels; the harmonic part is diagonal with
    spacing sqrt(8 E_C E_L).
    """
    if basis_size < 10:
        raise ParameterError(f"basis_size must be >= 10, got {basis_size}")
    spacing = math.sqrt(8.0 * params.e_c * params.e_l)
    _, cos_t, sin_t = _phase_operators(theta_zpf(params), basis_size)
    h = np.diag(spacing * (np.arange(basis_size) + 0.5))
    h -= params.e_j * (np.cos(params.phi) * cos_t + np.sin(params.phi) * sin_t)
    return h


def _fix_gauge(vecs: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Deterministic real gauge: largest component positive, theta_ge >= 0."""
    w = vecs.copy()
    for j in range(w.shape[1]):
        imax = np.argmax(np.abs(w[:, j]))
        if w[imax, j] < 0.0:
            w[:, j] *= -1.0
    if w.shape[1] >= 2 and (w[:, 0] @ theta @ w[:, 1]) < 0.0:
        w[:, 1] *= -1.0
    return w


def solve_fluxonium(
    params: FluxoniumParams,
    k_levels: int = 3,
    tol: float = DEFAULT_TOL,
    basis_size_start: int = DEFAULT_BASIS_START,
    basis_size_max: int = DEFAULT_BASIS_MAX,
) -> SpectralData:
    """Diagonalize the circuit, doubling the basis until levels settle.

    Convergence criterion: the lowest ``k_levels`` eigenvalues move by less
    than ``tol`` (GHz) under one doubling of the basis size.  The returned
    data comes from the larger of the two sizes that passed the check.
    """
    if k_levels < 2:
        raise ParameterError(f"k_levels must be >= 2, got {k_levels}")
    if tol <= 0.0:
        raise ParameterError(f"tol must be positive, got {tol}")

    prev = None
    residual = math.inf
    n = basis_size_start
    while n <= basis_size_max:
        h = build_flux_hamiltonian(params, n)
        vals, vecs = eigh(h, subset_by_index=(0, k_levels - 1))
        if prev is not None:
            residual = float(np.max(np.abs(vals - prev)))
            if residual < tol:
                theta, cos_t, sin_t = _phase_operators(theta_zpf(params), n)
                w = _fix_gauge(vecs, theta)
                te = w.T @ theta @ w
                ce = w.T @ cos_t @ w
                se = w.T @ sin_t @ w
                # kill rounding asymmetry so the real-gauge symmetry is exact
                te = 0.5 * (te + te.T)
                ce = 0.5 * (ce + ce.T)
                se = 0.5 * (se + se.T)
                return SpectralData(
                    energies=vals,
                    theta_elems=te,
                    cos_elems=ce,
                    sin_elems=se,
                    basis_size=n,
                    converged=True,
                    residual=residual,
                )
        prev = vals
        n *= 2
    raise ConvergenceError(
        f"fluxonium spectrum not converged to {tol} GHz at basis size "
        f"{basis_size_max} (last change {residual:.3e} GHz)",
        residual=residual,
    )


def project_to_qubit(spec: SpectralData, params: FluxoniumParams) -> QubitSite:
    """Two-level truncation: splitting plus the top-left 2x2 phase block."""
    if not spec.converged:
        raise ConvergenceError("cannot project an unconverged spectrum", residual=spec.residual)
    return QubitSite(
        epsilon=float(spec.energies[1] - spec.energies[0]),
        theta=spec.theta_elems[:2, :2].copy(),
        eta=float(abs(spec.cos_elems[1, 1] - spec.cos_elems[0, 0])),
        phi=params.phi,
    )


def solve_qubit(params: FluxoniumParams, **solver_kwargs) -> QubitSite:
    """Convenience: solve and project in one call."""
    return project_to_qubit(solve_fluxonium(params, **solver_kwargs), params)


def susceptibility_eta(params: FluxoniumParams, **solver_kwargs) -> float:
    """Sensitivity of the splitting to E_J: |<e|cos theta|e> - <g|cos theta|g>|.

    By Hellmann-Feynman this equals |d epsilon / d E_J|.
    """
    spec = solve_fluxonium(params, **solver_kwargs)
    return float(abs(spec.cos_elems[1, 1] - spec.cos_elems[0, 0]))


def perturbative_fields(params_sweet: FluxoniumParams, delta_phi: float,
                        spec: SpectralData | None = None) -> tuple[float, float]:
    """Longitudinal and transverse field corrections for a small flux detuning.

    In the sweet-spot eigenbasis a detuning ``delta_phi`` away from phi = pi
    adds ``E_J (delta_phi sin theta - delta_phi^2/2 cos theta)``.  Projected
    onto the qubit this shifts the splitting by

        dez = (E_J delta_phi^2 / 2) (<g|cos theta|g> - <e|cos theta|e>)

    and adds a transverse field

        dex = 2 E_J delta_phi <g|sin theta|e>.

    Both are returned in GHz.  ``spec`` may carry a pre-solved sweet-spot
    spectrum to avoid re-diagonalizing.
    """
    if abs(params_sweet.phi - np.pi) > 1e-9:
        raise ParameterError(
            f"perturbative fields are defined around phi = pi, got phi={params_sweet.phi}"
        )
    if spec is None:
        spec = solve_fluxonium(params_sweet)
    dez = 0.5 * params_sweet.e_j * delta_phi**2 * (spec.cos_elems[0, 0] - spec.cos_elems[1, 1])
    dex = 2.0 * params_sweet.e_j * delta_phi * spec.sin_elems[0, 1]
    return float(dez), float(dex)


@dataclass(frozen=True)
class FluxSweepRow:
    delta_phi: float
    epsilon: float
    theta_gg: float
    theta_ge: float
    theta_ee: float
    error: str | None = None


def flux_sweep(params: FluxoniumParams, delta_phi_grid, **solver_kwargs) -> list[FluxSweepRow]:
    """Splitting and phase matrix elements vs detuning from ``params.phi``.

    One row per grid point; solver failures are recorded in the row instead
    of aborting the sweep.
    """
    rows = []
    for dphi in np.asarray(delta_phi_grid, dtype=float):
        try:
            site = solve_qubit(params.replace(phi=params.phi + dphi), **solver_kwargs)
            rows.append(FluxSweepRow(
                delta_phi=float(dphi),
                epsilon=site.epsilon,
                theta_gg=float(site.theta[0, 0]),
                theta_ge=float(site.theta[0, 1]),
                theta_ee=float(site.theta[1, 1]),
            ))
        except (ConvergenceError, ParameterError) as exc:
            rows.append(FluxSweepRow(
                delta_phi=float(dphi), epsilon=math.nan,
                theta_gg=math.nan, theta_ge=math.nan, theta_ee=math.nan,
                error=str(exc),
            ))
    return rows


def inductive_energy(inductance: float) -> float:
    """E_L/h in GHz of an inductance in henries: (Phi_0/2pi)^2 / (L h)."""
    if inductance <= 0.0:
        raise ParameterError(f"inductance must be positive, got {inductance}")
    return _FLUX_QUANTUM_GHZ_HENRY / inductance


def coupling_from_inductances(m: float, l_a: float, l_b: float) -> float:
    """Bond energy J (GHz) of two fluxoniums sharing mutual inductance ``m``.

    J = (Phi_0 / 2 pi)^2 m / (l_a l_b), all inductances in henries.
    Equivalently J = E_L(l_a) * m / l_b.
    """
    if l_a <= 0.0 or l_b <= 0.0:
        raise ParameterError(f"inductances must be positive, got l_a={l_a}, l_b={l_b}")
    if abs(m) > math.sqrt(l_a * l_b):
        raise ParameterError(
            f"mutual inductance |m|={abs(m)} exceeds sqrt(l_a*l_b)={math.sqrt(l_a * l_b)}"
        )
    return _FLUX_QUANTUM_GHZ_HENRY * m / (l_a * l_b)
