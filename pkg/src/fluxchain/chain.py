"""Many-body Hamiltonian of the coupled-qubit chain.

In the eigenbasis of the individual circuits the chain Hamiltonian is

    H = -(1/2) sum_l eps_l sigma^z_l + sum_{l=0}^{L-2} J_l theta_l theta_{l+1},

with theta_l the site's 2x2 phase matrix.  The open chain has L-1 bonds.

Basis convention, shared by every module: bit l of a basis index is site l's
state (1 = excited), site 0 is the least-significant bit.  Per site the
ordering is (|g>, |e>) and sigma^z |g> = +|g>, so a single site reads
diag(-eps/2, +eps/2).

Operators are stored in a structured sparse form (diagonal, two-bit flips,
one-bit flips with neighbor-dependent coefficients) that the evolution
kernels consume directly; ``to_csr()`` materializes the equivalent scipy
matrix.  Everything is real symmetric.  Assembly happens once per chain and
the operator is immutable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import _kernels
from .circuit import FluxoniumParams, QubitSite, solve_qubit
from .errors import CapacityError, ConvergenceError, ParameterError

DEFAULT_MAX_SITES = 20


@dataclass(frozen=True)
class ChainSpec:
    """Per-site qubit data plus bond couplings (GHz)."""

    sites: list[QubitSite]
    couplings: np.ndarray  # (L-1,)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "couplings", np.asarray(self.couplings, dtype=float))
        if len(self.sites) < 1:
            raise ParameterError("chain needs at least one site")
        if self.couplings.shape != (len(self.sites) - 1,):
            raise ParameterError(
                f"expected {len(self.sites) - 1} couplings for {len(self.sites)} sites, "
                f"got {self.couplings.shape}"
            )

    @property
    def length(self) -> int:
        return len(self.sites)


def build_chain(params_list: list[FluxoniumParams], couplings, label: str = "",
                **solver_kwargs) -> ChainSpec:
    """Solve every circuit and assemble the projected chain description."""
    sites = []
    for l, params in enumerate(params_list):
        try:
            sites.append(solve_qubit(params, **solver_kwargs))
        except ConvergenceError as exc:
            raise ConvergenceError(f"site {l}: {exc}", residual=exc.residual) from exc
    return ChainSpec(sites=sites, couplings=couplings, label=label)


def uniform_chain(params: FluxoniumParams, length: int, coupling: float,
                  label: str = "", **solver_kwargs) -> ChainSpec:
    """Chain of ``length`` identical circuits with uniform coupling (GHz)."""
    site = solve_qubit(params, **solver_kwargs)
    return ChainSpec(sites=[site] * length,
                     couplings=np.full(max(length - 1, 0), coupling),
                     label=label)


@dataclass(frozen=True)
class ManyBodyOperator:
    """Real symmetric operator on the chain's 2^L-dimensional space.

    Stored as a diagonal plus flip terms; see the module docstring.  The
    one-bit flip tables are indexed by the two neighboring bits of the row,
    ``tables[s, b_lo + 2*b_hi]``.
    """

    n_sites: int
    diag: np.ndarray          # (2^L,) float64
    pair_masks: np.ndarray    # (nb,) int64, two bits set each
    pair_coefs: np.ndarray    # (nb,) float64
    flip_masks: np.ndarray    # (ns,) int64, one bit set each
    flip_tables: np.ndarray   # (ns, 4) float64
    flip_nb_lo: np.ndarray    # (ns,) int64 bit positions
    flip_nb_hi: np.ndarray    # (ns,) int64

    @property
    def dimension(self) -> int:
        return 1 << self.n_sites

    @property
    def nnz(self) -> int:
        """Structural nonzero count (one entry per row per stored term)."""
        return self.dimension * (1 + len(self.pair_masks) + len(self.flip_masks))

    def apply(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """out = H @ x for a complex state vector."""
        if out is None:
            out = np.empty_like(x)
        _kernels.apply_general(self.diag, self.pair_masks, self.pair_coefs,
                               self.flip_masks, self.flip_tables,
                               self.flip_nb_lo, self.flip_nb_hi, x, out)
        return out

    def expectation(self, x: np.ndarray) -> float:
        """<x|H|x> (real by Hermiticity)."""
        return float(np.real(np.vdot(x, self.apply(x))))

    def to_csr(self) -> sparse.csr_matrix:
        """Materialize the operator as a scipy CSR matrix (small L only)."""
        dim = self.dimension
        idx = np.arange(dim, dtype=np.int64)
        rows = [idx]
        cols = [idx]
        data = [self.diag]
        for mask, coef in zip(self.pair_masks, self.pair_coefs):
            rows.append(idx)
            cols.append(idx ^ mask)
            data.append(np.full(dim, coef))
        for s in range(len(self.flip_masks)):
            j = ((idx >> self.flip_nb_lo[s]) & 1) + 2 * ((idx >> self.flip_nb_hi[s]) & 1)
            rows.append(idx)
            cols.append(idx ^ self.flip_masks[s])
            data.append(self.flip_tables[s][j])
        mat = sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim),
        )
        return mat.tocsr()

    def dense(self) -> np.ndarray:
        return self.to_csr().toarray()


def _site_bit(dim: int, l: int) -> np.ndarray:
    return (np.arange(dim, dtype=np.int64) >> l) & 1


def _assemble(n_sites: int, eps: np.ndarray, thetas: list[np.ndarray],
              couplings: np.ndarray, x_fields: np.ndarray) -> ManyBodyOperator:
    """Shared builder: site splittings, bond phase products, sigma^x fields."""
    dim = 1 << n_sites
    diag = np.zeros(dim)
    for l in range(n_sites):
        diag += 0.5 * eps[l] * (2.0 * _site_bit(dim, l).astype(float) - 1.0)

    # theta = c*I + x*sigma^x + z*sigma^z per site
    cs = np.array([0.5 * (t[0, 0] + t[1, 1]) for t in thetas])
    zs = np.array([0.5 * (t[0, 0] - t[1, 1]) for t in thetas])
    xs = np.array([float(t[0, 1]) for t in thetas])

    pair_masks, pair_coefs = [], []
    flip_base = -0.5 * np.asarray(x_fields, dtype=float)  # -(dex/2) sigma^x
    flip_lo_coef = np.zeros(n_sites)   # coefficient on sign of left neighbor
    flip_hi_coef = np.zeros(n_sites)   # coefficient on sign of right neighbor
    for l in range(n_sites - 1):
        j = couplings[l]
        r = l + 1
        s_l = 1.0 - 2.0 * _site_bit(dim, l).astype(float)
        s_r = 1.0 - 2.0 * _site_bit(dim, r).astype(float)
        diag += j * (cs[l] * cs[r] + cs[l] * zs[r] * s_r
                     + zs[l] * cs[r] * s_l + zs[l] * zs[r] * s_l * s_r)
        pair_masks.append((1 << l) | (1 << r))
        pair_coefs.append(j * xs[l] * xs[r])
        # sigma^x on l paired with (c + z sigma^z) on r, and vice versa
        flip_base[l] += j * xs[l] * cs[r]
        flip_hi_coef[l] += j * xs[l] * zs[r]
        flip_base[r] += j * cs[l] * xs[r]
        flip_lo_coef[r] += j * zs[l] * xs[r]

    flip_masks, flip_tables, flip_nb_lo, flip_nb_hi = [], [], [], []
    for l in range(n_sites):
        a, b, c = flip_base[l], flip_lo_coef[l], flip_hi_coef[l]
        if a == 0.0 and b == 0.0 and c == 0.0:
            continue
        lo = l - 1 if l > 0 else 0
        hi = l + 1 if l < n_sites - 1 else 0
        # table index is b_lo + 2*b_hi
        table = np.array([a + b * (1.0 - 2.0 * (j & 1)) + c * (1.0 - 2.0 * (j >> 1))
                          for j in range(4)])
        flip_masks.append(1 << l)
        flip_tables.append(table)
        flip_nb_lo.append(lo)
        flip_nb_hi.append(hi)

    return ManyBodyOperator(
        n_sites=n_sites,
        diag=diag,
        pair_masks=np.asarray(pair_masks, dtype=np.int64),
        pair_coefs=np.asarray(pair_coefs, dtype=float),
        flip_masks=np.asarray(flip_masks, dtype=np.int64),
        flip_tables=(np.asarray(flip_tables, dtype=float).reshape(-1, 4)
                     if flip_tables else np.zeros((0, 4))),
        flip_nb_lo=np.asarray(flip_nb_lo, dtype=np.int64),
        flip_nb_hi=np.asarray(flip_nb_hi, dtype=np.int64),
    )


def assemble_hamiltonian(chain: ChainSpec, max_sites: int = DEFAULT_MAX_SITES) -> ManyBodyOperator:
    """Chain Hamiltonian: -(eps_l/2) sigma^z terms plus J_l theta_l theta_{l+1} bonds."""
    if chain.length > max_sites:
        raise CapacityError(
            f"chain of {chain.length} sites exceeds the configured maximum of {max_sites}"
        )
    return _assemble(
        n_sites=chain.length,
        eps=np.array([s.epsilon for s in chain.sites]),
        thetas=[s.theta for s in chain.sites],
        couplings=chain.couplings,
        x_fields=np.zeros(chain.length),
    )


def assemble_sweet_spot_tfim(epsilon0: float, ja2: float, fields,
                             max_sites: int = DEFAULT_MAX_SITES) -> ManyBodyOperator:
    """Fixed-basis transverse-field Ising Hamiltonian with random fields.

    H = ja2 * sum sigma^x_l sigma^x_{l+1}
        - sum_l ((epsilon0 + dez_l)/2 sigma^z_l + (dex_l/2) sigma^x_l)

    ``fields`` is a length-L sequence of (dez, dex) pairs in GHz.  This is the
    sweet-spot-eigenbasis description of a weakly flux-detuned chain; with
    zero fields it matches ``assemble_hamiltonian`` of the sweet-spot chain
    with ja2 = J * theta_ge^2.
    """
    fields = [(float(dz), float(dx)) for dz, dx in fields]
    n = len(fields)
    if n < 1:
        raise ParameterError("fields must have at least one entry")
    if n > max_sites:
        raise CapacityError(f"{n} sites exceeds the configured maximum of {max_sites}")
    # unit sigma^x per site so bond coefficient is ja2 itself
    sigma_x = np.array([[0.0, 1.0], [1.0, 0.0]])
    return _assemble(
        n_sites=n,
        eps=np.array([epsilon0 + dz for dz, _ in fields]),
        thetas=[sigma_x] * n,
        couplings=np.full(max(n - 1, 0), ja2),
        x_fields=np.array([dx for _, dx in fields]),
    )


def basis_state(length: int, excited_sites) -> np.ndarray:
    """Computational basis state with the listed sites excited (unit norm)."""
    if length < 1:
        raise ParameterError("length must be >= 1")
    index = 0
    for l in excited_sites:
        if not 0 <= l < length:
            raise ParameterError(f"site index {l} out of range for length {length}")
        index |= 1 << l
    psi = np.zeros(1 << length, dtype=np.complex128)
    psi[index] = 1.0
    return psi
