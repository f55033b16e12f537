"""Numba kernels for structured many-body matrix-vector products.

The chain Hamiltonian in the computational basis is a sum of three kinds of
terms, each of which maps a basis index to at most one other index:

* a real diagonal,
* two-bit flip terms ``coef * |i ^ m><i|`` with ``m`` covering the two bits of
  a bond (the XX part of a bond),
* one-bit flip terms whose coefficient depends on the values of the two
  neighboring bits (XZ/ZX bond parts and on-site transverse fields), stored
  as a 4-entry lookup table per flip.

Row ``i`` of ``H @ x`` therefore reads one diagonal entry plus one gathered
element of ``x`` per term, which is what the kernels below do in a single
fused pass.  All coefficients are real (the Hamiltonian is real symmetric),
states are complex128.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def apply_general(diag, pair_masks, pair_coefs, flip_masks, flip_tables,
                  flip_nb_lo, flip_nb_hi, x, out):
    """out = H x including one-bit flips with neighbor-dependent coefficients.

    ``flip_tables[s, b_lo + 2*b_hi]`` is the coefficient of the one-bit flip
    ``s`` when the neighboring bits ``flip_nb_lo[s]`` / ``flip_nb_hi[s]`` of
    the row index hold ``b_lo`` / ``b_hi``.
    """
    n = x.shape[0]
    nb = pair_masks.shape[0]
    ns = flip_masks.shape[0]
    for i in range(n):
        acc = diag[i] * x[i]
        for b in range(nb):
            acc += pair_coefs[b] * x[i ^ pair_masks[b]]
        for s in range(ns):
            j = ((i >> flip_nb_lo[s]) & 1) + 2 * ((i >> flip_nb_hi[s]) & 1)
            acc += flip_tables[s, j] * x[i ^ flip_masks[s]]
        out[i] = acc


@njit(cache=True, fastmath=True)
def lanczos_first_pass(diag, pair_masks, pair_coefs, flip_masks, flip_tables,
                       flip_nb_lo, flip_nb_hi, vj, vjm1, beta, w):
    """w = H vj - beta * vjm1; returns alpha = Re <vj, w>."""
    n = vj.shape[0]
    nb = pair_masks.shape[0]
    ns = flip_masks.shape[0]
    alpha = 0.0
    for i in range(n):
        acc = diag[i] * vj[i] - beta * vjm1[i]
        for b in range(nb):
            acc += pair_coefs[b] * vj[i ^ pair_masks[b]]
        for s in range(ns):
            j = ((i >> flip_nb_lo[s]) & 1) + 2 * ((i >> flip_nb_hi[s]) & 1)
            acc += flip_tables[s, j] * vj[i ^ flip_masks[s]]
        w[i] = acc
        alpha += vj[i].real * acc.real + vj[i].imag * acc.imag
    return alpha


@njit(cache=True, fastmath=True)
def lanczos_second_pass(w, vj, alpha):
    """w -= alpha * vj; returns beta = ||w||."""
    n = w.shape[0]
    s = 0.0
    for i in range(n):
        ww = w[i] - alpha * vj[i]
        w[i] = ww
        s += ww.real * ww.real + ww.imag * ww.imag
    return np.sqrt(s)
