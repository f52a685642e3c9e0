"""Compiled inner loop for long runs of two-site gates on one MPS bond."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def apply_pair_sequence(a_tensor, b_tensor, mats, idx, chi_max, cutoff):
    """Apply ``mats[idx[0]], mats[idx[1]], ...`` to sites ``(i, i+1)``.

    Each gate is followed by an SVD truncated to ``chi_max`` values above
    ``cutoff`` and renormalisation, exactly as in the one-gate path. The
    orthogonality centre must lie on one of the two sites on entry; it ends on
    the right site.

    Returns ``(A, B, discarded_weight, max_bond)``.
    """
    a = a_tensor.shape[0]
    c = b_tensor.shape[2]
    A = np.ascontiguousarray(a_tensor)
    B = np.ascontiguousarray(b_tensor)
    discarded = 0.0
    max_bond = 0
    for n in range(idx.shape[0]):
        g = mats[idx[n]]
        b = A.shape[2]
        theta = np.ascontiguousarray(A.reshape(a * 2, b)) @ np.ascontiguousarray(B.reshape(b, 2 * c))
        out = np.zeros((a * 2, 2 * c), dtype=np.complex128)
        for ai in range(a):
            for ci in range(c):
                v0 = theta[ai * 2 + 0, 0 * c + ci]
                v1 = theta[ai * 2 + 0, 1 * c + ci]
                v2 = theta[ai * 2 + 1, 0 * c + ci]
                v3 = theta[ai * 2 + 1, 1 * c + ci]
                for so in range(2):
                    for to in range(2):
                        r = 2 * so + to
                        out[ai * 2 + so, to * c + ci] = g[r, 0] * v0 + g[r, 1] * v1 + g[r, 2] * v2 + g[r, 3] * v3
        u, s, vh = np.linalg.svd(out, full_matrices=False)
        keep = 0
        for k in range(s.shape[0]):
            if s[k] > cutoff:
                keep += 1
        if keep < 1:
            keep = 1
        if keep > chi_max:
            keep = chi_max
        dropped = 0.0
        for k in range(keep, s.shape[0]):
            dropped += s[k] * s[k]
        discarded += dropped
        norm = 0.0
        for k in range(keep):
            norm += s[k] * s[k]
        norm = np.sqrt(norm)
        A = np.ascontiguousarray(u[:, :keep]).reshape(a, 2, keep)
        sv = np.empty((keep, 2 * c), dtype=np.complex128)
        for k in range(keep):
            sv[k, :] = (s[k] / norm) * vh[k, :]
        B = sv.reshape(keep, 2, c)
        if keep > max_bond:
            max_bond = keep
    return A, B, discarded, max_bond
