"""Dense complex linear algebra for 2x2 band Hamiltonians and small state spaces."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ConfigError, NotHermitianError

HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-9
MAX_DENSE_DIM = 4096

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class EigenPair(NamedTuple):
    value: float
    vector: np.ndarray


class BandPair(NamedTuple):
    """Both eigenpairs of a 2x2 Hermitian matrix, ascending in energy."""

    lower: EigenPair
    upper: EigenPair

    @property
    def gap(self) -> float:
        return self.upper.value - self.lower.value

    @property
    def degenerate(self) -> bool:
        return self.gap < DEGENERACY_TOL


def hermitian_asymmetry(h: np.ndarray) -> float:
    h = np.asarray(h)
    return float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0


def check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {h.shape}")
    asym = hermitian_asymmetry(h)
    # relative slack for large-norm matrices
    if asym > tol * max(1.0, float(np.max(np.abs(h)))):
        raise NotHermitianError(asym)
    return h


def fix_gauge(v: np.ndarray) -> np.ndarray:
    """Rotate the phase of ``v`` so its dominant component is real and positive.

    The dominant component is the lowest index whose modulus is within 1e-12 of
    the largest modulus, which makes the choice deterministic under ties.
    """
    mags = np.abs(v)
    idx = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
    ref = v[idx]
    if ref == 0:
        return v
    return v * (abs(ref) / ref)


def fix_gauge_columns(vecs: np.ndarray) -> np.ndarray:
    out = np.empty_like(vecs)
    for j in range(vecs.shape[1]):
        out[:, j] = fix_gauge(vecs[:, j])
    return out


def eig_hermitian_2x2(h: np.ndarray) -> BandPair:
    """Closed-form eigen-solve of a 2x2 Hermitian matrix.

    Writes ``h = c I + d.sigma`` and picks, for each eigenvalue, the better
    conditioned of the two null-space candidates of ``h - E``.
    """
    h = check_hermitian(h)
    if h.shape != (2, 2):
        raise ConfigError(f"expected a 2x2 matrix, got {h.shape}")
    a, d = h[0, 0].real, h[1, 1].real
    b = h[0, 1]
    c = 0.5 * (a + d)
    dz = 0.5 * (a - d)
    r = float(np.sqrt(dz * dz + abs(b) ** 2))
    if r == 0.0:
        e0 = np.array([1, 0], dtype=complex)
        e1 = np.array([0, 1], dtype=complex)
        return BandPair(EigenPair(c, e0), EigenPair(c, e1))
    if dz >= 0:
        lo = np.array([b, -(dz + r)], dtype=complex)
        hi = np.array([dz + r, np.conj(b)], dtype=complex)
    else:
        lo = np.array([r - dz, -np.conj(b)], dtype=complex)
        hi = np.array([b, r - dz], dtype=complex)
    lo = fix_gauge(lo / np.linalg.norm(lo))
    hi = fix_gauge(hi / np.linalg.norm(hi))
    return BandPair(EigenPair(c - r, lo), EigenPair(c + r, hi))


def eig_hermitian_dense(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full spectrum (ascending) and gauge-fixed eigenvectors as columns."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] > MAX_DENSE_DIM:
        raise ConfigError(f"dense eigen-solve limited to dim <= {MAX_DENSE_DIM}, got {h.shape}")
    h = check_hermitian(h, tol=1e-10)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return w, fix_gauge_columns(v)


def expm_i_hermitian(h: np.ndarray, t: float, sign: int = 1) -> np.ndarray:
    """Return ``exp(-i * sign * h * t)``.

    2x2 inputs use the Pauli closed form; larger ones go through eigh.
    """
    if sign not in (1, -1):
        raise ConfigError(f"sign must be +1 or -1, got {sign}")
    h = np.asarray(h, dtype=complex)
    tau = sign * t
    if h.shape == (2, 2):
        c = 0.5 * (h[0, 0] + h[1, 1]).real
        dsig = h - c * PAULI_I
        r = float(np.sqrt(0.5 * np.sum(np.abs(dsig) ** 2)))
        if r == 0.0:
            return np.exp(-1j * c * tau) * PAULI_I.copy()
        return np.exp(-1j * c * tau) * (np.cos(r * tau) * PAULI_I - 1j * (np.sin(r * tau) / r) * dsig)
    w, v = np.linalg.eigh(check_hermitian(h, tol=1e-10))
    return (v * np.exp(-1j * w * tau)) @ v.conj().T


def nearest_unitary(m: np.ndarray) -> np.ndarray:
    """Unitary polar factor of ``m``; removes rounding drift from long products."""
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def svd_truncated(m: np.ndarray, chi_max: int, cutoff: float = 0.0):
    """Truncated SVD keeping at most ``chi_max`` singular values above ``cutoff``.

    Returns ``(U, s, Vh, discarded_weight)`` where the discarded weight is the sum
    of squared dropped singular values. At least one value is always kept.
    """
    if chi_max < 1:
        raise ConfigError("chi_max must be >= 1")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    keep = int(min(chi_max, max(1, np.count_nonzero(s > cutoff))))
    discarded = float(np.sum(s[keep:] ** 2))
    return u[:, :keep], s[:keep], vh[:keep, :], discarded


def apply_local(psi: np.ndarray, op: np.ndarray, lines, width: int) -> np.ndarray:
    """Apply a ``2^k x 2^k`` operator on ``lines`` of a ``width``-qubit array.

    ``psi`` has leading dimension ``2**width`` (line 0 is the most significant
    bit) and may carry extra trailing batch axes.
    """
    lines = tuple(lines)
    k = len(lines)
    rest = psi.shape[1:]
    t = psi.reshape((2,) * width + rest)
    opt = op.reshape((2,) * (2 * k))
    t = np.tensordot(opt, t, axes=(tuple(range(k, 2 * k)), lines))
    t = np.moveaxis(t, tuple(range(k)), lines)
    return t.reshape(psi.shape)
