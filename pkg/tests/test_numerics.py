import numpy as np
import pytest

from chernsim.errors import ConfigError, NotHermitianError
from chernsim.numerics import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    apply_local,
    check_hermitian,
    eig_hermitian_2x2,
    eig_hermitian_dense,
    expm_i_hermitian,
    fix_gauge,
    nearest_unitary,
    svd_truncated,
)
from conftest import random_unitary


def random_h2(rng):
    d = rng.normal(size=4)
    return d[0] * np.eye(2) + d[1] * PAULI_X + d[2] * PAULI_Y + d[3] * PAULI_Z


def test_check_hermitian_rejects_asymmetric():
    with pytest.raises(NotHermitianError):
        check_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_check_hermitian_rejects_nonsquare():
    with pytest.raises(ConfigError):
        check_hermitian(np.zeros((2, 3)))


def test_eig_2x2_matches_eigh(rng):
    h = random_h2(rng)
    pair = eig_hermitian_2x2(h)
    w = np.linalg.eigvalsh(h)
    assert pair.lower.value == pytest.approx(w[0], abs=1e-12)
    assert pair.upper.value == pytest.approx(w[1], abs=1e-12)
    for ep in pair:
        assert np.allclose(h @ ep.vector, ep.value * ep.vector, atol=1e-12)
        assert np.linalg.norm(ep.vector) == pytest.approx(1.0, abs=1e-14)


def test_eig_2x2_sigma_z():
    pair = eig_hermitian_2x2(3 * PAULI_Z)
    assert pair.lower.value == -3
    assert np.allclose(pair.lower.vector, [0, 1])
    assert pair.gap == 6


def test_eig_2x2_degenerate_flagged():
    assert eig_hermitian_2x2(np.eye(2)).degenerate


def test_gauge_is_phase_invariant(rng):
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    v /= np.linalg.norm(v)
    w = fix_gauge(v)
    assert np.allclose(fix_gauge(v * np.exp(1j * rng.uniform(0, 2 * np.pi))), w, atol=1e-12)
    dom = np.argmax(np.abs(w))
    assert abs(w[dom].imag) < 1e-12 and w[dom].real > 0


def test_gauge_tie_uses_lowest_index():
    v = np.array([1j, 1.0]) / np.sqrt(2)
    assert fix_gauge(v)[0].real == pytest.approx(1 / np.sqrt(2))


def test_dense_eig_sorted(rng):
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = a + a.conj().T
    w, v = eig_hermitian_dense(h)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(h @ v, v * w, atol=1e-10)


@pytest.mark.parametrize("sign", [1, -1])
def test_expm_closed_form_matches_eigh(rng, sign):
    h = random_h2(rng)
    t = rng.uniform(0, 3)
    w, v = np.linalg.eigh(h)
    ref = (v * np.exp(-1j * sign * w * t)) @ v.conj().T
    assert np.allclose(expm_i_hermitian(h, t, sign), ref, atol=1e-12)


def test_expm_forward_backward_identity(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = a + a.conj().T
    u = expm_i_hermitian(h, 0.7, 1) @ expm_i_hermitian(h, 0.7, -1)
    assert np.allclose(u, np.eye(4), atol=1e-12)


def test_expm_bad_sign():
    with pytest.raises(ConfigError):
        expm_i_hermitian(PAULI_Z, 1.0, 2)


def test_svd_truncated_weight(rng):
    m = rng.normal(size=(6, 5))
    u, s, vh, dropped = svd_truncated(m, 2)
    full = np.linalg.svd(m, compute_uv=False)
    assert s.size == 2
    assert dropped == pytest.approx(np.sum(full[2:] ** 2))


def test_svd_keeps_one_value():
    _, s, _, _ = svd_truncated(np.zeros((2, 2)), 4, cutoff=1e-12)
    assert s.size == 1


def test_apply_local_matches_kron(rng):
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    out = apply_local(psi, PAULI_X, (1,), 3)
    ref = np.kron(np.kron(np.eye(2), PAULI_X), np.eye(2)) @ psi
    assert np.allclose(out, ref)


def test_nearest_unitary(rng):
    u = random_unitary(rng, 4)
    assert np.allclose(nearest_unitary(u), u, atol=1e-12)
    drifted = nearest_unitary(u + 1e-9 * rng.normal(size=(4, 4)))
    assert np.allclose(drifted.conj().T @ drifted, np.eye(4), atol=1e-14)
