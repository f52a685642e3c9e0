import numpy as np
import pytest

from chernsim.circuit import Circuit, composed_unitary, controlled, hadamard, swap, unitary_1q, unitary_2q
from chernsim.errors import BackendError, ConfigError
from chernsim.statevector import (
    NoiseSpec,
    basis_state,
    is_normalized,
    probabilities,
    product_state,
    run,
    run_noisy,
    sample,
    zero_state,
)
from conftest import random_unitary


def random_circuit(rng, width, depth):
    c = Circuit(width)
    for _ in range(depth):
        if width > 1 and rng.random() < 0.5:
            a, b = rng.choice(width, 2, replace=False)
            c = c.append(unitary_2q(int(a), int(b), random_unitary(rng, 4)))
        else:
            c = c.append(unitary_1q(int(rng.integers(width)), random_unitary(rng, 2)))
    return c


def test_bell_state():
    c = Circuit(2).extend([hadamard(0), controlled(0, 1, np.array([[0, 1], [1, 0]]))])
    p = probabilities(run(c, zero_state(2)), [0, 1])
    assert p == pytest.approx({"00": 0.5, "11": 0.5})


def test_run_matches_composed_unitary(rng):
    c = random_circuit(rng, 4, 12)
    psi = run(c, zero_state(4)).amplitudes
    assert np.allclose(psi, composed_unitary(c)[:, 0], atol=1e-12)


def test_fused_equals_unfused(rng):
    c = random_circuit(rng, 3, 20)
    a = run(c, zero_state(3)).amplitudes
    b = run(c, zero_state(3), fuse=False).amplitudes
    assert np.allclose(a, b, atol=1e-12)


def test_norm_preserved(rng):
    s = run(random_circuit(rng, 5, 30), zero_state(5))
    assert is_normalized(s)


def test_width_mismatch():
    with pytest.raises(BackendError):
        run(Circuit(2), zero_state(3))


def test_marginal_order():
    s = basis_state(3, "100")
    assert probabilities(s, [0]) == {"1": 1.0}
    assert probabilities(s, [2, 0]) == {"01": 1.0}


def test_product_state_line_order():
    s = product_state([[0, 1], [1, 0]])
    assert probabilities(s, [0, 1]) == {"10": 1.0}


def test_sampling_deterministic():
    s = run(Circuit(2).extend([hadamard(0), hadamard(1)]), zero_state(2))
    assert sample(s, [0, 1], 500, seed=7) == sample(s, [0, 1], 500, seed=7)
    assert sum(sample(s, [0, 1], 500, seed=7).values()) == 500


def test_sampling_frequencies(rng):
    c = Circuit(1).append(unitary_1q(0, random_unitary(rng, 2)))
    s = run(c, zero_state(1))
    p1 = probabilities(s, [0]).get("1", 0.0)
    counts = sample(s, [0], 20000, seed=int(rng.integers(1 << 30)))
    assert counts.get("1", 0) / 20000 == pytest.approx(p1, abs=5 * np.sqrt(0.25 / 20000))


def test_readout_flip_full():
    counts = sample(zero_state(2), [0, 1], 100, seed=1, readout_flip_p=0.999999)
    assert counts.get("11", 0) > 95


def test_noiseless_trajectory_is_exact(rng):
    c = random_circuit(rng, 3, 10)
    a = run(c, zero_state(3)).amplitudes
    b = run_noisy(c, zero_state(3), NoiseSpec(seed=3)).amplitudes
    assert np.array_equal(a, b)


def test_noisy_trajectories_reproducible():
    c = Circuit(2).extend([hadamard(0), swap(0, 1)] * 5)
    nz = NoiseSpec.paper_like(seed=11)
    a = run_noisy(c, zero_state(2), nz, trajectory=4).amplitudes
    b = run_noisy(c, zero_state(2), nz, trajectory=4).amplitudes
    assert np.array_equal(a, b)
    assert is_normalized(run_noisy(c, zero_state(2), nz, trajectory=5))


def test_noise_spec_validation():
    with pytest.raises(ConfigError):
        NoiseSpec(depolarizing_p=1.5)
    assert NoiseSpec.paper_like().gate_error(2) == pytest.approx(0.039)
    assert NoiseSpec.paper_like().gate_error(1) == pytest.approx(0.004)


def test_bad_bitstring():
    with pytest.raises(ConfigError):
        basis_state(2, "012")
