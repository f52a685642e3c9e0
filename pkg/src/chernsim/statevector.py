"""Exact statevector execution, outcome probabilities, sampling and trajectory noise."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit
from .errors import BackendError, ConfigError
from .numerics import PAULI_X, PAULI_Y, PAULI_Z, apply_local
from .seeds import derive_seed

MAX_SV_WIDTH = 20
NORM_TOL = 1e-10
_PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


@dataclass
class StateVector:
    width: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.width,):
            raise ConfigError(f"expected {2**self.width} amplitudes, got {self.amplitudes.shape}")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.width, self.amplitudes.copy())


def zero_state(width: int) -> StateVector:
    return basis_state(width, "0" * width)


def basis_state(width: int, bitstring: str) -> StateVector:
    if len(bitstring) != width or set(bitstring) - {"0", "1"}:
        raise ConfigError(f"bitstring {bitstring!r} does not describe {width} qubits")
    if width > MAX_SV_WIDTH:
        raise ConfigError(f"statevector backend limited to {MAX_SV_WIDTH} qubits")
    amps = np.zeros(2**width, dtype=complex)
    amps[int(bitstring, 2)] = 1.0
    return StateVector(width, amps)


def product_state(vectors) -> StateVector:
    """Tensor product of single-qubit vectors, first vector on line 0."""
    amps = np.array([1.0 + 0j])
    for v in vectors:
        amps = np.kron(amps, np.asarray(v, dtype=complex))
    return StateVector(len(vectors), amps)


@dataclass(frozen=True)
class NoiseSpec:
    """Generic trajectory noise: a random Pauli after gates, bit flips at readout.

    ``depolarizing_p2`` applies to gates on two or more lines and defaults to
    ``depolarizing_p``.
    """

    depolarizing_p: float = 0.0
    readout_flip_p: float = 0.0
    seed: int = 0
    depolarizing_p2: float | None = None

    def __post_init__(self):
        for name in ("depolarizing_p", "readout_flip_p"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {p}")
        if self.depolarizing_p2 is not None and not 0.0 <= self.depolarizing_p2 < 1.0:
            raise ConfigError(f"depolarizing_p2 must lie in [0, 1), got {self.depolarizing_p2}")

    @classmethod
    def paper_like(cls, seed: int = 0, readout_flip_p: float = 0.0) -> "NoiseSpec":
        """Error rates from average gate fidelities of 99.6 % (1q) and 96.1 % (2q)."""
        return cls(depolarizing_p=1 - 0.996, readout_flip_p=readout_flip_p, seed=seed, depolarizing_p2=1 - 0.961)

    @property
    def is_noiseless(self) -> bool:
        return self.depolarizing_p == 0 and self.readout_flip_p == 0 and not self.depolarizing_p2

    def gate_error(self, n_lines: int) -> float:
        if n_lines >= 2 and self.depolarizing_p2 is not None:
            return self.depolarizing_p2
        return self.depolarizing_p


def _check_width(c: Circuit, s: StateVector) -> None:
    if c.width != s.width:
        raise BackendError(f"circuit width {c.width} does not match state width {s.width}")


def _fused(gates):
    """Merge runs of consecutive gates acting on the same line tuple."""
    lines, mat = None, None
    for g in gates:
        if g.lines == lines:
            mat = g.matrix @ mat
        else:
            if lines is not None:
                yield lines, mat
            lines, mat = g.lines, g.matrix
    if lines is not None:
        yield lines, mat


def run(c: Circuit, initial: StateVector, fuse: bool = True) -> StateVector:
    """Apply all gates of ``c`` to a copy of ``initial``.

    With ``fuse`` consecutive gates on the same lines are multiplied first,
    which is exact up to rounding and pays off for long repeated sequences.
    """
    _check_width(c, initial)
    psi = initial.amplitudes.copy()
    ops = _fused(c.gates) if fuse else ((g.lines, g.matrix) for g in c.gates)
    for lines, mat in ops:
        psi = apply_local(psi, mat, lines, c.width)
    return StateVector(c.width, psi)


def run_noisy(c: Circuit, initial: StateVector, noise: NoiseSpec, trajectory: int = 0) -> StateVector:
    """One stochastic trajectory.

    After each gate, every line it touches independently receives a uniformly
    random Pauli with the gate's error probability. Readout flips are applied
    by ``sample``. Trajectory ``i`` draws from ``derive_seed(noise.seed, i)``.
    """
    _check_width(c, initial)
    if noise.depolarizing_p == 0 and not noise.depolarizing_p2:
        return run(c, initial)
    rng = np.random.default_rng(derive_seed(noise.seed, trajectory))
    psi = initial.amplitudes.copy()
    for g in c.gates:
        psi = apply_local(psi, g.matrix, g.lines, c.width)
        p = noise.gate_error(len(g.lines))
        if p == 0:
            continue
        for q in g.lines:
            if rng.random() < p:
                psi = apply_local(psi, _PAULIS[rng.integers(3)], (q,), c.width)
    return StateVector(c.width, psi)


def _marginal(s: StateVector, lines) -> np.ndarray:
    lines = tuple(lines)
    for q in lines:
        if not 0 <= q < s.width:
            raise ConfigError(f"line {q} out of range for width {s.width}")
    p = (np.abs(s.amplitudes) ** 2).reshape((2,) * s.width)
    others = tuple(q for q in range(s.width) if q not in lines)
    p = p.sum(axis=others) if others else p
    # remaining axes are in ascending line order; reorder to the requested order
    kept = sorted(lines)
    p = np.transpose(p, [kept.index(q) for q in lines])
    p = p.reshape(-1)
    return p / p.sum()


def _key(index: int, k: int) -> str:
    return format(index, f"0{k}b") if k else ""


def probabilities(s: StateVector, lines) -> dict[str, float]:
    """Outcome distribution of ``lines`` (bitstrings in the given line order).

    Outcomes with probability below 1e-15 are omitted.
    """
    lines = tuple(lines)
    p = _marginal(s, lines)
    return {_key(i, len(lines)): float(v) for i, v in enumerate(p) if v > 1e-15}


def probability_vector(s: StateVector, lines) -> np.ndarray:
    return _marginal(s, lines)


def flip_readout(counts: np.ndarray, k: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Apply independent bit flips with probability ``p`` to integer outcomes."""
    if p == 0 or k == 0:
        return counts
    flips = rng.random((counts.size, k)) < p
    mask = (flips * (1 << np.arange(k - 1, -1, -1))).sum(axis=1)
    return counts ^ mask


def sample_indices(p: np.ndarray, k: int, shots: int, seed: int, readout_flip_p: float = 0.0) -> np.ndarray:
    if shots < 1:
        raise ConfigError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    p = np.clip(p, 0.0, None)
    outcomes = rng.choice(p.size, size=shots, p=p / p.sum())
    return flip_readout(outcomes, k, readout_flip_p, rng)


def counts_from_indices(outcomes: np.ndarray, k: int) -> dict[str, int]:
    c = Counter(int(x) for x in outcomes)
    return {_key(i, k): c[i] for i in sorted(c)}


def sample(s: StateVector, lines, shots: int, seed: int, readout_flip_p: float = 0.0) -> dict[str, int]:
    """Draw ``shots`` measurement outcomes of ``lines``; deterministic given ``seed``."""
    lines = tuple(lines)
    outcomes = sample_indices(_marginal(s, lines), len(lines), shots, seed, readout_flip_p)
    return counts_from_indices(outcomes, len(lines))


def is_normalized(s: StateVector, tol: float = NORM_TOL) -> bool:
    return abs(s.norm - 1.0) < tol
