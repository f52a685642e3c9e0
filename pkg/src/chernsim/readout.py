"""Phase readout from executed circuits: Hadamard test and phase estimation.

Line conventions: the Hadamard test uses line 0 as the auxiliary qubit and
line 1 as the system. Phase estimation puts the work register on lines
``0 .. m-1`` (line 0 is the most significant bit) and the system on line ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adiabatic import EvolutionPlan
from .circuit import Circuit, controlled, hadamard, inverse_qft_gates, s_gate, unitary_1q
from .errors import ConfigError, UndersamplingError
from .numerics import nearest_unitary
from .mps import contract_to_statevector, mps_from_basis, mps_sample, run_mps
from .seeds import derive_seed
from .statevector import (
    NoiseSpec,
    basis_state,
    counts_from_indices,
    probability_vector,
    run,
    run_noisy,
    sample_indices,
)

DEFAULT_EPSILON = 0.1
DEFAULT_TRAJECTORIES = 32


def wrap_phase(x):
    """Map angles to ``[-pi, pi)``."""
    return (np.asarray(x, dtype=float) + np.pi) % (2 * np.pi) - np.pi


# --- Hadamard test -------------------------------------------------------------


@dataclass(frozen=True)
class HadamardEstimate:
    p_cos0: float
    p_sin0: float
    shots: int
    theta: float

    @property
    def consistency(self) -> float:
        """``cos^2 + sin^2 - 1`` of the implied estimates."""
        return (2 * self.p_cos0 - 1) ** 2 + (1 - 2 * self.p_sin0) ** 2 - 1


def hadamard_test_circuits(plan: EvolutionPlan, u_init: np.ndarray) -> tuple[Circuit, Circuit]:
    """Cosine and sine circuits on two lines.

    ``P_cos(0) = (1 + cos th) / 2`` and ``P_sin(0) = (1 - sin th) / 2`` where
    ``e^{i th}`` is the eigenphase of the plan on the prepared state. The sine
    variant inserts an S gate on the auxiliary line before the final H.
    """
    head = [unitary_1q(1, u_init, label="Uinit"), hadamard(0)]
    body = plan.controlled_gates(0, 1)
    cos_c = Circuit(2).extend(head + body + [hadamard(0)]).measure([0])
    sin_c = Circuit(2).extend(head + body + [s_gate(0), hadamard(0)]).measure([0])
    return cos_c, sin_c


def reconstruct_theta(p_cos0: float, p_sin0: float) -> float:
    """Angle of ``(2 p_cos0 - 1, 1 - 2 p_sin0)`` in ``[-pi, pi)``."""
    pc = min(max(float(p_cos0), 0.0), 1.0)
    ps = min(max(float(p_sin0), 0.0), 1.0)
    th = float(np.arctan2(1 - 2 * ps, 2 * pc - 1))
    return -np.pi if th >= np.pi else th


def _p0(c: Circuit, noise: NoiseSpec | None, trajectories: int, seed: int, backend: str) -> float:
    init = basis_state(2, "00")
    if backend == "mps":
        if noise is not None and not noise.is_noiseless:
            raise ConfigError("trajectory noise is only available on the statevector backend")
        state = run_mps(c, mps_from_basis(2, "00", chi_max=4))
        return float(probability_vector(contract_to_statevector(state), [0])[0])
    if backend != "statevector":
        raise ConfigError(f"unknown backend {backend!r}; expected 'statevector' or 'mps'")
    if noise is None or noise.depolarizing_p == 0 and not noise.depolarizing_p2:
        return float(probability_vector(run(c, init), [0])[0])
    acc = 0.0
    for t in range(trajectories):
        nz = NoiseSpec(noise.depolarizing_p, 0.0, derive_seed(noise.seed, seed), noise.depolarizing_p2)
        acc += float(probability_vector(run_noisy(c, init, nz, t), [0])[0])
    return acc / trajectories


def hadamard_estimate(plan: EvolutionPlan, u_init: np.ndarray, shots: int = 0, seed: int = 0,
                      noise: NoiseSpec | None = None,
                      trajectories: int = DEFAULT_TRAJECTORIES,
                      backend: str = "statevector") -> HadamardEstimate:
    """Run both Hadamard-test circuits.

    ``shots = 0`` returns exact probabilities. With noise the outcome
    distribution is averaged over ``trajectories`` and then sampled;
    readout flips come from ``noise.readout_flip_p``.
    """
    if shots < 0:
        raise ConfigError("shots must be >= 0")
    cos_c, sin_c = hadamard_test_circuits(plan, u_init)
    pc = _p0(cos_c, noise, trajectories, derive_seed(seed, 0), backend)
    ps = _p0(sin_c, noise, trajectories, derive_seed(seed, 1), backend)
    flip = noise.readout_flip_p if noise is not None else 0.0
    if shots:
        pc = _sampled_p0(pc, shots, derive_seed(seed, 2), flip)
        ps = _sampled_p0(ps, shots, derive_seed(seed, 3), flip)
    elif flip:
        pc = pc * (1 - flip) + (1 - pc) * flip
        ps = ps * (1 - flip) + (1 - ps) * flip
    return HadamardEstimate(pc, ps, shots, reconstruct_theta(pc, ps))


def _sampled_p0(p0: float, shots: int, seed: int, flip: float) -> float:
    p = np.array([p0, 1 - p0])
    out = sample_indices(p, 1, shots, seed, flip)
    return float(np.count_nonzero(out == 0)) / shots


# --- phase estimation ----------------------------------------------------------


@dataclass
class QpeResult:
    m: int
    m_meas: int
    counts: dict[str, int]
    phases: np.ndarray
    loops: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def grid_step(self) -> float:
        return 2 * np.pi / 2**self.m_meas / self.loops


def decode_phase(y, m_meas: int, loops: int = 1):
    """Register value ``y`` (top ``m_meas`` bits) to ``wrap(2 pi y / 2^m_meas) / loops``.

    The wrap is done on the integer so every result is exactly a grid point.
    """
    half = 2 ** (m_meas - 1)
    signed = (np.asarray(y, dtype=np.int64) + half) % 2**m_meas - half
    return 2 * np.pi * signed / 2**m_meas / loops


def qpe_circuit(plan: EvolutionPlan, u_init: np.ndarray, m: int, repeat_powers: bool = True) -> Circuit:
    """Phase estimation of the plan unitary on the state ``u_init|0>``.

    Work qubit ``j`` controls ``plan^(2^(m-1-j))``. With ``repeat_powers`` the
    plan is repeated gate by gate; otherwise each power is one pre-multiplied
    controlled gate.
    """
    if m < 1:
        raise ConfigError("m must be >= 1")
    sys_line = m
    gates = [unitary_1q(sys_line, u_init, label="Uinit")]
    gates += [hadamard(j) for j in range(m)]
    for j in range(m):
        power = 2 ** (m - 1 - j)
        if repeat_powers:
            gates += plan.controlled_gates(j, sys_line) * power
        else:
            # high powers of a long product drift off the unitary group by ~1e-11
            u = nearest_unitary(np.linalg.matrix_power(plan.product(), power))
            gates.append(controlled(j, sys_line, u, label=f"cU^{power}"))
    gates += inverse_qft_gates(list(range(m)))
    return Circuit(m + 1).extend(gates)


def qpe_run(plan: EvolutionPlan, u_init: np.ndarray, m: int, m_meas: int, backend: str = "statevector",
            shots: int = 1000, seed: int = 0, loops: int = 2, chi_max: int = 60,
            cutoff: float = 1e-12) -> QpeResult:
    """Execute phase estimation and decode the measured top ``m_meas`` bits.

    ``loops`` is how many times the plan traverses the loop: 2 for the double
    loop (the decoder halves the phase), 1 for the mirror-symmetric sweep.
    Backends: ``"statevector"`` (pre-multiplied powers) or ``"mps"``
    (gate-by-gate repetition at bond cap ``chi_max``).
    """
    if not 1 <= m_meas <= m:
        raise ConfigError("need 1 <= m_meas <= m")
    if shots < 1:
        raise ConfigError("shots must be >= 1")
    lines = list(range(m_meas))
    meta: dict = {"backend": backend}
    if backend == "statevector":
        c = qpe_circuit(plan, u_init, m, repeat_powers=False).measure(lines)
        sv = run(c, basis_state(m + 1, "0" * (m + 1)))
        idx = sample_indices(probability_vector(sv, lines), m_meas, shots, seed)
        counts = counts_from_indices(idx, m_meas)
    elif backend == "mps":
        c = qpe_circuit(plan, u_init, m, repeat_powers=True).measure(lines)
        state = run_mps(c, mps_from_basis(m + 1, "0" * (m + 1), chi_max, cutoff))
        meta.update(chi_max=chi_max, discarded=state.discarded_total, max_bond=max(state.bond_dims()))
        counts = mps_sample(state, lines, shots, seed)
        idx = np.repeat([int(k, 2) for k in counts], list(counts.values()))
    else:
        raise ConfigError(f"unknown backend {backend!r}; expected 'statevector' or 'mps'")
    return QpeResult(m, m_meas, counts, decode_phase(idx, m_meas, loops), loops, meta)


# --- Wannier density and winding -------------------------------------------------


def wannier_density(samples, epsilon: float = DEFAULT_EPSILON, n_grid: int = 512,
                    periodic: bool = True, weights=None) -> tuple[np.ndarray, np.ndarray]:
    """Lorentzian sum ``P(X) = sum_j eps / (eps^2 + (X - X_j)^2)`` on ``[-pi, pi)``.

    With ``periodic`` the distance is wrapped into ``[-pi, pi)``; otherwise
    the plain difference is used.
    """
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ConfigError("wannier_density needs at least one sample")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float).ravel()
    grid = -np.pi + 2 * np.pi * np.arange(n_grid) / n_grid
    d = grid[:, None] - x[None, :]
    if periodic:
        d = wrap_phase(d)
    dens = (epsilon / (epsilon**2 + d**2)) @ w
    return grid, dens


def density_center(samples, epsilon: float = DEFAULT_EPSILON, n_grid: int = 512) -> float:
    grid, dens = wannier_density(samples, epsilon, n_grid)
    return float(grid[int(np.argmax(dens))])


def winding_number(centers, grid_step: float = 0.0) -> int:
    """Net number of 2 pi windings of a closed sequence of phases.

    Consecutive jumps (including the closing one from the last centre back
    to the first) are wrapped to the nearest 2 pi image. A wrapped jump larger
    than ``pi/2 + grid_step`` means the sweep is too coarse to unwrap.
    """
    c = np.asarray(centers, dtype=float)
    if c.size < 8:
        raise UndersamplingError(f"need at least 8 points for a winding number, got {c.size}")
    jumps = wrap_phase(np.diff(np.r_[c, c[0]]))
    worst = float(np.max(np.abs(jumps)))
    if worst > np.pi / 2 + grid_step:
        raise UndersamplingError(
            f"centre jumps by {worst:.3f} rad between neighbouring points; use more ky points"
        )
    return int(np.round(np.sum(jumps) / (2 * np.pi)))
