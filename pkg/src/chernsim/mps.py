"""Matrix-product-state circuit execution with a hard bond-dimension cap.

Tensors have index order ``(chi_left, physical, chi_right)``. Qubits may be
moved along the chain by SWAP gates, so the state keeps ``order[site] = line``.
Two-qubit gates need their lines on neighbouring sites: ``apply_gate`` rejects
anything else, ``apply_routed`` inserts the SWAPs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import SWAP_MATRIX, Circuit, Gate, swap
from .errors import BackendError, ConfigError, NonAdjacentGateError
from .numerics import svd_truncated
from .statevector import StateVector, counts_from_indices, flip_readout

MAX_CONTRACT_WIDTH = 14
DEFAULT_CUTOFF = 1e-12


@dataclass
class MpsState:
    tensors: list[np.ndarray]
    chi_max: int
    cutoff: float = DEFAULT_CUTOFF
    discarded_total: float = 0.0
    order: list[int] = field(default_factory=list)
    center: int = 0

    def __post_init__(self):
        if self.chi_max < 1:
            raise ConfigError("chi_max must be >= 1")
        if not self.order:
            self.order = list(range(len(self.tensors)))

    @property
    def width(self) -> int:
        return len(self.tensors)

    def site_of(self, line: int) -> int:
        return self.order.index(line)

    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MpsState":
        return MpsState([t.copy() for t in self.tensors], self.chi_max, self.cutoff,
                        self.discarded_total, list(self.order), self.center)


def mps_from_basis(width: int, bitstring: str, chi_max: int, cutoff: float = DEFAULT_CUTOFF) -> MpsState:
    if len(bitstring) != width or set(bitstring) - {"0", "1"}:
        raise ConfigError(f"bitstring {bitstring!r} does not describe {width} qubits")
    tensors = []
    for b in bitstring:
        t = np.zeros((1, 2, 1), dtype=complex)
        t[0, int(b), 0] = 1.0
        tensors.append(t)
    return MpsState(tensors, chi_max, cutoff)


def _move_center(m: MpsState, site: int) -> None:
    while m.center < site:
        i = m.center
        a, d, b = m.tensors[i].shape
        q, r = np.linalg.qr(m.tensors[i].reshape(a * d, b))
        m.tensors[i] = q.reshape(a, d, q.shape[1])
        m.tensors[i + 1] = np.tensordot(r, m.tensors[i + 1], axes=(1, 0))
        m.center += 1
    while m.center > site:
        i = m.center
        a, d, b = m.tensors[i].shape
        q, r = np.linalg.qr(m.tensors[i].reshape(a, d * b).conj().T)
        m.tensors[i] = q.conj().T.reshape(q.shape[1], d, b)
        m.tensors[i - 1] = np.tensordot(m.tensors[i - 1], r.conj().T, axes=(2, 0))
        m.center -= 1


def _pair_sites(m: MpsState, g: Gate) -> tuple[int, bool]:
    """Left site of the gate's bond and whether the gate's line order is reversed."""
    sa, sb = m.site_of(g.lines[0]), m.site_of(g.lines[1])
    if abs(sa - sb) != 1:
        raise NonAdjacentGateError(
            f"gate on lines {g.lines} sits on sites {sa},{sb}; route it with apply_routed"
        )
    return min(sa, sb), sa > sb


def _oriented(mat: np.ndarray, reversed_: bool) -> np.ndarray:
    return SWAP_MATRIX @ mat @ SWAP_MATRIX if reversed_ else mat


def _check_bonds(m: MpsState) -> None:
    worst = max(m.bond_dims(), default=1)
    if worst > m.chi_max:
        raise BackendError(f"bond dimension {worst} exceeds chi_max={m.chi_max}")


def apply_gate(m: MpsState, g: Gate) -> MpsState:
    """Apply ``g`` in place and return ``m``.

    One-qubit gates are exact. Two-qubit gates are followed by a truncated SVD
    of the bond; the dropped weight is added to ``discarded_total`` and the
    kept singular values are renormalised.
    """
    if len(g.lines) == 1:
        i = m.site_of(g.lines[0])
        m.tensors[i] = np.einsum("ts,asb->atb", g.matrix, m.tensors[i])
        return m
    if len(g.lines) != 2:
        raise BackendError(f"MPS backend supports 1- and 2-qubit gates, got {len(g.lines)} lines")
    i, rev = _pair_sites(m, g)
    if m.center not in (i, i + 1):
        _move_center(m, i)
    A, B = m.tensors[i], m.tensors[i + 1]
    a, c = A.shape[0], B.shape[2]
    theta = np.tensordot(A, B, axes=(2, 0))  # (a, 2, 2, c)
    gate = _oriented(g.matrix, rev).reshape(2, 2, 2, 2)
    theta = np.einsum("stuv,auvc->astc", gate, theta).reshape(a * 2, 2 * c)
    u, s, vh, dropped = svd_truncated(theta, m.chi_max, m.cutoff)
    s = s / np.linalg.norm(s)
    k = s.size
    m.tensors[i] = u.reshape(a, 2, k)
    m.tensors[i + 1] = (s[:, None] * vh).reshape(k, 2, c)
    m.center = i + 1
    m.discarded_total += dropped
    _check_bonds(m)
    return m


def apply_gate_sequence(m: MpsState, gates) -> MpsState:
    """Apply consecutive two-qubit gates that all act on the same adjacent pair.

    Gate-by-gate truncation is kept; the loop runs compiled. Repeated gate
    objects are deduplicated before being handed to the kernel.
    """
    from ._mps_kernels import apply_pair_sequence

    gates = list(gates)
    if not gates:
        return m
    lines = set(gates[0].lines)
    if len(lines) != 2 or any(set(g.lines) != lines for g in gates):
        raise BackendError("apply_gate_sequence needs two-qubit gates on one fixed pair of lines")
    i, _ = _pair_sites(m, gates[0])
    left_line = m.order[i]
    uniq: dict[tuple[int, bool], int] = {}
    mats, idx = [], np.empty(len(gates), dtype=np.int64)
    for n, g in enumerate(gates):
        rev = g.lines[0] != left_line
        key = (id(g), rev)
        if key not in uniq:
            uniq[key] = len(mats)
            mats.append(_oriented(g.matrix, rev))
        idx[n] = uniq[key]
    if m.center not in (i, i + 1):
        _move_center(m, i)
    A, B, dropped, _ = apply_pair_sequence(
        np.ascontiguousarray(m.tensors[i]), np.ascontiguousarray(m.tensors[i + 1]),
        np.ascontiguousarray(np.array(mats)), idx, int(m.chi_max), float(m.cutoff),
    )
    m.tensors[i], m.tensors[i + 1] = A, B
    m.center = i + 1
    m.discarded_total += dropped
    _check_bonds(m)
    return m


def _swap_sites(m: MpsState, i: int) -> None:
    apply_gate(m, swap(m.order[i], m.order[i + 1]))
    m.order[i], m.order[i + 1] = m.order[i + 1], m.order[i]


def route(m: MpsState, g: Gate) -> None:
    """Move the gate's second line next to its first with SWAPs (no-op if adjacent)."""
    if len(g.lines) != 2:
        return
    anchor = m.site_of(g.lines[0])
    mover = m.site_of(g.lines[1])
    while mover > anchor + 1:
        _swap_sites(m, mover - 1)
        mover -= 1
    while mover < anchor - 1:
        _swap_sites(m, mover)
        mover += 1


def apply_routed(m: MpsState, g: Gate) -> MpsState:
    route(m, g)
    return apply_gate(m, g)


def _runs(gates):
    run: list[Gate] = []
    for g in gates:
        if run and (len(g.lines) != 2 or set(g.lines) != set(run[0].lines)):
            yield run
            run = []
        if len(g.lines) != 2:
            yield [g]
        else:
            run.append(g)
    if run:
        yield run


def run_mps(c: Circuit, m: MpsState) -> MpsState:
    """Execute a circuit on ``m`` in place, routing long-range gates with SWAPs."""
    if c.width != m.width:
        raise BackendError(f"circuit width {c.width} does not match MPS width {m.width}")
    for run in _runs(c.gates):
        if len(run) == 1:
            apply_routed(m, run[0])
        else:
            route(m, run[0])
            apply_gate_sequence(m, run)
    return m


def contract_to_statevector(m: MpsState) -> StateVector:
    if m.width > MAX_CONTRACT_WIDTH:
        raise ConfigError(f"contraction limited to width <= {MAX_CONTRACT_WIDTH}")
    psi = m.tensors[0].reshape(2, -1)
    for t in m.tensors[1:]:
        psi = np.tensordot(psi, t, axes=(psi.ndim - 1, 0))
        psi = psi.reshape(-1, t.shape[2])
    psi = psi.reshape((2,) * m.width)
    psi = np.transpose(psi, [m.site_of(q) for q in range(m.width)])
    return StateVector(m.width, psi.reshape(-1))


def norm(m: MpsState) -> float:
    return float(np.linalg.norm(m.tensors[m.center]))


def mps_sample(m: MpsState, lines, shots: int, seed: int, readout_flip_p: float = 0.0) -> dict[str, int]:
    """Sequential conditional sampling, sweeping sites left to right.

    Every site is sampled and the bits of ``lines`` are kept, which gives the
    exact marginal distribution.
    """
    if shots < 1:
        raise ConfigError("shots must be >= 1")
    lines = tuple(lines)
    _move_center(m, 0)
    rng = np.random.default_rng(seed)
    left = np.ones((shots, 1), dtype=complex)
    bits = np.zeros((shots, m.width), dtype=np.int64)
    for site, t in enumerate(m.tensors):
        v0 = left @ t[:, 0, :]
        v1 = left @ t[:, 1, :]
        p0 = np.sum(np.abs(v0) ** 2, axis=1)
        p1 = np.sum(np.abs(v1) ** 2, axis=1)
        tot = p0 + p1
        one = rng.random(shots) * tot >= p0
        bits[:, site] = one
        chosen = np.where(one[:, None], v1, v0)
        left = chosen / np.sqrt(np.where(one, p1, p0))[:, None]
    k = len(lines)
    cols = [m.site_of(q) for q in lines]
    weights = 1 << np.arange(k - 1, -1, -1)
    outcomes = (bits[:, cols] * weights).sum(axis=1) if k else np.zeros(shots, dtype=np.int64)
    outcomes = flip_readout(outcomes, k, readout_flip_p, rng)
    return counts_from_indices(outcomes, k)
