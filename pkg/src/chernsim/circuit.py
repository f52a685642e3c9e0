"""Gate-level circuit representation.

Bit order: line 0 is the most significant bit of a basis-state index, so the
bitstring "101" on three lines is index 5. Multi-line gate matrices use the
same convention over their own ``lines`` tuple (first listed line most
significant). For controlled gates the control line comes first.

Circuits are immutable; ``append`` and friends return new circuits. Gate
objects are frozen and may be shared between circuits or repeated inside
one circuit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError
from .numerics import apply_local

UNITARY_TOL = 1e-12
MAX_COMPOSE_WIDTH = 10

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j]).astype(complex)
_SDG = np.diag([1, -1j]).astype(complex)
SWAP_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


class GateKind(str, Enum):
    HADAMARD = "H"
    S = "S"
    SDG = "SDG"
    PHASE = "P"
    UNITARY_1Q = "U1"
    UNITARY_2Q = "U2"
    CONTROLLED = "CU"


def _check_unitary(u: np.ndarray) -> None:
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > UNITARY_TOL:
        raise ConfigError(f"gate matrix is not unitary: max|U^dagger U - I| = {err:.3e}")


@dataclass(frozen=True, eq=False)
class Gate:
    """A unitary acting on ``lines``.

    ``matrix`` is the full ``2^k x 2^k`` matrix on ``lines``; for controlled
    gates ``base`` holds the target unitary.
    """

    kind: GateKind
    lines: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)
    angle: float | None = None
    base: np.ndarray | None = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        if len(set(self.lines)) != len(self.lines):
            raise ConfigError(f"gate lines must be distinct, got {self.lines}")
        if any(q < 0 for q in self.lines):
            raise ConfigError(f"negative line index in {self.lines}")
        if self.matrix.shape != (2 ** len(self.lines),) * 2:
            raise ConfigError(f"matrix shape {self.matrix.shape} does not fit lines {self.lines}")
        self.matrix.setflags(write=False)

    @property
    def control(self) -> int | None:
        return self.lines[0] if self.kind is GateKind.CONTROLLED else None

    @property
    def targets(self) -> tuple[int, ...]:
        return self.lines[1:] if self.kind is GateKind.CONTROLLED else self.lines

    def describe(self) -> str:
        name = self.label or self.kind.value
        if self.angle is not None:
            name = f"{name}({self.angle:.12g})"
        if self.kind is GateKind.CONTROLLED:
            return f"{name} c={self.lines[0]} t={','.join(map(str, self.lines[1:]))}"
        return f"{name} {','.join(map(str, self.lines))}"


def hadamard(line: int) -> Gate:
    return Gate(GateKind.HADAMARD, (line,), _H.copy())


def s_gate(line: int) -> Gate:
    return Gate(GateKind.S, (line,), _S.copy())


def s_dagger(line: int) -> Gate:
    return Gate(GateKind.SDG, (line,), _SDG.copy())


def phase(line: int, angle: float) -> Gate:
    return Gate(GateKind.PHASE, (line,), np.diag([1, np.exp(1j * angle)]).astype(complex), angle=angle)


def unitary_1q(line: int, u: np.ndarray, label: str = "") -> Gate:
    u = np.array(u, dtype=complex)
    _check_unitary(u)
    return Gate(GateKind.UNITARY_1Q, (line,), u, label=label)


def unitary_2q(a: int, b: int, u: np.ndarray, label: str = "") -> Gate:
    u = np.array(u, dtype=complex)
    _check_unitary(u)
    return Gate(GateKind.UNITARY_2Q, (a, b), u, label=label)


def swap(a: int, b: int) -> Gate:
    return Gate(GateKind.UNITARY_2Q, (a, b), SWAP_MATRIX.copy(), label="SWAP")


def controlled(control: int, targets, u: np.ndarray, label: str = "") -> Gate:
    """Controlled-``u`` with ``u`` acting on ``targets`` when ``control`` is 1."""
    targets = (targets,) if isinstance(targets, (int, np.integer)) else tuple(targets)
    u = np.array(u, dtype=complex)
    if u.shape != (2 ** len(targets),) * 2:
        raise ConfigError(f"controlled unitary shape {u.shape} does not fit targets {targets}")
    _check_unitary(u)
    dim = u.shape[0]
    full = np.eye(2 * dim, dtype=complex)
    full[dim:, dim:] = u
    u.setflags(write=False)
    return Gate(GateKind.CONTROLLED, (control, *targets), full, base=u, label=label)


def controlled_phase(control: int, target: int, angle: float) -> Gate:
    return controlled(control, target, np.diag([1, np.exp(1j * angle)]), label=f"CP({angle:.12g})")


@dataclass(frozen=True)
class Circuit:
    width: int
    gates: tuple[Gate, ...] = ()
    measured: tuple[int, ...] = ()

    def __post_init__(self):
        if self.width < 1:
            raise ConfigError("circuit width must be >= 1")
        if len(set(self.measured)) != len(self.measured):
            raise ConfigError(f"measured lines must be distinct, got {self.measured}")
        for q in self.measured:
            self._check_line(q)

    def _check_line(self, q: int) -> None:
        if not 0 <= q < self.width:
            raise ConfigError(f"line {q} out of range for width {self.width}")

    def _check_gate(self, g: Gate) -> None:
        for q in g.lines:
            self._check_line(q)

    def append(self, g: Gate) -> "Circuit":
        self._check_gate(g)
        return Circuit(self.width, self.gates + (g,), self.measured)

    def extend(self, gates) -> "Circuit":
        gates = tuple(gates)
        for g in gates:
            self._check_gate(g)
        return Circuit(self.width, self.gates + gates, self.measured)

    def then(self, other: "Circuit") -> "Circuit":
        """Concatenation: ``self`` followed by ``other``."""
        if other.width != self.width:
            raise ConfigError("cannot concatenate circuits of different width")
        measured = self.measured + tuple(q for q in other.measured if q not in self.measured)
        return Circuit(self.width, self.gates + other.gates, measured)

    def measure(self, lines) -> "Circuit":
        return Circuit(self.width, self.gates, tuple(lines))

    def __len__(self) -> int:
        return len(self.gates)

    def dump(self) -> str:
        """One gate per line, then a ``measure`` line. For debugging only."""
        out = [f"width {self.width}"]
        out.extend(g.describe() for g in self.gates)
        if self.measured:
            out.append("measure " + ",".join(map(str, self.measured)))
        return "\n".join(out)


def embed(g: Gate, width: int) -> np.ndarray:
    """Full ``2^width`` matrix of a gate (identity on the other lines)."""
    eye = np.eye(2**width, dtype=complex)
    return apply_local(eye, g.matrix, g.lines, width)


def composed_unitary(c: Circuit) -> np.ndarray:
    if c.width > MAX_COMPOSE_WIDTH:
        raise ConfigError(f"composed_unitary limited to width <= {MAX_COMPOSE_WIDTH}")
    u = np.eye(2**c.width, dtype=complex)
    for g in c.gates:
        u = apply_local(u, g.matrix, g.lines, c.width)
    return u


def qft_gates(lines) -> list[Gate]:
    """Forward QFT on ``lines`` (first line = most significant bit), including the final reversal swaps."""
    lines = list(lines)
    m = len(lines)
    gates: list[Gate] = []
    for i in range(m):
        gates.append(hadamard(lines[i]))
        for j in range(i + 1, m):
            gates.append(controlled_phase(lines[j], lines[i], np.pi / 2 ** (j - i)))
    for i in range(m // 2):
        gates.append(swap(lines[i], lines[m - 1 - i]))
    return gates


def inverse_qft_gates(lines) -> list[Gate]:
    lines = list(lines)
    m = len(lines)
    gates: list[Gate] = []
    for i in range(m // 2):
        gates.append(swap(lines[i], lines[m - 1 - i]))
    for i in reversed(range(m)):
        for j in reversed(range(i + 1, m)):
            gates.append(controlled_phase(lines[j], lines[i], -np.pi / 2 ** (j - i)))
        gates.append(hadamard(lines[i]))
    return gates


def qft(m: int) -> Circuit:
    if m < 1:
        raise ConfigError("register size must be >= 1")
    return Circuit(m, tuple(qft_gates(range(m))))


def inverse_qft(m: int) -> Circuit:
    """Inverse QFT fragment whose unitary is ``F^dagger[y, x] = exp(-2 pi i x y / 2^m) / sqrt(2^m)``."""
    if m < 1:
        raise ConfigError("register size must be >= 1")
    return Circuit(m, tuple(inverse_qft_gates(range(m))))
