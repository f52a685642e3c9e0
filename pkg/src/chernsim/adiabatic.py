"""Discretised momentum paths and Trotterised adiabatic evolution plans.

A plan is a product of short fixed-Hamiltonian exponentials
``prod_j exp(-i s_j H(k_j) dt)``. Running a closed loop forward and then
backward with the opposite sign cancels the dynamical phase and leaves twice
the Berry phase on the ground state.

Phase conventions: the eigenphase a plan imprints on the ground state is the
Berry phase ``gamma = i \\oint <n|dn>``. The overlap-product oracle
``arg prod <n_j|n_{j+1}>`` equals ``-gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Gate, controlled, unitary_1q
from .errors import ConfigError, SymmetryViolationError
from .models import BlochModel
from .numerics import expm_i_hermitian

DEFAULT_PLAQUETTE_T = 10.0
DEFAULT_STEPS_PER_LINK = 2
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class MomentumPath:
    """Ordered momentum points; ``len(points) - 1`` increments.

    For closed paths the last point is bitwise equal to the first (plaquettes)
    or equal modulo a reciprocal lattice vector (BZ lines).
    """

    points: np.ndarray
    closed: bool = True
    steps_per_segment: int = 1
    label: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1:
            raise ConfigError("path points must have shape (n, 2)")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_increments(self) -> int:
        return max(len(self.points) - 1, 1)

    def sample_points(self, midpoint: bool = False) -> np.ndarray:
        """Momenta at which H is evaluated, one per increment."""
        p = self.points
        if len(p) == 1:
            return p.copy()
        return 0.5 * (p[:-1] + p[1:]) if midpoint else p[:-1].copy()


def plaquette_path(k, dk: float, steps_per_link: int = DEFAULT_STEPS_PER_LINK) -> MomentumPath:
    """Counter-clockwise square loop with lower-left corner ``k`` and side ``dk``."""
    if steps_per_link < 1:
        raise ConfigError("steps_per_link must be >= 1")
    k0 = np.asarray(k, dtype=float)
    corners = [k0, k0 + (dk, 0.0), k0 + (dk, dk), k0 + (0.0, dk)]
    pts = []
    for a in range(4):
        start, end = corners[a], corners[(a + 1) % 4]
        for s in range(steps_per_link):
            pts.append(start + (end - start) * (s / steps_per_link))
    pts.append(k0.copy())
    return MomentumPath(np.array(pts), True, steps_per_link, "plaquette")


def line_path(ky: float, n_k: int) -> MomentumPath:
    """kx from -pi to pi in ``2 n_k`` increments of ``pi / n_k`` at fixed ``ky``.

    Each half of the sweep has ``n_k`` increments, so ``n_k = 100`` gives steps
    of ``pi / 100``. The end point ``kx = pi`` equals the start modulo 2 pi.
    """
    if n_k < 2:
        raise ConfigError("n_k must be >= 2")
    kx = -np.pi + np.pi * np.arange(2 * n_k + 1) / n_k
    pts = np.column_stack([kx, np.full_like(kx, ky)])
    return MomentumPath(pts, True, n_k, "line")


@dataclass(frozen=True)
class EvolutionPlan:
    """Ordered factors ``(H, dt, sign)``; factor 0 acts first."""

    factors: tuple[tuple[np.ndarray, float, int], ...]
    path: MomentumPath | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.factors)

    @property
    def total_time(self) -> float:
        return float(sum(dt for _, dt, _ in self.factors))

    @property
    def dim(self) -> int:
        return self.factors[0][0].shape[0] if self.factors else 2

    def unitaries(self) -> list[np.ndarray]:
        if "unitaries" not in self._cache:
            self._cache["unitaries"] = [expm_i_hermitian(h, dt, s) for h, dt, s in self.factors]
        return self._cache["unitaries"]

    def product(self) -> np.ndarray:
        """Full plan unitary (later factors to the left)."""
        if "product" not in self._cache:
            u = np.eye(self.dim, dtype=complex)
            for f in self.unitaries():
                u = f @ u
            self._cache["product"] = u
        return self._cache["product"]

    def then(self, other: "EvolutionPlan") -> "EvolutionPlan":
        return EvolutionPlan(self.factors + other.factors, self.path)

    def gates(self, line: int) -> list[Gate]:
        return [unitary_1q(line, u, label="Ut") for u in self.unitaries()]

    def controlled_gates(self, control: int, target: int) -> list[Gate]:
        """One controlled gate per factor, built once and cached per line pair."""
        key = ("ctrl", control, target)
        if key not in self._cache:
            self._cache[key] = [controlled(control, target, u, label="cUt") for u in self.unitaries()]
        return self._cache[key]


def trotterize(model: BlochModel, path: MomentumPath, T: float, sign: int = 1,
               midpoint: bool = False) -> EvolutionPlan:
    """First-order product ``prod_j exp(-i sign H(k_j) dt)`` with ``dt = T / N``.

    ``k_j`` is the left end of increment ``j`` unless ``midpoint`` is set.
    """
    if T <= 0:
        raise ConfigError("T must be positive")
    if sign not in (1, -1):
        raise ConfigError("sign must be +1 or -1")
    ks = path.sample_points(midpoint)
    dt = T / len(ks)
    hs = model.h_batch(ks[:, 0], ks[:, 1])
    return EvolutionPlan(tuple((h, dt, sign) for h in hs), path)


def double_loop_plan(model: BlochModel, path: MomentumPath, T: float = DEFAULT_PLAQUETTE_T,
                     midpoint: bool = False) -> EvolutionPlan:
    """``U_bar(T,0) U(T,0)``: the loop with sign +1, then again with sign -1.

    On the ground state the accumulated eigenphase is ``2 gamma``.
    """
    if not path.closed:
        raise ConfigError("double loop needs a closed path")
    fwd = trotterize(model, path, T, +1, midpoint)
    bwd = trotterize(model, path, T, -1, midpoint)
    return fwd.then(bwd)


def _ground_energy(h: np.ndarray) -> np.ndarray:
    c = 0.5 * (h[..., 0, 0] + h[..., 1, 1]).real
    dz = 0.5 * (h[..., 0, 0] - h[..., 1, 1]).real
    return c - np.sqrt(dz**2 + np.abs(h[..., 0, 1]) ** 2)


def mirror_symmetric_plan(model: BlochModel, ky: float, n_k: int, T: float) -> EvolutionPlan:
    """Single kx sweep whose time direction flips at ``kx = 0``.

    Each half takes ``n_k`` increments of duration ``dt = T / n_k`` with H
    sampled at increment midpoints, so increment ``j`` and ``2 n_k - 1 - j``
    sit at ``kx`` and ``-kx``. With ``E0(kx) = E0(-kx)`` the dynamical phase
    cancels and the ground state picks up ``gamma`` once.
    """
    path = line_path(ky, n_k)
    ks = path.sample_points(midpoint=True)
    hs = model.h_batch(ks[:, 0], ks[:, 1])
    e0 = _ground_energy(hs)
    mismatch = float(np.max(np.abs(e0 - e0[::-1])))
    if mismatch > SYMMETRY_TOL:
        raise SymmetryViolationError(
            f"E0(kx, ky) != E0(-kx, ky) at ky={ky:.6g} (max mismatch {mismatch:.3e}); use the double loop"
        )
    dt = T / n_k
    factors = tuple((h, dt, 1 if j < n_k else -1) for j, h in enumerate(hs))
    return EvolutionPlan(factors, path)


def ground_fidelity_after(plan: EvolutionPlan, psi0: np.ndarray) -> float:
    """``|<psi0|plan|psi0>|^2``, the probability of staying in the start state."""
    return float(abs(np.vdot(psi0, plan.product() @ psi0)) ** 2)


def plan_phase(plan: EvolutionPlan, psi0: np.ndarray) -> float:
    """Phase of ``<psi0|plan|psi0>``."""
    return float(np.angle(np.vdot(psi0, plan.product() @ psi0)))
