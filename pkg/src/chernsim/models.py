"""Two-band Bloch models and the twisted Heisenberg chain.

Model-level methods take *grid momenta* ``q = (q1, q2)`` in ``[-pi, pi)^2``.
For QWZ these are the Cartesian momenta. For Haldane they are reduced
coordinates along a reciprocal basis ``(g1, g2)`` ordered so that the map
``q -> k = (q1 g1 + q2 g2) / 2 pi`` preserves orientation, which keeps the sign
of plaquette fluxes (and hence of Chern numbers) that of the Cartesian zone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GapClosureError
from .numerics import check_hermitian, eig_hermitian_2x2

SQRT3 = np.sqrt(3.0)
HALDANE_A1 = np.array([SQRT3 / 2, 0.5])
HALDANE_A2 = np.array([SQRT3 / 2, -0.5])


def _pauli_sum(dx, dy, dz, d0=0.0) -> np.ndarray:
    """``d0 I + d.sigma`` for scalars or broadcastable arrays (trailing 2x2)."""
    dx, dy, dz, d0 = (np.asarray(v, dtype=float) for v in (dx, dy, dz, d0))
    shape = np.broadcast(dx, dy, dz, d0).shape
    h = np.empty(shape + (2, 2), dtype=complex)
    h[..., 0, 0] = d0 + dz
    h[..., 1, 1] = d0 - dz
    h[..., 0, 1] = dx - 1j * dy
    h[..., 1, 0] = dx + 1j * dy
    return h


def qwz_d(kx, ky, u):
    return np.sin(kx), np.sin(ky), u + np.cos(kx) + np.cos(ky)


def qwz_h(k, u: float) -> np.ndarray:
    """``sin kx sx + sin ky sy + (u + cos kx + cos ky) sz``."""
    return _pauli_sum(*qwz_d(k[0], k[1], u))


def haldane_d(kx, ky, m, phi, t1=1.0, t2=1.0):
    p1 = kx * HALDANE_A1[0] + ky * HALDANE_A1[1]
    p2 = kx * HALDANE_A2[0] + ky * HALDANE_A2[1]
    dx = t1 * (np.cos(p1) + np.cos(p2) + 1.0)
    dy = t1 * (np.sin(p1) + np.sin(p2))
    dz = m + 2.0 * t2 * np.sin(phi) * (np.sin(p1) - np.sin(p2) - np.sin(p1 - p2))
    return dx, dy, dz


def haldane_h(k, m: float, phi: float, t1: float = 1.0, t2: float = 1.0) -> np.ndarray:
    """Haldane Bloch Hamiltonian ``d(k).sigma`` at Cartesian momentum ``k``."""
    return _pauli_sum(*haldane_d(k[0], k[1], m, phi, t1, t2))


class BlochModel:
    """Momentum-parameterised two-band Hamiltonian on grid momenta ``q``."""

    name = "model"
    bands = 2

    @property
    def params(self) -> dict:
        return {}

    def h(self, q) -> np.ndarray:
        return self.h_batch(np.asarray(q[0], dtype=float), np.asarray(q[1], dtype=float))

    def h_batch(self, q1, q2) -> np.ndarray:
        raise NotImplementedError

    def to_cartesian(self, q) -> np.ndarray:
        return np.asarray(q, dtype=float)

    def reciprocal_basis(self) -> np.ndarray:
        """Columns are Cartesian reciprocal lattice vectors."""
        return 2 * np.pi * np.eye(2)

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


@dataclass(frozen=True)
class QWZModel(BlochModel):
    u: float = 1.0
    name = "qwz"

    @property
    def params(self) -> dict:
        return {"u": self.u}

    def h_batch(self, q1, q2):
        return _pauli_sum(*qwz_d(q1, q2, self.u))


@dataclass(frozen=True)
class HaldaneModel(BlochModel):
    m: float = 0.0
    phi: float = np.pi / 2
    t1: float = 1.0
    t2: float = 1.0
    name = "haldane"

    @property
    def params(self) -> dict:
        return {"m": self.m, "phi": self.phi, "t1": self.t1, "t2": self.t2}

    def reciprocal_basis(self) -> np.ndarray:
        a = np.array([HALDANE_A1, HALDANE_A2])
        b = 2 * np.pi * np.linalg.inv(a).T  # rows b1, b2 with a_i . b_j = 2 pi delta_ij
        g = np.array([b[0], b[1]]).T
        if np.linalg.det(g) < 0:
            g = g[:, ::-1]
        return g

    def to_cartesian(self, q) -> np.ndarray:
        g = self.reciprocal_basis()
        q = np.asarray(q, dtype=float)
        return (g @ q.reshape(2, -1)).reshape(q.shape) / (2 * np.pi)

    def h_batch(self, q1, q2):
        g = self.reciprocal_basis() / (2 * np.pi)
        kx = g[0, 0] * q1 + g[0, 1] * q2
        ky = g[1, 0] * q1 + g[1, 1] * q2
        return _pauli_sum(*haldane_d(kx, ky, self.m, self.phi, self.t1, self.t2))

    def h_cartesian(self, k) -> np.ndarray:
        return haldane_h(k, self.m, self.phi, self.t1, self.t2)


def haldane_expected_chern(m: float, phi: float) -> int | None:
    """Closed-form phase assignment for ``t1 = t2 = 1``; ``None`` on a boundary."""
    bound = 3 * SQRT3 * abs(np.sin(phi))
    if np.isclose(abs(m), bound) or (m == 0 and np.isclose(np.sin(phi), 0)):
        return None
    if abs(m) < bound:
        return 1 if np.sin(phi) > 0 else -1
    return 0


def qwz_expected_chern(u: float) -> int | None:
    if any(np.isclose(u, b) for b in (-2.0, 0.0, 2.0)):
        return None
    if -2 < u < 0:
        return -1
    if 0 < u < 2:
        return 1
    return 0


def make_model(name: str, **params) -> BlochModel:
    name = name.lower()
    if name == "qwz":
        return QWZModel(u=float(params.get("u", 1.0)))
    if name == "haldane":
        return HaldaneModel(
            m=float(params.get("m", 0.0)),
            phi=float(params.get("phi", np.pi / 2)),
            t1=float(params.get("t1", 1.0)),
            t2=float(params.get("t2", 1.0)),
        )
    raise ConfigError(f"unknown model {name!r}; expected 'qwz' or 'haldane'")


def ground_prep_unitary(model: BlochModel, q) -> np.ndarray:
    """Unitary whose columns are the ground and excited eigenvectors at ``q``.

    Maps ``|0>`` to the (gauge-fixed) ground state; raises ``GapClosureError``
    at degenerate points.
    """
    pair = eig_hermitian_2x2(model.h(q))
    if pair.degenerate:
        raise GapClosureError(q, pair.gap, model.name)
    return np.column_stack([pair.lower.vector, pair.upper.vector])


def min_gap(model: BlochModel, q1, q2) -> float:
    h = model.h_batch(q1, q2)
    d = np.sqrt(np.abs(h[..., 0, 1]) ** 2 + (0.5 * (h[..., 0, 0] - h[..., 1, 1]).real) ** 2)
    return float(2 * d.min())


# --- twisted Heisenberg chain -------------------------------------------------


@dataclass(frozen=True)
class TwistedHeisenbergChain:
    """Spin-1/2 chain ``sum J_ij S_i.S_j`` with one link carrying the phase ``x = e^{i theta}``.

    ``bonds`` lists ``(i, j, J)``; ``twisted_link`` indexes into it. Spins are
    ``S = sigma / 2`` and site 0 is the most significant bit.
    """

    n_sites: int
    bonds: tuple[tuple[int, int, float], ...]
    twisted_link: int = 0
    theta: float = 0.0

    def __post_init__(self):
        if not 1 <= self.n_sites <= 12:
            raise ConfigError("n_sites must lie in [1, 12]")
        if not 0 <= self.twisted_link < len(self.bonds):
            raise ConfigError(f"twisted link {self.twisted_link} out of range for {len(self.bonds)} bonds")
        for i, j, _ in self.bonds:
            if i == j or not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise ConfigError(f"invalid bond ({i}, {j})")

    def with_theta(self, theta: float) -> "TwistedHeisenbergChain":
        return TwistedHeisenbergChain(self.n_sites, self.bonds, self.twisted_link, theta)


def heisenberg_chain(n: int, j: float = 1.0, boundary: str = "open", twisted_link: int = 0,
                     twisted_j: float | None = None, theta: float = 0.0) -> TwistedHeisenbergChain:
    if boundary not in ("open", "periodic"):
        raise ConfigError(f"boundary must be 'open' or 'periodic', got {boundary!r}")
    bonds = [(i, i + 1, j) for i in range(n - 1)]
    if boundary == "periodic" and n > 2:
        bonds.append((n - 1, 0, j))
    if not 0 <= twisted_link < len(bonds):
        raise ConfigError(f"twisted link {twisted_link} out of range for {len(bonds)} bonds")
    if twisted_j is not None:
        a, b, _ = bonds[twisted_link]
        bonds[twisted_link] = (a, b, twisted_j)
    return TwistedHeisenbergChain(n, tuple(bonds), twisted_link, theta)


def heisenberg_twisted_h(chain: TwistedHeisenbergChain) -> np.ndarray:
    """Dense ``2^n x 2^n`` Hamiltonian.

    Regular links: ``J (S+_i S-_j + S-_i S+_j)/2 + J Sz_i Sz_j``. The twisted link
    uses ``x* S+_i S-_j + x S-_i S+_j`` in the flip term.
    """
    n = chain.n_sites
    dim = 2**n
    idx = np.arange(dim)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1  # bit of site s
    sz = 0.5 - bits  # |0> = up
    h = np.zeros((dim, dim), dtype=complex)
    x = np.exp(1j * chain.theta)
    for b, (i, j, coupling) in enumerate(chain.bonds):
        h[idx, idx] += coupling * sz[:, i] * sz[:, j]
        # S+_i S-_j: site i down -> up, site j up -> down
        mask = (bits[:, i] == 1) & (bits[:, j] == 0)
        src = idx[mask]
        dst = src ^ (1 << (n - 1 - i)) ^ (1 << (n - 1 - j))
        amp = 0.5 * coupling * (np.conj(x) if b == chain.twisted_link else 1.0)
        h[dst, src] += amp
        h[src, dst] += np.conj(amp)
    return check_hermitian(h, tol=1e-10)
