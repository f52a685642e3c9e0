"""Classical ground truth: Wilson loops, plaquette fluxes, lattice Chern numbers,
hybrid Wannier centres and the twist Berry phase of a spin chain."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GapClosureError, QuantizationError, RefinementNeededError
from .models import BlochModel, TwistedHeisenbergChain, heisenberg_twisted_h
from .numerics import DEGENERACY_TOL, eig_hermitian_dense

OVERLAP_FLOOR = 1e-6
QUANTIZATION_TOL = 1e-9


def wilson_loop(states) -> float:
    """``arg prod_j <n_j|n_{j+1}>`` over a closed list of unit vectors.

    The loop closes automatically (the last state pairs with the first);
    pass each state once.
    """
    v = np.asarray(states, dtype=complex)
    if v.ndim != 2 or len(v) < 2:
        raise ValueError("wilson_loop needs at least two state vectors")
    ov = np.einsum("ji,ji->j", v.conj(), np.roll(v, -1, axis=0))
    worst = float(np.min(np.abs(ov)))
    if worst < OVERLAP_FLOOR:
        raise RefinementNeededError(
            f"consecutive overlap {worst:.2e} below {OVERLAP_FLOOR:g}; refine the discretisation"
        )
    # phases summed instead of multiplying moduli down to underflow
    return float(np.angle(np.exp(1j * np.sum(np.angle(ov)))))


def _ground_states(model: BlochModel, q1, q2, band: int = 0, where: str = "") -> np.ndarray:
    """Gauge-fixed band eigenvectors on a batch of momenta, shape ``(..., 2)``."""
    h = model.h_batch(q1, q2)
    w, v = np.linalg.eigh(h)
    gap = w[..., 1] - w[..., 0]
    bad = gap <= DEGENERACY_TOL
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(bad)), bad.shape) if bad.ndim else ()
        pt = (float(np.asarray(q1)[idx]) if np.ndim(q1) else float(q1),
              float(np.asarray(q2)[idx]) if np.ndim(q2) else float(q2))
        raise GapClosureError(pt, float(gap[idx] if gap.ndim else gap), where or model.name)
    return v[..., :, band]


def plaquette_flux(model: BlochModel, k_corner, dk: float, band: int = 0) -> float:
    """Wilson loop over the four corners in counter-clockwise order."""
    k = np.asarray(k_corner, dtype=float)
    corners = np.array([k, k + (dk, 0), k + (dk, dk), k + (0, dk)])
    v = _ground_states(model, corners[:, 0], corners[:, 1], band, "plaquette corner")
    return wilson_loop(v)


@dataclass
class FluxGrid:
    """``flux[i, j]`` is the plaquette with lower-left corner ``(k1_i, k2_j)``.

    Axis 0 runs along the first momentum, axis 1 along the second.
    """

    n: int
    flux: np.ndarray
    origin: tuple[float, float] = (-np.pi, -np.pi)
    extent: float = 2 * np.pi
    params: dict = field(default_factory=dict)
    zone: str = "first"

    @property
    def chern(self) -> float:
        # fixed-order summation keeps results bit-reproducible
        return float(np.sum(self.flux.ravel()) / (2 * np.pi))

    @property
    def dk(self) -> float:
        return self.extent / self.n

    def corners(self) -> np.ndarray:
        return self.origin[0] + self.dk * np.arange(self.n)

    def tiled(self, reps: int = 2) -> "FluxGrid":
        """Periodic tiling ``reps x reps`` centred on the origin of momentum space."""
        big = np.tile(self.flux, (reps, reps))
        half = reps * self.extent / 2
        return FluxGrid(self.n * reps, big, (-half, -half), reps * self.extent, dict(self.params), "extended")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "origin": [float(self.origin[0]), float(self.origin[1])],
            "extent": float(self.extent),
            "zone": self.zone,
            "params": self.params,
            "flux": [[float(x) for x in row] for row in self.flux],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FluxGrid":
        return cls(int(d["n"]), np.array(d["flux"], dtype=float), tuple(d["origin"]),
                   float(d["extent"]), dict(d.get("params", {})), d.get("zone", "first"))


def flux_grid(model: BlochModel, n: int, band: int = 0) -> FluxGrid:
    """All ``n x n`` plaquette fluxes of the first zone, vectorised."""
    if n < 1:
        raise ValueError("grid size must be >= 1")
    dk = 2 * np.pi / n
    ks = -np.pi + dk * np.arange(n + 1)
    q1, q2 = np.meshgrid(ks, ks, indexing="ij")
    v = _ground_states(model, q1, q2, band, "flux grid")
    # identify the k = pi edge with k = -pi so the lattice is exactly periodic
    v[-1, :] = v[0, :]
    v[:, -1] = v[:, 0]

    def link(a, b):
        return np.einsum("...i,...i->...", a.conj(), b)

    u1 = link(v[:-1, :-1], v[1:, :-1])
    u2 = link(v[1:, :-1], v[1:, 1:])
    u3 = link(v[1:, 1:], v[:-1, 1:])
    u4 = link(v[:-1, 1:], v[:-1, :-1])
    loops = [u1, u2, u3, u4]
    worst = min(float(np.min(np.abs(u))) for u in loops)
    if worst < OVERLAP_FLOOR:
        raise RefinementNeededError(f"plaquette overlap {worst:.2e}; increase the grid size")
    flux = np.angle(u1 * u2 * u3 * u4)
    return FluxGrid(n, flux, params=model.describe())


def chern_fukui(model: BlochModel, n: int, band: int = 0) -> tuple[FluxGrid, int]:
    """Lattice Chern number; raises if the flux sum is not a multiple of 2 pi."""
    grid = flux_grid(model, n, band)
    c = grid.chern
    k = int(np.round(c))
    if abs(c - k) * 2 * np.pi > QUANTIZATION_TOL:
        raise QuantizationError(f"flux sum {c * 2 * np.pi:.12g} is not a multiple of 2 pi")
    return grid, k


@dataclass
class WannierTrace:
    ky: np.ndarray
    centers: np.ndarray
    winding: int

    def to_dict(self) -> dict:
        return {"ky": [float(x) for x in self.ky], "centers": [float(x) for x in self.centers],
                "winding": int(self.winding)}


def wrap_phase(x):
    """Map angles to ``[-pi, pi)``."""
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def line_wilson(model: BlochModel, ky: float, n_kx: int, band: int = 0) -> float:
    kx = -np.pi + 2 * np.pi * np.arange(n_kx) / n_kx
    v = _ground_states(model, kx, np.full_like(kx, ky), band, "kx line")
    return wilson_loop(v)


def hybrid_wannier_trace(model: BlochModel, n_kx: int, n_ky: int, band: int = 0) -> WannierTrace:
    """``X_W(ky)`` as the Berry phase along each kx line (``-`` the overlap-product phase)."""
    from .readout import winding_number

    kys = -np.pi + 2 * np.pi * np.arange(n_ky) / n_ky
    centers = np.array([float(wrap_phase(-line_wilson(model, ky, n_kx, band))) for ky in kys])
    return WannierTrace(kys, centers, winding_number(centers))


def heisenberg_twist_berry_phase(chain: TwistedHeisenbergChain, n_theta: int,
                                 tol: float = 1e-6) -> float:
    """Wilson loop over ground states at ``theta_j = 2 pi j / n_theta``.

    Returns the phase mapped to ``[-pi/2, 3 pi/2)`` (so it sits next to 0 or
    pi) and checks the quantisation.
    """
    states = []
    for j in range(n_theta):
        th = 2 * np.pi * j / n_theta
        w, v = eig_hermitian_dense(heisenberg_twisted_h(chain.with_theta(th)))
        if w[1] - w[0] <= DEGENERACY_TOL:
            raise GapClosureError((th,), float(w[1] - w[0]), "twisted chain ground state")
        states.append(v[:, 0])
    gamma = (wilson_loop(states) + np.pi / 2) % (2 * np.pi) - np.pi / 2
    if quantization_residual(gamma) > tol:
        raise QuantizationError(f"twist Berry phase {gamma:.12g} is not 0 or pi")
    return float(gamma)


def quantization_residual(gamma: float) -> float:
    g = gamma % (2 * np.pi)
    return float(min(g, abs(g - np.pi), 2 * np.pi - g))
