"""Pipelines behind the command-line interface.

Each ``cmd_*`` function takes a :class:`RunConfig` and returns plain result
records that serialise to JSON. Parallel maps use per-task seeds derived from
the master seed and the task index, and results are reduced in task order,
so the output does not depend on the worker count.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .adiabatic import (
    DEFAULT_PLAQUETTE_T,
    DEFAULT_STEPS_PER_LINK,
    double_loop_plan,
    line_path,
    mirror_symmetric_plan,
    plaquette_path,
)
from .errors import ChernSimError, ConfigError, GapClosureError, UndersamplingError
from .models import (
    SQRT3,
    BlochModel,
    ground_prep_unitary,
    haldane_expected_chern,
    heisenberg_chain,
    make_model,
)
from .oracle import (
    FluxGrid,
    WannierTrace,
    flux_grid,
    heisenberg_twist_berry_phase,
    hybrid_wannier_trace,
    quantization_residual,
)
from .readout import hadamard_estimate, qpe_run, wannier_density, winding_number, wrap_phase
from .seeds import derive_seed
from .statevector import NoiseSpec

BACKENDS = ("oracle", "statevector", "statevector+shots", "mps", "noisy")
THREADS_ENV = "CHERNSIM_THREADS"


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run. Defaults follow the paper's settings."""

    model: str = "qwz"
    params: dict = field(default_factory=dict)
    n: int = 15
    steps_per_link: int = DEFAULT_STEPS_PER_LINK
    T: float = DEFAULT_PLAQUETTE_T
    backend: str = "oracle"
    shots: int = 8192
    chi_max: int = 60
    seed: int = 0
    zone: str = "first"
    tiling: int = 2
    trajectories: int = 32
    # phase estimation / Wannier centres
    n_k: int = 100
    n_ky: int = 24
    qpe_m: int = 11
    qpe_meas: int = 9
    qpe_shots: int = 1000
    epsilon: float = 0.1
    periodic_density: bool = True
    double_loop: bool = False
    # twisted chain
    n_sites: int = 4
    twisted_link: int = 0
    twisted_j: float | None = None
    boundary: str = "open"
    n_theta: int = 100

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.backend in ("statevector+shots", "noisy") and self.shots < 1:
            raise ConfigError("shots must be >= 1 for sampling backends")
        if self.backend == "mps" and self.chi_max < 1:
            raise ConfigError("chi_max must be >= 1 for the mps backend")
        if self.n < 1 or self.steps_per_link < 1 or self.T <= 0:
            raise ConfigError("need n >= 1, steps_per_link >= 1 and T > 0")
        if self.zone not in ("first", "extended"):
            raise ConfigError(f"zone must be 'first' or 'extended', got {self.zone!r}")
        make_model(self.model, **self.params)  # validates the model name

    def build_model(self) -> BlochModel:
        return make_model(self.model, **self.params)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass
class ResultRecord:
    config: dict
    chern_real: float | None = None
    chern_int: int | None = None
    grid: list | None = None
    payload: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"config": self.config, "chern_real": self.chern_real, "chern_int": self.chern_int,
             "grid": self.grid, "meta": self.meta}
        d.update(self.payload)
        return d

    def to_json(self) -> str:
        return dumps(self.to_dict())


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n"


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return threads


def parallel_map(fn, items, threads: int = 1) -> list:
    """Order-preserving map; a process pool is used only for ``threads > 1``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _meta(cfg: RunConfig, started: float, timing: bool, **extra) -> dict:
    meta = {"version": __version__, "seed": cfg.seed, **extra}
    if timing:
        meta["wall_time_s"] = round(time.perf_counter() - started, 3)
    return meta


# --- flux ------------------------------------------------------------------------


def _plaquette_row(task) -> list[float]:
    """Fluxes of plaquette row ``i`` read through the Hadamard test."""
    cfg, i = task
    model = cfg.build_model()
    dk = 2 * np.pi / cfg.n
    row = []
    for j in range(cfg.n):
        k = (-np.pi + i * dk, -np.pi + j * dk)
        try:
            u_init = ground_prep_unitary(model, k)
        except GapClosureError as exc:
            raise GapClosureError(k, exc.gap, f"plaquette ({i}, {j})") from exc
        plan = double_loop_plan(model, plaquette_path(k, dk, cfg.steps_per_link), cfg.T)
        seed = derive_seed(cfg.seed, i, j)
        shots = 0 if cfg.backend in ("statevector", "mps") else cfg.shots
        noise = NoiseSpec.paper_like(seed=seed) if cfg.backend == "noisy" else None
        est = hadamard_estimate(plan, u_init, shots=shots, seed=seed, noise=noise,
                                trajectories=cfg.trajectories,
                                backend="mps" if cfg.backend == "mps" else "statevector")
        # the loop imprints 2 gamma; the plaquette flux is -gamma
        row.append(-est.theta / 2)
    return row


def compute_flux_grid(cfg: RunConfig, threads: int = 1) -> FluxGrid:
    model = cfg.build_model()
    if cfg.backend == "oracle":
        return flux_grid(model, cfg.n)
    rows = parallel_map(_plaquette_row, [(cfg, i) for i in range(cfg.n)], threads)
    return FluxGrid(cfg.n, np.array(rows), params=model.describe())


def cmd_flux(cfg: RunConfig, threads: int = 1, timing: bool = True) -> ResultRecord:
    started = time.perf_counter()
    grid = compute_flux_grid(cfg, threads)
    c = grid.chern
    shown = grid.tiled(cfg.tiling) if cfg.zone == "extended" else grid
    return ResultRecord(
        config=cfg.to_dict(),
        chern_real=c,
        chern_int=round_half_away(c),
        grid=shown.to_dict()["flux"],
        payload={"flux_grid": shown.to_dict()},
        meta=_meta(cfg, started, timing),
    )


# --- sweeps ----------------------------------------------------------------------


def _sweep_point(task) -> dict:
    cfg, timing = task
    try:
        return cmd_flux(cfg, 1, timing).to_dict()
    except ChernSimError as exc:
        return {"config": cfg.to_dict(), "error": str(exc), "exit_code": exc.exit_code}


def sweep_values(start: float, stop: float, points: int) -> np.ndarray:
    if points < 2:
        raise ConfigError("a sweep needs at least 2 points")
    return np.linspace(start, stop, points)


def cmd_sweep(cfg: RunConfig, parameter: str, start: float, stop: float, points: int,
              threads: int = 1, timing: bool = True) -> list[dict]:
    """One flux run per parameter value; failing points are recorded, not raised.

    Point ``p`` runs with seed ``derive_seed(cfg.seed, p)``.
    """
    tasks = []
    for p, value in enumerate(sweep_values(start, stop, points)):
        params = dict(cfg.params, **{parameter: float(value)})
        tasks.append((replace(cfg, params=params, seed=derive_seed(cfg.seed, p)), timing))
    return parallel_map(_sweep_point, tasks, threads)


def haldane_boundary(phi) -> np.ndarray:
    return 3 * SQRT3 * np.abs(np.sin(phi))


def cmd_phase_diagram(cfg: RunConfig, m_range: tuple[float, float], phi_range: tuple[float, float],
                      resolution: tuple[int, int], threads: int = 1, timing: bool = True) -> ResultRecord:
    """Chern estimates on an ``(m, phi)`` grid of the Haldane model.

    Rows follow ``m``, columns follow ``phi``. A degenerate range gives a
    single row or column. Cells whose run fails hold ``null``.
    """
    started = time.perf_counter()
    rm, rp = resolution
    if rm < 1 or rp < 1 or (rm < 2 and rp < 2):
        raise ConfigError("resolution must be >= 2 along at least one axis")
    ms = np.linspace(*m_range, rm) if m_range[0] != m_range[1] else np.array([m_range[0]])
    phis = np.linspace(*phi_range, rp) if phi_range[0] != phi_range[1] else np.array([phi_range[0]])
    tasks = []
    for a, m in enumerate(ms):
        for b, phi in enumerate(phis):
            params = dict(cfg.params, m=float(m), phi=float(phi))
            sub = replace(cfg, model="haldane", params=params, seed=derive_seed(cfg.seed, a, b))
            tasks.append((sub, False))
    out = parallel_map(_sweep_point, tasks, threads)
    real = [[None] * len(phis) for _ in ms]
    ints = [[None] * len(phis) for _ in ms]
    errors = []
    for t, rec in enumerate(out):
        a, b = divmod(t, len(phis))
        if "error" in rec:
            errors.append({"m": float(ms[a]), "phi": float(phis[b]), "error": rec["error"]})
        else:
            real[a][b], ints[a][b] = rec["chern_real"], rec["chern_int"]
    expected = [[haldane_expected_chern(m, p) for p in phis] for m in ms]
    return ResultRecord(
        config=cfg.to_dict(),
        grid=real,
        payload={
            "chern_int_grid": ints,
            "expected": expected,
            "m": [float(x) for x in ms],
            "phi": [float(x) for x in phis],
            "boundary_m": [float(x) for x in haldane_boundary(phis)],
            "errors": errors,
        },
        meta=_meta(cfg, started, timing, m_range=list(m_range), phi_range=list(phi_range)),
    )


# --- Wannier centres -------------------------------------------------------------


def _wannier_point(task) -> tuple[list[float], float, float, int]:
    """Decoded phases, QPE grid step, discarded MPS weight and loop count for one ky line."""
    cfg, index, ky = task
    model = cfg.build_model()
    u_init = ground_prep_unitary(model, (-np.pi, ky))
    if cfg.double_loop:
        plan, loops = double_loop_plan(model, line_path(ky, cfg.n_k), 2 * cfg.T, midpoint=True), 2
    else:
        plan, loops = mirror_symmetric_plan(model, ky, cfg.n_k, cfg.T), 1
    backend = "mps" if cfg.backend == "mps" else "statevector"
    res = qpe_run(plan, u_init, cfg.qpe_m, cfg.qpe_meas, backend=backend, shots=cfg.qpe_shots,
                  seed=derive_seed(cfg.seed, index), loops=loops, chi_max=cfg.chi_max)
    return [float(x) for x in res.phases], res.grid_step, float(res.meta.get("discarded", 0.0)), loops


def wannier_trace_qpe(cfg: RunConfig, threads: int = 1) -> tuple[WannierTrace, np.ndarray, np.ndarray, dict]:
    """Centres from QPE samples on each ky line.

    The double loop measures ``2 X_W``, which fixes ``X_W`` only modulo pi.
    Densities, centres and the winding are therefore built on the measured
    circle and divided by the loop count afterwards.
    """
    kys = -np.pi + 2 * np.pi * np.arange(cfg.n_ky) / cfg.n_ky
    out = parallel_map(_wannier_point, [(cfg, i, float(ky)) for i, ky in enumerate(kys)], threads)
    loops = out[0][3]
    centers, dens = [], []
    grid = None
    for phases, _, _, _ in out:
        grid, d = wannier_density(wrap_phase(loops * np.asarray(phases)), cfg.epsilon,
                                  periodic=cfg.periodic_density)
        dens.append(d)
        centers.append(float(grid[int(np.argmax(d))]))
    step = out[0][1]
    # the density grid is finer than the QPE grid, so allow one QPE step of slack
    w = winding_number(centers, grid_step=loops * step)
    if w % loops:
        raise UndersamplingError(f"measured phase winds {w} times, not a multiple of {loops}")
    trace = WannierTrace(kys, np.array(centers) / loops, w // loops)
    info = {"qpe_grid_step": step, "loops": loops, "discarded_weight": [o[2] for o in out]}
    return trace, grid / loops, np.array(dens), info


def cmd_wannier(cfg: RunConfig, threads: int = 1, timing: bool = True) -> ResultRecord:
    started = time.perf_counter()
    if cfg.backend == "noisy":
        raise ConfigError("phase estimation has no noise model; use statevector or mps")
    model = cfg.build_model()
    if cfg.backend == "oracle":
        trace = hybrid_wannier_trace(model, 2 * cfg.n_k, cfg.n_ky)
        density = []
        for x in trace.centers:
            grid, d = wannier_density([x], cfg.epsilon, periodic=cfg.periodic_density)
            density.append([float(v) for v in d])
        info = {}
    else:
        trace, grid, dens, info = wannier_trace_qpe(cfg, threads)
        density = [[float(v) for v in row] for row in dens]
    return ResultRecord(
        config=cfg.to_dict(),
        chern_real=float(trace.winding),
        chern_int=int(trace.winding),
        grid=density,
        payload={"trace": trace.to_dict(), "x_grid": [float(x) for x in grid]},
        meta=_meta(cfg, started, timing, **info),
    )


# --- twisted chain -----------------------------------------------------------------


def cmd_heisenberg(cfg: RunConfig, timing: bool = True) -> ResultRecord:
    started = time.perf_counter()
    chain = heisenberg_chain(cfg.n_sites, boundary=cfg.boundary, twisted_link=cfg.twisted_link,
                             twisted_j=cfg.twisted_j)
    gamma = heisenberg_twist_berry_phase(chain, cfg.n_theta)
    return ResultRecord(
        config=cfg.to_dict(),
        payload={"gamma": gamma, "residual": quantization_residual(gamma),
                 "quantized": 0 if abs(gamma) < np.pi / 2 else 1},
        meta=_meta(cfg, started, timing),
    )


# --- CSV ---------------------------------------------------------------------------


def grid_csv(record: dict) -> str:
    """Gnuplot-style columns for a flux grid, phase diagram or Wannier density."""
    lines = []
    if "flux_grid" in record:
        g = FluxGrid.from_dict(record["flux_grid"])
        ks = g.corners()
        lines.append("# k1 k2 flux")
        for i, k1 in enumerate(ks):
            for j, k2 in enumerate(ks):
                lines.append(f"{k1:.12g} {k2:.12g} {g.flux[i, j]:.12g}")
            lines.append("")
    elif "chern_int_grid" in record:
        lines.append("# m phi chern_real chern_int expected boundary_m")
        for a, m in enumerate(record["m"]):
            for b, phi in enumerate(record["phi"]):
                cr, ci, ex = record["grid"][a][b], record["chern_int_grid"][a][b], record["expected"][a][b]
                lines.append(f"{m:.12g} {phi:.12g} {_fmt(cr)} {_fmt(ci)} {_fmt(ex)} {record['boundary_m'][b]:.12g}")
            lines.append("")
    elif "trace" in record:
        lines.append("# ky x_w density")
        for ky, row in zip(record["trace"]["ky"], record["grid"]):
            for x, p in zip(record["x_grid"], row):
                lines.append(f"{ky:.12g} {x:.12g} {p:.12g}")
            lines.append("")
    else:
        raise ConfigError("record has no grid to export")
    return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    return "nan" if x is None else f"{x:.12g}"
