"""Command-line entry point: ``chernsim {flux,sweep,phase-diagram,wannier,heisenberg}``.

Exit codes: 0 success, 2 configuration error, 3 gap closure or degeneracy,
4 backend failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .commands import (
    BACKENDS,
    RunConfig,
    cmd_flux,
    cmd_heisenberg,
    cmd_phase_diagram,
    cmd_sweep,
    cmd_wannier,
    dumps,
    grid_csv,
    resolve_threads,
)
from .errors import ChernSimError

MODEL_PARAMS = {"qwz": ("u",), "haldane": ("m", "phi", "t1", "t2")}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config echo from an earlier run; other flags are ignored")
    p.add_argument("--model", choices=sorted(MODEL_PARAMS), default="qwz")
    p.add_argument("--u", type=float, default=1.0, help="QWZ on-site potential")
    p.add_argument("--m", type=float, default=0.0, help="Haldane mass")
    p.add_argument("--phi", type=float, default=np.pi / 2, help="Haldane flux phase (radians)")
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--t2", type=float, default=1.0)
    p.add_argument("--n", type=int, default=15, help="plaquettes per side")
    p.add_argument("--steps-per-link", type=int, default=2)
    p.add_argument("--T", type=float, default=10.0, help="total evolution time of one loop")
    p.add_argument("--backend", choices=BACKENDS, default="oracle")
    p.add_argument("--shots", type=int, default=8192)
    p.add_argument("--chi-max", type=int, default=60)
    p.add_argument("--trajectories", type=int, default=32, help="noise trajectories per circuit")
    p.add_argument("--zone", choices=("first", "extended"), default="first")
    p.add_argument("--tiling", type=int, default=2, help="tiles per side for --zone extended")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: $CHERNSIM_THREADS, else CPU count)")
    p.add_argument("--out", help="write the JSON record here instead of stdout")
    p.add_argument("--csv", help="also write plot-ready columns to this path")
    p.add_argument("--no-timing", action="store_true", help="omit wall time so reruns are byte-identical")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chernsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    flux = sub.add_parser("flux", help="Berry-flux grid and Chern number")
    _common(flux)

    sweep = sub.add_parser("sweep", help="Chern number along one model parameter")
    _common(sweep)
    sweep.add_argument("--param", required=True)
    sweep.add_argument("--from", dest="start", type=float, required=True)
    sweep.add_argument("--to", dest="stop", type=float, required=True)
    sweep.add_argument("--points", type=int, required=True)

    pd = sub.add_parser("phase-diagram", help="Haldane Chern numbers over (m, phi)")
    _common(pd)
    pd.add_argument("--m-from", type=float, default=-6.0)
    pd.add_argument("--m-to", type=float, default=6.0)
    pd.add_argument("--phi-from", type=float, default=-np.pi)
    pd.add_argument("--phi-to", type=float, default=np.pi)
    pd.add_argument("--res-m", type=int, default=21)
    pd.add_argument("--res-phi", type=int, default=21)

    wan = sub.add_parser("wannier", help="hybrid Wannier centres and their winding")
    _common(wan)
    wan.add_argument("--n-k", type=int, default=100, help="kx increments per half sweep")
    wan.add_argument("--n-ky", type=int, default=24)
    wan.add_argument("--qpe-m", type=int, default=11, help="work qubits")
    wan.add_argument("--qpe-meas", type=int, default=9, help="measured work qubits")
    wan.add_argument("--qpe-shots", type=int, default=1000)
    wan.add_argument("--epsilon", type=float, default=0.1, help="Lorentzian broadening")
    wan.add_argument("--literal-density", dest="periodic_density", action="store_false",
                     help="use the plain (non-wrapped) distance in the Lorentzian density")
    wan.add_argument("--double-loop", action="store_true",
                     help="use the forward/backward double loop instead of the mirror shortcut")

    hb = sub.add_parser("heisenberg", help="twist Berry phase of a spin chain")
    _common(hb)
    hb.add_argument("--n-sites", type=int, default=4)
    hb.add_argument("--twisted-link", type=int, default=0)
    hb.add_argument("--twisted-j", type=float, default=None)
    hb.add_argument("--boundary", choices=("open", "periodic"), default="open")
    hb.add_argument("--n-theta", type=int, default=100)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        return RunConfig.from_dict(data.get("config", data))
    params = {k: getattr(args, k) for k in MODEL_PARAMS[args.model]}
    kw = dict(
        model=args.model, params=params, n=args.n, steps_per_link=args.steps_per_link, T=args.T,
        backend=args.backend, shots=args.shots, chi_max=args.chi_max, seed=args.seed, zone=args.zone,
        tiling=args.tiling, trajectories=args.trajectories,
    )
    for name in ("n_k", "n_ky", "qpe_m", "qpe_meas", "qpe_shots", "epsilon", "periodic_density", "double_loop",
                 "n_sites", "twisted_link", "twisted_j", "boundary", "n_theta"):
        if hasattr(args, name):
            kw[name] = getattr(args, name)
    return RunConfig(**kw)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run_command(args: argparse.Namespace) -> dict | list:
    cfg = config_from_args(args)
    threads = resolve_threads(args.threads)
    timing = not args.no_timing
    if args.command == "flux":
        return cmd_flux(cfg, threads, timing).to_dict()
    if args.command == "sweep":
        return cmd_sweep(cfg, args.param, args.start, args.stop, args.points, threads, timing)
    if args.command == "phase-diagram":
        rec = cmd_phase_diagram(cfg, (args.m_from, args.m_to), (args.phi_from, args.phi_to),
                                (args.res_m, args.res_phi), threads, timing)
        return rec.to_dict()
    if args.command == "wannier":
        return cmd_wannier(cfg, threads, timing).to_dict()
    return cmd_heisenberg(cfg, timing).to_dict()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = run_command(args)
    except ChernSimError as exc:
        print(f"chernsim: error: {exc}", file=sys.stderr)
        return exc.exit_code
    _emit(dumps(result), args.out)
    if args.csv:
        records = result if isinstance(result, list) else [result]
        text = "".join(grid_csv(r) for r in records if "error" not in r)
        _emit(text, args.csv)
    return 0


if __name__ == "__main__":
    sys.exit(main())
