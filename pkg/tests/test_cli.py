import json

import numpy as np
import pytest

from chernsim import cli, commands
from chernsim.commands import RunConfig, cmd_flux, cmd_phase_diagram, resolve_threads, round_half_away
from chernsim.errors import BackendError
from chernsim.models import haldane_expected_chern, qwz_expected_chern
from chernsim.oracle import FluxGrid


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def far_cells(expected):
    """Cells whose 3x3 neighbourhood has a single, defined expected value."""
    e = np.array([[np.nan if v is None else v for v in row] for row in expected], dtype=float)
    cells = []
    for a in range(1, e.shape[0] - 1):
        for b in range(1, e.shape[1] - 1):
            block = e[a - 1:a + 2, b - 1:b + 2]
            if not np.isnan(block).any() and np.all(block == block[0, 0]):
                cells.append((a, b))
    return cells


@pytest.mark.parametrize("x, want", [(0.5, 1), (-0.5, -1), (1.49, 1), (-2.5, -3), (0.0, 0), (0.49, 0)])
def test_round_half_away(x, want):
    assert round_half_away(x) == want


# --- flux ------------------------------------------------------------------------


@pytest.mark.parametrize("u", [-3.0, -1.0, 1.0, 3.0])
def test_flux_oracle_matches_phase(capsys, u):
    code, out, _ = run_cli(capsys, "flux", "--u", str(u), "--no-timing")
    assert code == 0
    rec = json.loads(out)
    assert rec["chern_int"] == qwz_expected_chern(u)
    assert len(rec["grid"]) == 15 and len(rec["grid"][0]) == 15


def test_flux_statevector_exact():
    rec = cmd_flux(RunConfig(model="qwz", params={"u": 1.0}, backend="statevector"), timing=False)
    assert abs(rec.chern_real - 1) < 0.1
    assert rec.chern_int == 1


@pytest.mark.parametrize("seed", [0, 1])
def test_flux_statevector_shots(seed):
    cfg = RunConfig(model="qwz", params={"u": 1.0}, backend="statevector+shots", shots=8192, seed=seed)
    rec = cmd_flux(cfg, timing=False)
    assert abs(rec.chern_real - 1) < 0.3


def test_flux_shots_depend_on_seed():
    a = cmd_flux(RunConfig(model="qwz", params={"u": 1.0}, backend="statevector+shots", seed=0), timing=False)
    b = cmd_flux(RunConfig(model="qwz", params={"u": 1.0}, backend="statevector+shots", seed=1), timing=False)
    assert a.grid != b.grid


def test_flux_extended_zone_tiles(capsys):
    code, out, _ = run_cli(capsys, "flux", "--zone", "extended", "--tiling", "2", "--n", "6", "--no-timing")
    assert code == 0
    rec = json.loads(out)
    g = np.array(rec["grid"])
    assert g.shape == (12, 12)
    np.testing.assert_array_equal(g[:6, :6], g[6:, 6:])
    assert rec["flux_grid"]["zone"] == "extended"
    assert rec["flux_grid"]["origin"] == [-2 * np.pi, -2 * np.pi]
    assert rec["chern_int"] == 1


def test_flux_json_round_trip(capsys, tmp_path):
    out_path = tmp_path / "flux.json"
    code, _, _ = run_cli(capsys, "flux", "--n", "8", "--out", str(out_path), "--no-timing")
    assert code == 0
    rec = json.loads(out_path.read_text())
    grid = FluxGrid.from_dict(rec["flux_grid"])
    assert grid.n == 8
    assert grid.chern == pytest.approx(rec["chern_real"], abs=1e-12)
    assert FluxGrid.from_dict(grid.to_dict()).to_dict() == grid.to_dict()


def test_no_timing_reruns_byte_identical(capsys):
    argv = ("flux", "--backend", "statevector+shots", "--n", "5", "--seed", "7", "--no-timing")
    _, first, _ = run_cli(capsys, *argv)
    _, second, _ = run_cli(capsys, *argv)
    assert first == second
    assert "wall_time_s" not in json.loads(first)["meta"]


def test_timing_recorded_by_default(capsys):
    _, out, _ = run_cli(capsys, "flux", "--n", "4")
    assert "wall_time_s" in json.loads(out)["meta"]


def test_config_echo_reproduces_run(capsys, tmp_path):
    first = tmp_path / "a.json"
    run_cli(capsys, "flux", "--backend", "statevector+shots", "--n", "5", "--u", "-1", "--seed", "3",
            "--no-timing", "--out", str(first))
    _, again, _ = run_cli(capsys, "flux", "--config", str(first), "--no-timing")
    assert again == first.read_text()


def test_threads_do_not_change_results():
    cfg = RunConfig(model="qwz", params={"u": 1.0}, backend="statevector+shots", n=5, seed=11)
    one = cmd_flux(cfg, threads=1, timing=False).to_json()
    two = cmd_flux(cfg, threads=2, timing=False).to_json()
    assert one == two


def test_csv_export(capsys, tmp_path):
    csv_path = tmp_path / "flux.csv"
    code, _, _ = run_cli(capsys, "flux", "--n", "4", "--csv", str(csv_path), "--no-timing")
    assert code == 0
    rows = [ln.split() for ln in csv_path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    assert len(rows) == 16
    assert all(len(r) == 3 for r in rows)


# --- sweep -----------------------------------------------------------------------


def test_qwz_sweep_is_step_function(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--param", "u", "--from", "-3.5", "--to", "3.5",
                           "--points", "8", "--no-timing")
    assert code == 0
    recs = json.loads(out)
    assert len(recs) == 8
    for rec in recs:
        u = rec["config"]["params"]["u"]
        assert rec["chern_int"] == qwz_expected_chern(u)


def test_haldane_phi_sweep():
    cfg = RunConfig(model="haldane", params={"m": 0.0, "phi": 0.0})
    recs = commands.cmd_sweep(cfg, "phi", -np.pi, np.pi, 12, timing=False)
    checked = 0
    for rec in recs:
        want = haldane_expected_chern(0.0, rec["config"]["params"]["phi"])
        if want is None:
            continue
        assert rec["chern_int"] == want
        checked += 1
    assert checked == 10


def test_sweep_records_failing_points():
    recs = commands.cmd_sweep(RunConfig(model="qwz", params={"u": 0.0}), "u", 1.0, 3.0, 3, timing=False)
    assert "error" in recs[1] and recs[1]["exit_code"] == 3
    assert recs[0]["chern_int"] == 1 and recs[2]["chern_int"] == 0


def test_sweep_seeds_are_distinct():
    recs = commands.cmd_sweep(RunConfig(model="qwz", params={"u": 1.0}), "u", 0.5, 1.5, 3, timing=False)
    seeds = [r["config"]["seed"] for r in recs]
    assert len(set(seeds)) == 3


# --- phase diagram -----------------------------------------------------------------


def test_phase_diagram_oracle():
    rec = cmd_phase_diagram(RunConfig(model="haldane", params={}), (-6, 6), (-np.pi, np.pi), (21, 21),
                            timing=False).to_dict()
    cells = far_cells(rec["expected"])
    assert len(cells) > 100
    for a, b in cells:
        assert rec["chern_int_grid"][a][b] == rec["expected"][a][b]


def test_phase_diagram_statevector_coarse():
    rec = cmd_phase_diagram(RunConfig(model="haldane", params={}, backend="statevector"), (-6, 6),
                            (-np.pi, np.pi), (7, 7), timing=False).to_dict()
    checked = 0
    for a, row in enumerate(rec["expected"]):
        for b, want in enumerate(row):
            if want is None:
                continue
            assert rec["chern_int_grid"][a][b] == want, (rec["m"][a], rec["phi"][b])
            checked += 1
    assert checked == 46


def test_phase_diagram_degenerate_range():
    rec = cmd_phase_diagram(RunConfig(model="haldane", params={}), (1.0, 1.0), (-np.pi, np.pi), (5, 7),
                            timing=False).to_dict()
    assert len(rec["grid"]) == 1 and len(rec["grid"][0]) == 7
    assert rec["m"] == [1.0]


def test_phase_diagram_rejects_zero_resolution():
    with pytest.raises(commands.ConfigError):
        cmd_phase_diagram(RunConfig(model="haldane", params={}), (0, 1), (0, 1), (0, 5))


def test_phase_diagram_csv(capsys, tmp_path):
    csv_path = tmp_path / "pd.csv"
    code, _, _ = run_cli(capsys, "phase-diagram", "--res-m", "3", "--res-phi", "4", "--n", "6",
                         "--csv", str(csv_path), "--no-timing")
    assert code == 0
    rows = [ln.split() for ln in csv_path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    assert len(rows) == 12


# --- wannier ---------------------------------------------------------------------


@pytest.mark.parametrize("u", [-3.0, -1.0, 1.0, 3.0])
def test_wannier_oracle_winding(capsys, u):
    code, out, _ = run_cli(capsys, "wannier", "--u", str(u), "--no-timing")
    assert code == 0
    rec = json.loads(out)
    assert rec["chern_int"] == qwz_expected_chern(u)
    assert len(rec["trace"]["centers"]) == 24


def test_wannier_statevector_small():
    cfg = RunConfig(model="qwz", params={"u": -1.0}, backend="statevector", n_ky=16, n_k=30, qpe_m=8,
                    qpe_meas=7, qpe_shots=200)
    rec = commands.cmd_wannier(cfg, timing=False)
    assert rec.chern_int == -1


def test_wannier_double_loop_small():
    # the double loop resolves X_W only modulo pi, so it needs twice the ky density
    cfg = RunConfig(model="qwz", params={"u": 1.0}, backend="statevector", n_ky=32, n_k=30, qpe_m=8,
                    qpe_meas=7, qpe_shots=200, double_loop=True)
    rec = commands.cmd_wannier(cfg, timing=False)
    assert rec.chern_int == 1
    assert all(-np.pi / 2 <= x < np.pi / 2 for x in rec.payload["trace"]["centers"])


def test_wannier_haldane_mirror_violation(capsys):
    code, _, err = run_cli(capsys, "wannier", "--model", "haldane", "--m", "0", "--phi", "1.5",
                           "--backend", "statevector", "--n-ky", "8")
    assert code == 3
    assert "double loop" in err


# --- heisenberg --------------------------------------------------------------------


@pytest.mark.parametrize("n, tol", [(2, 1e-10), (4, 1e-6), (6, 1e-6)])
def test_heisenberg_quantized(capsys, n, tol):
    code, out, _ = run_cli(capsys, "heisenberg", "--n-sites", str(n), "--no-timing")
    assert code == 0
    rec = json.loads(out)
    assert rec["residual"] < tol
    assert rec["quantized"] == 1


def test_heisenberg_decoupled_twisted_link(capsys):
    code, out, _ = run_cli(capsys, "heisenberg", "--n-sites", "4", "--boundary", "periodic",
                           "--twisted-link", "3", "--twisted-j", "0", "--no-timing")
    assert code == 0
    rec = json.loads(out)
    assert rec["quantized"] == 0
    assert rec["residual"] < 1e-10


def test_heisenberg_degenerate_ring_exits_3(capsys):
    code, _, _ = run_cli(capsys, "heisenberg", "--n-sites", "4", "--boundary", "periodic")
    assert code == 3


# --- exit codes and threads ----------------------------------------------------------


def test_exit_code_config_error(capsys):
    code, _, err = run_cli(capsys, "flux", "--backend", "statevector+shots", "--shots", "0")
    assert code == 2
    assert "shots" in err


def test_exit_code_argparse(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["flux", "--backend", "quantum"])
    assert exc.value.code == 2


def test_exit_code_gap_closure(capsys):
    code, _, err = run_cli(capsys, "flux", "--u", "2")
    assert code == 3
    assert "gap" in err.lower()


def test_exit_code_backend_failure(capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise BackendError("simulated backend crash")

    monkeypatch.setattr(cli, "cmd_flux", boom)
    code, _, err = run_cli(capsys, "flux")
    assert code == 4
    assert "backend crash" in err


def test_threads_env(monkeypatch):
    monkeypatch.setenv("CHERNSIM_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(1) == 1
    monkeypatch.delenv("CHERNSIM_THREADS")
    assert resolve_threads(None) >= 1


def test_threads_env_invalid(monkeypatch):
    monkeypatch.setenv("CHERNSIM_THREADS", "zero")
    with pytest.raises(commands.ConfigError):
        resolve_threads(None)


@pytest.mark.parametrize("chi, want", [(1, 0), (2, 1)])
def test_wannier_mps_bond_dimension(chi, want):
    # a product state cannot carry the work-register/system entanglement QPE needs
    cfg = RunConfig(model="qwz", params={"u": 1.0}, backend="mps", chi_max=chi, n_k=30, n_ky=16,
                    qpe_m=7, qpe_meas=6, qpe_shots=300)
    assert commands.cmd_wannier(cfg, timing=False).chern_int == want


def test_wannier_double_loop_default_register():
    # 2^10 powers of an 800-factor product: must stay unitary to gate tolerance
    cfg = RunConfig(model="qwz", params={"u": 1.0}, backend="statevector", n_ky=32, double_loop=True)
    assert commands.cmd_wannier(cfg, timing=False).chern_int == 1


def test_wannier_rejects_noisy_backend(capsys):
    code, _, err = run_cli(capsys, "wannier", "--backend", "noisy")
    assert code == 2
    assert "noise" in err
