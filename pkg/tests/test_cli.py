import json
from types import SimpleNamespace

import numpy as np
import pytest

from slipflow.cli import ConfigError, build_config, main


def _args(**kw):
    base = dict(config=None, example=None, mesh_n=None, out=None, seed=None)
    base.update(kw)
    return SimpleNamespace(**base)


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_parser_rejects_unknown_example():
    with pytest.raises(SystemExit) as exc:
        main(["solve-state", "--example", "9"])
    assert exc.value.code == 2


def test_build_config_requires_example():
    with pytest.raises(ConfigError):
        build_config(_args())


def test_build_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('example = 2\nbogus = 1\n')
    with pytest.raises(ConfigError, match="bogus"):
        build_config(_args(config=str(cfg)))


def test_build_config_rejects_bad_values(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('example = 2\nmu = -1.0\n')
    with pytest.raises(ConfigError, match="invalid parameter"):
        build_config(_args(config=str(cfg)))
    missing = tmp_path / "nope.toml"
    with pytest.raises(ConfigError, match="not found"):
        build_config(_args(config=str(missing)))


def test_config_file_overrides_catalog(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('example = 2\nmu = 2.5\nalpha3 = 0.9\neta = 1.7\n'
                   'f_lower = -1.0\nf_upper = 1.0\n')
    out = build_config(_args(config=str(cfg)))
    assert out.example == 2
    assert out.params.mu == 2.5
    # untouched values come from the catalog entry
    assert out.params.alpha == 1.5
    assert out.weights.alpha3 == 0.9
    assert out.weights.alpha1 == 1.0
    assert out.solver.eta == 1.7
    assert out.box.lower == -1.0
    assert out.box.upper == 1.0


def test_cli_flags_beat_config_file(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('example = 1\nmesh_n = [4]\nseed = 7\n')
    out = build_config(_args(config=str(cfg), example=3, mesh_n=[3], seed=0))
    assert out.example == 3
    assert out.mesh_sizes == (3,)
    assert out.seed == 0


def test_build_config_validates_mesh_list():
    with pytest.raises(ConfigError):
        build_config(_args(example=2, mesh_n=[4, 2]))
    with pytest.raises(ConfigError):
        build_config(_args(example=2, mesh_n=[0]))


def test_solve_state_writes_artifacts(tmp_path, capsys):
    rc = main(["solve-state", "--example", "2", "--mesh-n", "3",
               "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "residuals_ex2_n3.csv").exists()
    assert (tmp_path / "state_ex2_n3.vtk").exists()
    head = (tmp_path / "residuals_ex2_n3.csv").read_text().splitlines()[0]
    assert head == "iteration,velocity_residual,divergence_residual"
    assert "converged" in capsys.readouterr().out


def test_solve_state_reports_failure(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('example = 2\nmax_outer = 0\n')
    rc = main(["solve-state", "--config", str(cfg), "--mesh-n", "2"])
    assert rc == 3


def test_optimize_writes_history_and_fields(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('example = 2\nmax_iter = 2\n')
    rc = main(["optimize", "--config", str(cfg), "--mesh-n", "2", "3",
               "--out", str(tmp_path)])
    assert rc == 0
    for n in (2, 3):
        hist = tmp_path / f"cost_history_ex2_n{n}.csv"
        lines = hist.read_text().splitlines()
        assert lines[0] == ("iter,cost,tracking_u,tracking_p,"
                            "regularization,control_change_L2")
        assert len(lines) >= 3
    assert (tmp_path / "optimal_ex2_n3.vtk").exists()
    assert not (tmp_path / "optimal_ex2_n2.vtk").exists()


def test_optimize_propagates_solver_failure(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('example = 2\nmax_iter = 2\nmax_outer = 0\n')
    rc = main(["optimize", "--config", str(cfg), "--mesh-n", "2"])
    assert rc == 3


def test_convergence_study_needs_reference_mesh():
    rc = main(["convergence-study", "--example", "2",
               "--mesh-n", "3", "6"])
    assert rc == 2


def test_convergence_study_tiny_ladder(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('example = 2\nreference_n = 6\nopt_iters = 2\n')
    rc = main(["convergence-study", "--config", str(cfg),
               "--mesh-n", "3", "6", "--out", str(tmp_path)])
    assert rc == 0
    errs = tmp_path / "errors_ex2.csv"
    lines = errs.read_text().splitlines()
    assert lines[0] == "n,h,err_u_L2,err_u_V,err_p_L2,err_f_L2"
    assert len(lines) == 2
    assert lines[1].startswith("3,")
    assert (tmp_path / "cost_history_ex2_n3.csv").exists()
    assert (tmp_path / "cost_history_ex2_n6.csv").exists()
    assert "relative errors against n=6" in capsys.readouterr().out


def test_check_conditions_writes_report(tmp_path, capsys):
    rc = main(["check-conditions", "--example", "2", "--mesh-n", "4",
               "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "conditions_ex2.json").read_text())
    assert report["example"] == 2
    assert report["mesh_n"] == 4
    assert report["state_converged"] is True
    assert report["existence"]["ok"] is True
    assert report["energy_bound"]["ok"] is True
    assert 2.0 < report["lambda0"] < 2.4
    assert report["delta1_sampled"] <= report["delta1_envelope"] * (1 + 1e-9)
    out = capsys.readouterr().out
    assert "existence" in out and "ok" in out


def test_verify_command_passes(tmp_path, capsys):
    rc = main(["verify", "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "verification_report.json").read_text())
    assert set(report) == {"pointwise_monotonicity", "gateaux_fd",
                           "form_identities", "inf_sup", "trace_constant"}
    assert all(v["passed"] for v in report.values())
    out = capsys.readouterr().out
    assert out.count("PASS") == 5


def test_perturbation_study_writes_rows(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('example = 2\nperturbation_sizes = [0.2, 0.1]\n')
    rc = main(["perturbation-study", "--config", str(cfg),
               "--mesh-n", "3", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "perturbation_ex2_n3.csv").read_text().splitlines()
    assert lines[0] == "t,load_dual_gap,err_u_V,err_p_L2"
    assert len(lines) == 3
    t0 = float(lines[1].split(",")[0])
    assert np.isclose(t0, 0.2)
