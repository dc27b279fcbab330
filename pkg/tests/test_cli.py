import json

from multigrid_ilc.cli import main


def dfd1_scenario(tmp_path):
    doc = {
        "name": "cli-dfd1",
        "mgs": [
            {"model": "swing-governor", "M": 3e7, "D": 1e4, "T_g": 0.3,
             "inv_R": 4e7, "rating": 4e8},
            {"model": "swing-governor", "M": 1.5e7, "D": 5e3, "T_g": 0.3,
             "inv_R": 2e7, "rating": 2e8},
        ],
        "ilcs": [{"endpoints": [1, 2], "scheme": "dual-freq-droop-1"}],
        "events": [{"time": 1.0, "mg": 1, "delta_p_load": -1e6}],
        "sim": {"t_end": 5.0},
    }
    path = tmp_path / "dfd1.json"
    path.write_text(json.dumps(doc))
    return path


def test_usage_error_exit_code(capsys):
    assert main([]) == 1
    assert main(["simulate"]) == 1


def test_validation_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"mgs": [], "ilcs": []}))
    assert main(["simulate", "--scenario", str(bad), "--out", str(tmp_path)]) == 2


def test_numerical_error_exit_code(tmp_path, capsys):
    # a sweep whose direction cannot bracket raises a numerical error
    code = main([
        "sweep", "--scenario", str(dfd1_scenario(tmp_path)),
        "--param", "ilc.tau", "--lo", "0.01", "--hi", "1.0",
        "--direction", "min-stable", "--tol", "0.01",
    ])
    assert code == 3


def test_simulate_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    code = main([
        "simulate", "--scenario", str(dfd1_scenario(tmp_path)),
        "--out", str(out), "--dump-config",
    ])
    assert code == 0
    assert (out / "cli-dfd1-trajectory.csv").exists()
    assert (out / "cli-dfd1-frequencies.svg").exists()
    assert (out / "cli-dfd1-resolved.json").exists()
    header = (out / "cli-dfd1-trajectory.csv").read_text().split("\n")[0]
    assert header.startswith("t,mg1.omega,mg2.omega,ilc1.p1,ilc1.p2,ilc1.vdc")


def test_passivity_verdict_line(tmp_path, capsys):
    out = tmp_path / "out"
    code = main([
        "passivity", "--scenario", str(dfd1_scenario(tmp_path)),
        "--ilc", "1", "--out", str(out),
    ])
    assert code == 0
    captured = capsys.readouterr().out
    assert "verdict: non-passive" in captured
    assert "rad/s" in captured
    assert (out / "cli-dfd1-ilc1-passivity.csv").exists()
    first = (out / "cli-dfd1-ilc1-passivity.csv").read_text().split("\n")[0]
    assert first == "omega,min_eig,diag1_re,diag2_re"


def test_linearize_closed_loop(tmp_path, capsys):
    out = tmp_path / "out"
    code = main([
        "linearize", "--scenario", str(dfd1_scenario(tmp_path)), "--out", str(out),
    ])
    assert code == 0
    captured = capsys.readouterr().out
    assert "spectral abscissa" in captured
    assert (out / "cli-dfd1-closed-loop-A.csv").exists()


def test_sweep_command(tmp_path, capsys):
    code = main([
        "sweep", "--scenario", str(dfd1_scenario(tmp_path)),
        "--param", "ilc.K_dc", "--lo", "0.0", "--hi", "1.0",
        "--direction", "min-stable", "--tol", "0.5",
    ])
    assert code == 0
    captured = capsys.readouterr().out
    assert "status: stable-throughout" in captured


def test_exit_codes_stable_across_runs(tmp_path):
    scn = dfd1_scenario(tmp_path)
    args = ["passivity", "--scenario", str(scn), "--ilc", "1",
            "--out", str(tmp_path / "x")]
    assert main(args) == main(args) == 0


def test_table3_plumbing(tmp_path, monkeypatch, capsys):
    """The table3 subcommand forwards options and writes both artifacts."""
    import multigrid_ilc.cli as cli_mod
    from multigrid_ilc.sweep import Cell, SweepTable

    captured_args = {}

    def fake_harness(resolved, workers=None, cache_dir=None):
        captured_args.update(workers=workers, cache_dir=cache_dir)
        cell = Cell("dual-freq-droop-1", "min_kdc", "stable-throughout", 0.0,
                    "0.00", "0.00")
        return SweepTable(rows=({"scheme": "dual-freq-droop-1", "min_kdc": cell,
                                 "max_tau": cell, "max_gain": cell,
                                 "min_l_mh": cell},))

    monkeypatch.setattr(cli_mod, "table3_harness", fake_harness)
    out = tmp_path / "t3"
    code = cli_mod.main([
        "table3", "--scenario", "two-mg", "--out", str(out),
        "--workers", "2", "--cache", str(tmp_path / "cache"),
    ])
    assert code == 0
    assert captured_args["workers"] == 2
    assert (out / "table3.csv").exists()
    assert (out / "table3.txt").exists()
