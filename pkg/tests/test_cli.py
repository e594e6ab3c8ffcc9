import pytest

from svflow.cli import ConfigError, load_config, run


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run(["definitely-not-a-subcommand"])
    assert exc.value.code == 2


def test_no_subcommand_is_usage_error(capsys):
    assert run([]) == 2
    assert "no subcommand" in capsys.readouterr().err


def test_virasoro_subcommand(tmp_path, capsys):
    out = tmp_path / "reports"
    code = run(["virasoro", "--max-index", "2", "--output", str(out), "--seed", "7"])
    assert code == 0
    table = (out / "virasoro.csv").read_text().splitlines()
    assert table[0] == "m,n,max_residual,bracket_coefficient,bracket_index,seed"
    # 5x5 index pairs
    assert len(table) == 1 + 25
    assert "worst" in capsys.readouterr().out


def test_primary_subcommand_reports_transform(tmp_path, capsys):
    out = tmp_path / "r"
    code = run(
        [
            "primary",
            "--eps", "1 + 0.1*t + 0.05*t^2",
            "--chi", "0.7",
            "--m", "1.3",
            "--point", "0.5,1.2",
            "--output", str(out),
        ]
    )
    assert code == 0
    text = capsys.readouterr().out
    assert "t' = " in text and "prefactor" in text
    assert (out / "primary.csv").exists()


def test_flow_subcommand_with_charge(tmp_path):
    out = tmp_path / "r"
    code = run(
        [
            "flow",
            "--field", "t;-r",
            "--vars", "t,r",
            "--point", "1.0,0.5",
            "--rho", "0.3",
            "--charge", "0.2*t",
            "--psi", "t*r",
            "--output", str(out),
        ]
    )
    assert code == 0
    body = (out / "flow.csv").read_text()
    assert "apply_exponential" in body and "pushforward_residual" in body


def test_curvature_with_metric_file(tmp_path):
    metric = tmp_path / "sphere.metric"
    metric.write_text(
        "dim = 2\ncoords = theta, phi\nsplit = theta | phi\n"
        "g[0,0] = 1\ng[1,1] = sin(theta)^2\n"
    )
    out = tmp_path / "r"
    code = run(["curvature", "--metric", str(metric), "--output", str(out)])
    assert code == 0
    assert (out / "curvature.csv").exists()


def test_frame_failure_exit_code(tmp_path, capsys):
    # one iteration cannot converge the accelerating case
    code = run(
        [
            "frame",
            "--f", "0.05*t^2",
            "--grid", "0,0.5,-0.3,0.35,11,11",
            "--max-iter", "1",
            "--output", str(tmp_path / "r"),
        ]
    )
    assert code == 1
    assert "FAILED" in capsys.readouterr().err


def test_error_exit_code_for_bad_input(tmp_path, capsys):
    code = run(
        [
            "frame",
            "--f", "2*t",  # superluminal
            "--grid", "0,1,-3,3,11,11",
            "--output", str(tmp_path / "r"),
        ]
    )
    assert code == 1


# ------------------------------------------------------------ config files


def test_minimal_config_applies_defaults(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\ncommand = correlator\n")
    code = run(["correlator", "--config", str(cfg), "--output", str(tmp_path / "r")])
    assert code == 0


def test_config_supplies_command_and_output(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[run]\ncommand = correlator\noutput = {tmp_path / 'r'}\n")
    assert run(["correlator", "--config", str(cfg)]) == 0
    assert (tmp_path / "r" / "correlator.csv").exists()


def test_flag_overrides_config(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[run]\ncommand = correlator\nseed = 1\noutput = {out_a}\n")
    assert run(["correlator", "--config", str(cfg)]) == 0
    assert run(["correlator", "--config", str(cfg), "--seed", "1",
                "--output", str(out_b)]) == 0
    # same seed, different output dir: identical bytes prove the flag won
    assert (out_a / "correlator.csv").read_bytes() == (out_b / "correlator.csv").read_bytes()
    # different seed now changes the report
    out_c = tmp_path / "c"
    assert run(["correlator", "--config", str(cfg), "--seed", "2",
                "--output", str(out_c)]) == 0
    assert (out_a / "correlator.csv").read_bytes() != (out_c / "correlator.csv").read_bytes()


def test_config_validation_errors(tmp_path):
    bad_tol = tmp_path / "bad.ini"
    bad_tol.write_text("[run]\ncommand = flow\nabs_tol = -1e-9\n")
    with pytest.raises(ConfigError) as exc:
        load_config(bad_tol)
    assert "abs_tol" in str(exc.value)

    missing = tmp_path / "nope.ini"
    with pytest.raises(ConfigError):
        load_config(missing)

    no_section = tmp_path / "flat.ini"
    no_section.write_text("command = flow\n")
    with pytest.raises(ConfigError):
        load_config(no_section)


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\ncommand = flow\nabs_tol = -1\n")
    code = run(["flow", "--config", str(bad)])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_same_seed_reports_are_byte_identical(tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    for out in (out1, out2):
        assert run(["virasoro", "--max-index", "1", "--seed", "5",
                    "--output", str(out)]) == 0
    assert (out1 / "virasoro.csv").read_bytes() == (out2 / "virasoro.csv").read_bytes()


def test_bad_formula_is_usage_error(tmp_path, capsys):
    code = run(
        [
            "flow",
            "--field", "t +",  # malformed
            "--vars", "t",
            "--point", "1.0",
            "--output", str(tmp_path / "r"),
        ]
    )
    assert code == 2
    assert "formula error" in capsys.readouterr().err
