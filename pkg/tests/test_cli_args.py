"""
Tests for CLI argument parsing and handling.
"""

import os
import sys

import pytest

from wak_converse import cli
from wak_converse.cli import (
    RunOptions,
    _default_output,
    main,
    parse_arguments,
)
from wak_converse.config import ExperimentConfig


def _config(**overrides):
    values = {
        "source": "dsbs(0.1)",
        "blocklengths": [4, 8],
        "r0": 0.5,
        "r2": 0.8,
        "base_dir": "/data/experiments",
    }
    values.update(overrides)
    return ExperimentConfig(**values)


def test_parse_sweep_minimal():
    """Test parsing with only the required config path argument."""
    args = parse_arguments(["sweep", "my_config.yaml"])

    assert args.command == "sweep"
    assert args.config_path == "my_config.yaml"
    assert args.seed is None
    assert args.out is None
    assert args.format is None
    assert args.threads is None
    assert args.verbose is False
    assert args.timing is False


def test_parse_sweep_all_flags():
    """Test parsing with all common flags."""
    args = parse_arguments(
        [
            "sweep",
            "config.yaml",
            "--seed",
            "7",
            "--out",
            "result.json",
            "--format",
            "json",
            "--threads",
            "4",
            "--verbose",
            "--timing",
        ]
    )

    assert args.seed == 7
    assert args.out == "result.json"
    assert args.format == "json"
    assert args.threads == 4
    assert args.verbose is True
    assert args.timing is True


def test_parse_selftest_flags():
    """Test --quick and the hidden fault flag."""
    args = parse_arguments(["selftest", "--quick", "--inject-fault", "x"])

    assert args.command == "selftest"
    assert args.quick is True
    assert args.inject_fault == "x"


def test_parse_reduce():
    """Test the code and type positionals."""
    args = parse_arguments(["reduce", "code.json", "type.json"])

    assert args.code_path == "code.json"
    assert args.type_path == "type.json"


def test_parse_threads_only_where_work_is_parallel():
    """Test that --threads belongs to sweep, region and bound."""
    region = parse_arguments(["region", "dsbs(0.1)", "--threads", "3"])
    assert region.threads == 3
    assert (
        parse_arguments(["bound", "c.json", "dsbs(0.1)", "--threads", "2"])
        .threads
        == 2
    )
    for argv in (
        ["reduce", "code.json", "type.json", "--threads", "2"],
        ["selftest", "--threads", "2"],
    ):
        with pytest.raises(SystemExit) as excinfo:
            parse_arguments(argv)
        assert excinfo.value.code == 2


def test_parse_region_defaults():
    """Test the region defaults."""
    args = parse_arguments(["region", "dsbs(0.1)"])

    assert args.source == "dsbs(0.1)"
    assert args.mu_grid is None
    assert args.delta == 0.0
    assert args.card is None
    assert args.restarts == 32


def test_parse_region_mu_grid():
    """Test the comma-separated slope grid."""
    args = parse_arguments(["region", "dsbs(0.1)", "--mu-grid", "1,1.5,3"])

    assert args.mu_grid == [1.0, 1.5, 3.0]


@pytest.mark.parametrize("grid", ["1,x", "-1,2", ","])
def test_parse_region_rejects_bad_mu_grid(grid):
    """Test that malformed or negative slopes are a usage error."""
    with pytest.raises(SystemExit) as excinfo:
        parse_arguments(["region", "dsbs(0.1)", "--mu-grid", grid])

    assert excinfo.value.code == 2


def test_parse_bound_defaults():
    """Test the bound defaults."""
    args = parse_arguments(["bound", "code.json", "dsbs(0.1)"])

    assert args.mode == "exact"
    assert args.trials == 10_000


def test_parse_rejects_unknown_bound_mode():
    """Test that the bound mode is limited to exact and mc."""
    with pytest.raises(SystemExit):
        parse_arguments(["bound", "code.json", "dsbs(0.1)", "--mode", "off"])


def test_parse_requires_command():
    """Test that a subcommand is required."""
    with pytest.raises(SystemExit) as excinfo:
        parse_arguments([])

    assert excinfo.value.code == 2


def test_create_run_options_minimal():
    """Test creating RunOptions from config only."""
    config = _config(seed=3, threads=2)
    args = parse_arguments(["sweep", "/data/experiments/small.yaml"])

    options = RunOptions.from_config_and_args(config, args)

    assert options.config == config
    assert options.seed == 3
    assert options.threads == 2
    assert options.output_format == "csv"
    assert options.output == "/data/experiments/small_sweep.csv"
    assert options.verbose is False
    assert options.run_log_path is None
    assert options.timing is False


def test_create_run_options_flags_override_config():
    """Test that CLI flags take precedence over the configuration."""
    config = _config(seed=3, threads=2, output_format="csv")
    args = parse_arguments(
        [
            "sweep",
            "/data/experiments/small.yaml",
            "--seed",
            "9",
            "--threads",
            "1",
            "--format",
            "json",
        ]
    )

    options = RunOptions.from_config_and_args(config, args)

    assert options.seed == 9
    assert options.threads == 1
    assert options.output == "/data/experiments/small_sweep.json"


def test_create_run_options_config_output_is_relative_to_config():
    """Test that a relative output.path is resolved beside the config."""
    config = _config(output_path="results/sweep.csv")
    args = parse_arguments(["sweep", "/data/experiments/small.yaml"])

    options = RunOptions.from_config_and_args(config, args)

    assert options.output == os.path.join(
        "/data/experiments", "results/sweep.csv"
    )


def test_create_run_options_out_flag_is_kept():
    """Test that --out is used as given."""
    args = parse_arguments(["sweep", "small.yaml", "--out", "mine.csv"])

    options = RunOptions.from_config_and_args(_config(), args)

    assert options.output == "mine.csv"


def test_create_run_options_verbose_run_log():
    """Test that verbose mode logs beside the output."""
    args = parse_arguments(
        ["sweep", "small.yaml", "--out", "/tmp/out/sweep.csv", "--verbose"]
    )

    options = RunOptions.from_config_and_args(_config(), args)

    assert options.verbose is True
    assert options.run_log_path == "/tmp/out/sweep_run.log"


@pytest.mark.parametrize(
    "flags",
    [["--seed", "-1"], ["--threads", "0"]],
)
def test_create_run_options_rejects_bad_overrides(flags):
    """Test that a negative seed or zero threads is rejected."""
    args = parse_arguments(["sweep", "small.yaml"] + flags)

    with pytest.raises(ValueError):
        RunOptions.from_config_and_args(_config(), args)


def test_default_output_for_source_family(tmp_path, monkeypatch):
    """Test that a family name becomes a file name in the cwd."""
    monkeypatch.chdir(tmp_path)

    output = _default_output("dsbs(0.1)", "_region.csv")

    assert output == os.path.join(os.getcwd(), "dsbs_0.1_region.csv")


def test_default_output_beside_input(tmp_path):
    """Test <basename><suffix> in the input's directory."""
    code = tmp_path / "code.json"
    code.write_text("{}")

    assert _default_output(str(code), "_gw.json") == str(
        tmp_path / "code_gw.json"
    )


def test_main_with_missing_config(monkeypatch, capsys):
    """Test that a missing configuration file exits with 2."""
    monkeypatch.setattr(
        sys, "argv", ["wak_converse", "sweep", "/nonexistent/config.yaml"]
    )

    assert main() == 2
    captured = capsys.readouterr()
    assert "Error: File not found" in captured.err


def test_main_with_invalid_config(tmp_path, monkeypatch, capsys):
    """Test that a config validation error exits with 2."""
    config_path = tmp_path / "bad.yaml"
    config_path.write_text("source: dsbs(0.1)\n")
    monkeypatch.setattr(
        sys, "argv", ["wak_converse", "sweep", str(config_path)]
    )

    assert main() == 2
    captured = capsys.readouterr()
    assert "Configuration validation failed" in captured.err
    assert "blocklengths" in captured.err


def test_main_keyboard_interrupt(monkeypatch, capsys):
    """Test that an interrupt exits with 130."""

    def interrupted(args):
        raise KeyboardInterrupt

    monkeypatch.setitem(
        cli.COMMANDS, "selftest", interrupted
    )
    monkeypatch.setattr(sys, "argv", ["wak_converse", "selftest"])

    assert main() == 130
    assert "cancelled" in capsys.readouterr().err
